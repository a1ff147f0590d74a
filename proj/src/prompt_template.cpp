/*
 * Copyright 2026 The Distill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "distill/prompt_template.hpp"

#include <cctype>

#include "distill/errors.hpp"
#include "distill/io.hpp"

namespace distill {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls on_text(span) / on_placeholder(name) in body order.
template <typename TextFn, typename PlaceholderFn>
void walk(const std::string& body, TextFn on_text, PlaceholderFn on_placeholder) {
  size_t i = 0;
  size_t text_start = 0;
  while (i < body.size()) {
    if (body[i] == '{' && i + 1 < body.size() && ident_start(body[i + 1])) {
      size_t j = i + 1;
      while (j < body.size() && ident_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        on_text(std::string_view(body).substr(text_start, i - text_start));
        on_placeholder(body.substr(i + 1, j - i - 1));
        i = j + 1;
        text_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(std::string_view(body).substr(text_start));
}

}  // namespace

PromptTemplate PromptTemplate::from_body(std::string template_id, std::string body) {
  PromptTemplate t{std::move(template_id), std::move(body), {}};
  walk(t.body, [](std::string_view) {}, [&](const std::string& name) { t.required_placeholders.insert(name); });
  return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(body.size());
  walk(
      body, [&](std::string_view text) { out.append(text); },
      [&](const std::string& name) {
        auto it = values.find(name);
        if (it == values.end())
          throw Error(Errc::missing_placeholder_value, template_id + ": " + name);
        out.append(it->second);
      });
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::string id = path.filename().string();
  if (id.size() > 4 && id.substr(id.size() - 4) == ".txt") id.resize(id.size() - 4);
  return PromptTemplate::from_body(std::move(id), read_file(path));
}

TemplateLibrary::TemplateLibrary(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(Errc::io_error, "template directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") add(load_template(entry.path()));
  }
}

void TemplateLibrary::add(PromptTemplate tmpl) {
  auto id = tmpl.template_id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

const PromptTemplate& TemplateLibrary::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(Errc::unknown_template, id);
  return it->second;
}

std::vector<std::string> TemplateLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

}  // namespace distill

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

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace distill {

/// Plain-text prompt with `{name}` placeholders. Only `{identifier}` spans
/// count as placeholders, so literal JSON braces in a template body are left
/// untouched.
struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::set<std::string> required_placeholders;

  static PromptTemplate from_body(std::string template_id, std::string body);

  /// Byte-exact substitution. Substituted values are never rescanned.
  /// Throws Error(missing_placeholder_value) naming the first unbound
  /// placeholder in body order.
  std::string render(const std::map<std::string, std::string>& values) const;
};

/// Template id is the file name without its ".txt" suffix
/// (templates/synthesize.v1.txt -> "synthesize.v1").
PromptTemplate load_template(const std::filesystem::path& path);

class TemplateLibrary {
 public:
  TemplateLibrary() = default;
  /// Loads every *.txt file in `dir`.
  explicit TemplateLibrary(const std::filesystem::path& dir);

  void add(PromptTemplate tmpl);
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }
  /// Throws Error(unknown_template).
  const PromptTemplate& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace distill

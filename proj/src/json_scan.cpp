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

#include "distill/json_scan.hpp"

#include "distill/text.hpp"

namespace distill {

namespace {

// Index one past the bracket matching text[start], or npos when unbalanced.
size_t match_bracket(std::string_view text, size_t start) {
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '{':
        stack.push_back('}');
        break;
      case '[':
        stack.push_back(']');
        break;
      case '}':
      case ']':
        if (stack.empty() || stack.back() != c) return std::string_view::npos;
        stack.pop_back();
        if (stack.empty()) return i + 1;
        break;
      default:
        break;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view strip_code_fence(std::string_view text) {
  std::string_view t = trim(text);
  if (t.substr(0, 3) != "```") return text;
  size_t first_nl = t.find('\n');
  if (first_nl == std::string_view::npos) return text;
  std::string_view body = t.substr(first_nl + 1);
  size_t close = body.rfind("```");
  if (close == std::string_view::npos) return body;
  return body.substr(0, close);
}

std::vector<json> scan_json_values(std::string_view text) {
  std::vector<json> out;
  size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '{' && c != '[') {
      ++i;
      continue;
    }
    const size_t end = match_bracket(text, i);
    if (end != std::string_view::npos) {
      json value = json::parse(text.substr(i, end - i), nullptr, false);
      if (!value.is_discarded()) {
        out.push_back(std::move(value));
        i = end;
        continue;
      }
    }
    ++i;
  }
  return out;
}

}  // namespace distill

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

#include <string_view>
#include <vector>

#include "distill/io.hpp"

namespace distill {

/// Finds well-formed top-level JSON objects and arrays embedded in free
/// text (model output with prose, markdown fences, or several documents).
///
/// Scans left to right. At each '{' or '[' it locates the balanced closing
/// bracket, honouring string literals and escapes, and tries to parse that
/// span. A span that parses is returned and scanning resumes after it; a
/// span that does not parse is skipped one character at a time, so an
/// unbalanced brace in a preamble cannot hide a later valid document.
std::vector<json> scan_json_values(std::string_view text);

/// Strips a leading/trailing markdown code fence (```json ... ```) if the
/// text is wrapped in one; otherwise returns the text unchanged.
std::string_view strip_code_fence(std::string_view text);

}  // namespace distill

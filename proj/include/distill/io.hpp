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
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace distill {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const fs::path& path);

/// Writes via a sibling temp file and rename, so readers never see a
/// partially written artifact. Parent directories are created.
void write_file_atomic(const fs::path& path, std::string_view content);

/// One compact JSON document per line, '\n' terminated.
std::string to_jsonl(const std::vector<json>& records);

/// Parses line-delimited JSON. Blank lines are skipped; a line that fails to
/// parse throws Error(malformed_record) naming the 1-based line number.
std::vector<json> parse_jsonl(std::string_view content);

inline std::vector<json> read_jsonl(const fs::path& path) {
  return parse_jsonl(read_file(path));
}

/// Compact dump with UTF-8 errors replaced rather than thrown.
std::string dump_compact(const json& value);

}  // namespace distill

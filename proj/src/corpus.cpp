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

#include "distill/corpus.hpp"

#include <set>
#include <unordered_set>

#include "distill/digest.hpp"
#include "distill/errors.hpp"
#include "distill/random.hpp"

namespace distill {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  return std::nullopt;
}

void TaskSchema::validate() const {
  if (task_id.empty()) throw Error(Errc::invalid_schema, "task_id is empty");
  if (input_fields.empty()) throw Error(Errc::invalid_schema, "input_fields is empty");
  std::set<std::string> fields(input_fields.begin(), input_fields.end());
  if (fields.size() != input_fields.size())
    throw Error(Errc::invalid_schema, "duplicate input field name");
  for (const auto& f : input_fields)
    if (f.empty()) throw Error(Errc::invalid_schema, "empty input field name");
  std::set<std::string> labels(label_set.begin(), label_set.end());
  if (labels.size() != label_set.size())
    throw Error(Errc::invalid_schema, "duplicate label in label_set");
  if (labels.size() < 2) throw Error(Errc::invalid_schema, "label_set needs >= 2 labels");
  if (label_field.empty()) throw Error(Errc::invalid_schema, "label_field is empty");
}

bool TaskSchema::has_label(std::string_view label) const {
  for (const auto& l : label_set)
    if (l == label) return true;
  return false;
}

void to_json(json& j, const TaskSchema& schema) {
  j = json{{"task_id", schema.task_id},
           {"input_fields", schema.input_fields},
           {"label_set", schema.label_set},
           {"label_field", schema.label_field},
           {"prompt_template_ids", schema.prompt_template_ids}};
}

void from_json(const json& j, TaskSchema& schema) {
  j.at("task_id").get_to(schema.task_id);
  j.at("input_fields").get_to(schema.input_fields);
  j.at("label_set").get_to(schema.label_set);
  schema.label_field = j.value("label_field", std::string("gold_label"));
  schema.prompt_template_ids =
      j.value("prompt_template_ids", std::map<std::string, std::string>{});
}

json example_to_json(const LabeledExample& example) {
  return json{{"example_id", example.example_id},
              {"inputs", example.inputs},
              {"gold_label", example.gold_label},
              {"split", std::string(to_string(example.split))}};
}

std::vector<LabeledExample> Dataset::split(Split which) const {
  std::vector<LabeledExample> out;
  for (const auto& e : examples)
    if (e.split == which) out.push_back(e);
  return out;
}

const LabeledExample* Dataset::find(std::string_view example_id) const {
  for (const auto& e : examples)
    if (e.example_id == example_id) return &e;
  return nullptr;
}

namespace {

[[noreturn]] void malformed(size_t line, const std::string& reason) {
  throw Error(Errc::malformed_record, "line " + std::to_string(line) + ": " + reason);
}

const std::string& require_string(const json& record, const char* key, size_t line) {
  auto it = record.find(key);
  if (it == record.end()) malformed(line, std::string("missing key '") + key + "'");
  if (!it->is_string()) malformed(line, std::string("key '") + key + "' is not a string");
  return it->get_ref<const std::string&>();
}

LabeledExample parse_record(std::string_view text, size_t line, const TaskSchema& schema) {
  json record = json::parse(text, nullptr, false);
  if (record.is_discarded()) malformed(line, "not valid JSON");
  if (!record.is_object()) malformed(line, "record is not an object");

  LabeledExample ex;
  ex.example_id = require_string(record, "example_id", line);
  if (ex.example_id.empty()) malformed(line, "empty example_id");
  ex.gold_label = require_string(record, "gold_label", line);
  const auto& split_text = require_string(record, "split", line);
  auto split = parse_split(split_text);
  if (!split) malformed(line, "unknown split '" + split_text + "'");
  ex.split = *split;

  auto inputs = record.find("inputs");
  if (inputs == record.end()) malformed(line, "missing key 'inputs'");
  if (!inputs->is_object()) malformed(line, "'inputs' is not an object");
  for (const auto& [name, value] : inputs->items()) {
    if (!value.is_string()) malformed(line, "input '" + name + "' is not a string");
    ex.inputs.emplace(name, value.get<std::string>());
  }

  for (const auto& field : schema.input_fields) {
    auto it = ex.inputs.find(field);
    if (it == ex.inputs.end() || it->second.empty())
      throw Error(Errc::missing_field, ex.example_id + ": " + field);
  }
  if (!schema.has_label(ex.gold_label))
    throw Error(Errc::unknown_label, ex.example_id + ": " + ex.gold_label);
  return ex;
}

}  // namespace

Dataset parse_dataset(std::string_view content, const TaskSchema& schema) {
  schema.validate();
  Dataset ds;
  ds.schema = schema;
  ds.source_digest = sha256_hex(content);

  std::unordered_set<std::string> seen;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < content.size()) {
    size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    LabeledExample ex = parse_record(line, line_no, schema);
    if (!seen.insert(ex.example_id).second) throw Error(Errc::duplicate_id, ex.example_id);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset load_dataset(const fs::path& path, const TaskSchema& schema) {
  if (!fs::exists(path)) throw Error(Errc::io_error, "no such dataset file: " + path.string());
  return parse_dataset(read_file(path), schema);
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& e : dataset.examples) {
    out += dump_compact(example_to_json(e));
    out += '\n';
  }
  return out;
}

SplitCounts split_counts(const Dataset& dataset) {
  SplitCounts c;
  for (const auto& e : dataset.examples) {
    switch (e.split) {
      case Split::train: ++c.train; break;
      case Split::validation: ++c.validation; break;
      case Split::test: ++c.test; break;
    }
  }
  return c;
}

std::vector<LabeledExample> sample_few_shot(std::span<const LabeledExample> pool,
                                            size_t k, uint64_t seed) {
  std::vector<const LabeledExample*> train;
  for (const auto& e : pool)
    if (e.split == Split::train) train.push_back(&e);
  if (k > train.size())
    throw Error(Errc::insufficient_examples, "requested " + std::to_string(k) +
                                                 ", available " + std::to_string(train.size()));
  std::vector<LabeledExample> out;
  out.reserve(k);
  for (size_t i : sample_indices(train.size(), k, seed)) out.push_back(*train[i]);
  return out;
}

std::vector<LabeledExample> sample_few_shot(const Dataset& dataset, size_t k, uint64_t seed) {
  return sample_few_shot(std::span<const LabeledExample>(dataset.examples), k, seed);
}

}  // namespace distill

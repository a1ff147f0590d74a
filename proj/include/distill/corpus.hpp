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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill/io.hpp"

namespace distill {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

/// Shape of one classification task: which input fields an example carries,
/// the closed label set, and which prompt templates each phase uses.
struct TaskSchema {
  std::string task_id;
  std::vector<std::string> input_fields;
  std::vector<std::string> label_set;
  /// Extra placeholder name bound to the gold label when rendering the
  /// extraction prompt (StereoSet's template calls it `bias_type`).
  /// `gold_label` is always bound as well.
  std::string label_field = "gold_label";
  std::map<std::string, std::string> prompt_template_ids;

  /// Throws Error(invalid_schema).
  void validate() const;
  bool has_label(std::string_view label) const;

  friend bool operator==(const TaskSchema&, const TaskSchema&) = default;
};

void to_json(json& j, const TaskSchema& schema);
void from_json(const json& j, TaskSchema& schema);

struct LabeledExample {
  std::string example_id;
  std::map<std::string, std::string> inputs;
  std::string gold_label;
  Split split = Split::train;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

json example_to_json(const LabeledExample& example);

struct SplitCounts {
  size_t train = 0;
  size_t validation = 0;
  size_t test = 0;

  size_t total() const { return train + validation + test; }
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// Immutable once loaded; safe to share across reader threads.
struct Dataset {
  TaskSchema schema;
  std::vector<LabeledExample> examples;
  std::string source_digest;

  std::vector<LabeledExample> split(Split which) const;
  const LabeledExample* find(std::string_view example_id) const;
};

/// Loads a line-delimited record file. Every record must carry example_id,
/// inputs, gold_label and split; records are validated against `schema`
/// and kept in file order. Nothing is dropped silently: the first invalid
/// record aborts the load.
Dataset load_dataset(const fs::path& path, const TaskSchema& schema);

/// Same as load_dataset over in-memory content; the digest covers `content`.
Dataset parse_dataset(std::string_view content, const TaskSchema& schema);

/// Inverse of parse_dataset: one record per line in dataset order.
std::string serialize_dataset(const Dataset& dataset);

SplitCounts split_counts(const Dataset& dataset);

/// k distinct train-split examples chosen by a seeded partial shuffle.
/// Identical (pool, k, seed) always yields the same selection and order.
/// Throws Error(insufficient_examples) when k exceeds the train split.
std::vector<LabeledExample> sample_few_shot(const Dataset& dataset, size_t k,
                                            uint64_t seed);
std::vector<LabeledExample> sample_few_shot(std::span<const LabeledExample> pool,
                                            size_t k, uint64_t seed);

}  // namespace distill

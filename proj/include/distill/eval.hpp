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

#include "distill/corpus.hpp"
#include "distill/gateway.hpp"
#include "distill/prompt_template.hpp"

namespace distill {

inline constexpr std::string_view kAbstain = "ABSTAIN";

enum class Regime { zero_shot, few_shot, pld };
std::string_view to_string(Regime regime);
std::optional<Regime> parse_regime(std::string_view text);

struct Prediction {
  std::string example_id;
  std::string raw_text;
  std::optional<std::string> parsed_label;  // nullopt = ABSTAIN
  double latency_ms = 0;
  std::string error;  // transport failure note, empty otherwise

  bool abstained() const { return !parsed_label.has_value(); }
};

json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const json& j);

/// Maps free-form student output to a label, case-insensitively:
///  1. the whole output, trimmed of whitespace and surrounding punctuation,
///     equals a label;
///  2. otherwise exactly one label occurs as a whole word (or phrase);
///  3. otherwise ABSTAIN (nullopt).
std::optional<std::string> parse_label(std::string_view raw, std::span<const std::string> labels);

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  size_t support = 0;
};

struct EvalReport {
  /// Gold classes only (labels with support > 0).
  std::map<std::string, ClassScores> per_class;
  double macro_f1 = 0;
  /// Axis order for `confusion`: label set, then any other label seen, then ABSTAIN.
  std::vector<std::string> confusion_labels;
  /// confusion[gold][predicted]
  std::vector<std::vector<size_t>> confusion;
  size_t n = 0;
  size_t abstentions = 0;
  Regime regime = Regime::pld;
  std::optional<int> instruction_set_version;
  std::string split = "test";
  std::string student_id;
};

json report_to_json(const EvalReport& report);
EvalReport report_from_json(const json& j);

/// Per-class precision/recall/F1 with 0 for any 0/0, averaged over gold
/// classes. ABSTAIN is never a class; it counts as a wrong prediction.
/// Throws Error(unknown_example_id | duplicate_prediction).
EvalReport macro_f1(std::span<const Prediction> predictions, const std::map<std::string, std::string>& gold,
                    std::span<const std::string> label_set);

struct EvalConfig {
  Regime regime = Regime::pld;
  size_t k_shots = 5;
  uint64_t seed = 0;
  BackendConfig student;
  int max_output_tokens = 64;
  double temperature = 0.0;

  void validate() const;
};

struct LatencySummary {
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
};

LatencySummary summarize_latency(std::span<const Prediction> predictions);

struct EvalTemplates {
  const PromptTemplate* query = nullptr;
  const PromptTemplate* few_shot = nullptr;
};

/// "field: value" lines in schema field order.
std::string render_inputs(const LabeledExample& example, const TaskSchema& schema);

/// Exemplar blocks ("Input: ... / Label: ...") in sample order.
std::string render_exemplars(std::span<const LabeledExample> exemplars, const TaskSchema& schema);

struct EvalOutcome {
  EvalReport report;
  std::vector<Prediction> predictions;  // split order
  LatencySummary latency;
};

/// One student call per example under `system_prompt`. The few-shot regime
/// samples k train exemplars from `few_shot_pool` once (seeded) and prefixes
/// them to every user prompt. Transport errors become ABSTAIN predictions
/// with an error note; evaluation never aborts mid-split.
EvalOutcome evaluate(std::span<const LabeledExample> split, const std::string& system_prompt,
                     const EvalConfig& config, const TaskSchema& schema, const EvalTemplates& templates,
                     std::span<const LabeledExample> few_shot_pool, Gateway& gateway);

}  // namespace distill

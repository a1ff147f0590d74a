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
#include "distill/eval.hpp"
#include "distill/gateway.hpp"
#include "distill/prompt_template.hpp"
#include "distill/synthesis.hpp"

namespace distill {

struct ResolutionRound {
  int round_index = 1;
  int input_version = 0;
  int output_version = 1;
  double train_macro_f1_before = 0;
  double val_macro_f1_before = 0;
  double val_macro_f1_after = 0;
  std::vector<std::string> failure_sample_ids;
  std::vector<std::string> success_sample_ids;
  bool accepted = false;  // output became the new best version
};

enum class StopReason { converged, max_rounds, no_failures, resolver_error };
std::string_view to_string(StopReason reason);

struct ConvergenceState {
  std::vector<ResolutionRound> rounds;
  int best_version = 0;
  double best_val_macro_f1 = 0;
  double initial_val_macro_f1 = 0;
  StopReason stop_reason = StopReason::max_rounds;
  std::vector<std::string> warnings;
};

json state_to_json(const ConvergenceState& state);

struct ResolutionConfig {
  size_t max_rounds = 5;
  double min_improvement = 0.005;
  size_t n_failures = 20;
  size_t n_successes = 10;
  uint64_t seed = 0;
  /// Train examples evaluated per round; larger train splits are subsampled
  /// once (seeded) and the same subset is reused every round.
  size_t train_eval_cap = 1000;

  /// Throws Error(invalid_config).
  void validate() const;
};

struct ErrorPartition {
  std::vector<std::string> failures;   // prediction order
  std::vector<std::string> successes;  // prediction order
};

/// Failure iff the parsed label differs from gold; ABSTAIN is a failure.
ErrorPartition partition_errors(std::span<const Prediction> predictions,
                                const std::map<std::string, std::string>& gold);

struct SampledExhibits {
  std::vector<std::string> failure_ids;
  std::vector<std::string> success_ids;
};

/// Draws up to n_failures failures stratified by gold label (proportional
/// quotas, at least one per failing label while the budget allows) and up
/// to n_successes successes uniformly. The stream is salted by
/// round_index, and ids come back in prediction order.
SampledExhibits sample_exhibits(const ErrorPartition& partition, const std::map<std::string, std::string>& gold,
                                size_t n_failures, size_t n_successes, uint64_t seed, size_t round_index);

struct Exhibit {
  LabeledExample example;
  Prediction prediction;
};

/// Current rules, failure exhibits, success exhibits, then the revision
/// directive. Throws Error(no_failures) when `failures` is empty.
std::string render_resolution_prompt(const InstructionSet& set, std::span<const Exhibit> failures,
                                     std::span<const Exhibit> successes, const TaskSchema& schema,
                                     const PromptTemplate& tmpl);

/// Parses a full revised rule list (a JSON array of rules, an object with a
/// "rules" array, or a sequence of rule objects such as a serialized set).
/// Rules without provenance inherit it from the parent rule with the same
/// topic. Result: version parent+1, parent_version = parent.version,
/// created_by_phase = resolution.
/// Throws Error(no_json_found | empty_rule_set | unknown_branch_label | missing_key).
InstructionSet apply_revision(std::string_view raw, const InstructionSet& parent,
                              std::span<const std::string> label_set);

struct ResolutionTemplates {
  const PromptTemplate* system = nullptr;
  const PromptTemplate* query = nullptr;
  const PromptTemplate* resolve = nullptr;
};

struct ResolutionOutcome {
  InstructionSet final_set;            // best version, never a regression
  ConvergenceState state;
  std::vector<InstructionSet> versions;  // every version produced, set0 first
};

/// The closed loop. Each round evaluates the student on (a capped subset
/// of) train under the best set so far, stops if nothing fails, otherwise
/// samples exhibits, asks the resolver for a full revision and scores the
/// revision on validation. A revision becomes best only when it strictly
/// beats the best validation macro-F1. The loop stops when a non-negative
/// improvement falls below min_improvement (converged), after max_rounds,
/// or when the resolver output cannot be parsed twice in a row.
///
/// With `artifact_dir` set, every round writes its predictions, sampled
/// exhibits, resolver prompt and raw output under round_<n>/, and every
/// version is written under sets/.
ResolutionOutcome run_resolution_loop(std::span<const LabeledExample> train,
                                      std::span<const LabeledExample> validation, const InstructionSet& set0,
                                      const BackendConfig& student, const BackendConfig& resolver,
                                      const ResolutionConfig& cfg, const TaskSchema& schema,
                                      const ResolutionTemplates& templates, Gateway& gateway,
                                      const std::optional<fs::path>& artifact_dir = std::nullopt);

}  // namespace distill

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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "distill/clustering.hpp"
#include "distill/corpus.hpp"
#include "distill/extraction.hpp"
#include "distill/gateway.hpp"
#include "distill/prompt_template.hpp"

namespace distill {

struct RuleBranch {
  std::string condition;
  std::string label;

  friend bool operator==(const RuleBranch&, const RuleBranch&) = default;
};

/// Free-text instruction or an ordered list of condition -> label branches.
using RuleLogic = std::variant<std::string, std::vector<RuleBranch>>;

/// Rules introduced by the resolver that match no synthesized topic carry
/// this provenance.
inline constexpr int kNoCluster = -1;

struct ConsolidatedRule {
  std::string topic;
  RuleLogic logic;
  int provenance_cluster_id = kNoCluster;
  size_t member_count = 0;

  bool structured() const { return std::holds_alternative<std::vector<RuleBranch>>(logic); }
  friend bool operator==(const ConsolidatedRule&, const ConsolidatedRule&) = default;
};

enum class CreatedBy { synthesis, resolution };
std::string_view to_string(CreatedBy phase);

struct InstructionSet {
  int version = 0;
  std::string task_id;
  std::vector<ConsolidatedRule> rules;
  std::optional<int> parent_version;
  CreatedBy created_by_phase = CreatedBy::synthesis;

  /// Throws Error(empty_rule_set | invalid_params).
  void validate() const;
  friend bool operator==(const InstructionSet&, const InstructionSet&) = default;
};

/// topic + logic (or instruction) in the learned-instruction schema.
json rule_to_json(const ConsolidatedRule& rule, bool with_provenance);

/// Accepts {topic, instruction}, {topic, logic: "text"} and
/// {topic, logic: [{condition, label}, ...]}. Branch labels are matched
/// case-insensitively and stored in their canonical spelling.
/// Throws Error(missing_key | unknown_branch_label).
ConsolidatedRule rule_from_json(const json& j, std::span<const std::string> label_set);

/// Line-delimited: a header record, then one record per rule.
std::string serialize_instruction_set(const InstructionSet& set);
InstructionSet parse_instruction_set(std::string_view text);

/// Pretty-printed JSON array of the rules (no provenance), as shown to the
/// resolver.
std::string render_rules_json(const InstructionSet& set);

/// "Entailment, Contradiction, NotMentioned"
std::string label_list(const TaskSchema& schema);

/// Substitutes the cluster's rule texts, numbered in member order, into
/// the template's {raw_instructions} slot.
/// Throws Error(empty_cluster), or Error(invalid_params) when `members` is
/// not exactly the cluster's member list.
std::string render_synthesis_prompt(const Cluster& cluster, std::span<const MicroInstruction> members,
                                    const PromptTemplate& tmpl);

/// Throws Error(no_json_found | missing_key | unknown_branch_label).
ConsolidatedRule parse_synthesis_output(std::string_view raw, std::span<const std::string> label_set);

/// One synthesizer call per cluster; rules ordered by member_count
/// descending, then cluster_id. A cluster whose output cannot be parsed
/// aborts with Error(synthesis_failed) naming it.
InstructionSet synthesize_all(std::span<const Cluster> clusters,
                              std::span<const MicroInstruction> instructions,
                              const BackendConfig& synthesizer, const PromptTemplate& tmpl,
                              const TaskSchema& schema, Gateway& gateway);

/// Numbered rule blocks: "N. Topic: ..." followed by the free text verbatim
/// or one "If <condition> → <label>" line per branch.
std::string render_rules_block(const InstructionSet& set);

/// Student system prompt: preamble with the label set, the numbered rules,
/// and the one-label output directive. Pure function of its inputs.
std::string render_system_prompt(const InstructionSet& set, const TaskSchema& schema,
                                 const PromptTemplate& tmpl);

/// System prompt for the zero-shot and few-shot baselines (no rules).
std::string render_baseline_system_prompt(const TaskSchema& schema, const PromptTemplate& tmpl);

}  // namespace distill

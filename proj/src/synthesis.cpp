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

#include "distill/synthesis.hpp"

#include <algorithm>
#include <map>

#include "distill/errors.hpp"
#include "distill/json_scan.hpp"
#include "distill/text.hpp"

namespace distill {

std::string_view to_string(CreatedBy phase) {
  return phase == CreatedBy::synthesis ? "synthesis" : "resolution";
}

void InstructionSet::validate() const {
  if (version < 0) throw Error(Errc::invalid_params, "negative instruction-set version");
  if (version == 0 && parent_version) throw Error(Errc::invalid_params, "version 0 cannot have a parent");
  if (rules.empty()) throw Error(Errc::empty_rule_set, "instruction set v" + std::to_string(version));
}

json rule_to_json(const ConsolidatedRule& rule, bool with_provenance) {
  json j{{"topic", rule.topic}};
  if (const auto* text = std::get_if<std::string>(&rule.logic)) {
    j["instruction"] = *text;
  } else {
    json logic = json::array();
    for (const auto& b : std::get<std::vector<RuleBranch>>(rule.logic))
      logic.push_back({{"condition", b.condition}, {"label", b.label}});
    j["logic"] = std::move(logic);
  }
  if (with_provenance) {
    j["provenance_cluster_id"] = rule.provenance_cluster_id;
    j["member_count"] = rule.member_count;
  }
  return j;
}

namespace {

// label_set == nullptr skips branch-label validation (stored sets were
// validated when built).
ConsolidatedRule parse_rule(const json& j, const std::span<const std::string>* label_set) {
  if (!j.is_object()) throw Error(Errc::missing_key, "topic (rule is not an object)");
  auto topic = j.find("topic");
  if (topic == j.end() || !topic->is_string() || trim(topic->get<std::string>()).empty())
    throw Error(Errc::missing_key, "topic");

  ConsolidatedRule rule;
  rule.topic = topic->get<std::string>();
  auto logic = j.find("logic");
  if (logic != j.end() && logic->is_array()) {
    std::vector<RuleBranch> branches;
    for (const auto& b : *logic) {
      if (!b.is_object() || !b.contains("condition") || !b["condition"].is_string())
        throw Error(Errc::missing_key, "condition");
      if (!b.contains("label") || !b["label"].is_string()) throw Error(Errc::missing_key, "label");
      auto label = b["label"].get<std::string>();
      if (label_set) {
        auto canonical = std::find_if(label_set->begin(), label_set->end(),
                                      [&](const std::string& l) { return iequals(l, trim(label)); });
        if (canonical == label_set->end()) throw Error(Errc::unknown_branch_label, label);
        label = *canonical;
      }
      branches.push_back({b["condition"].get<std::string>(), std::move(label)});
    }
    if (branches.empty()) throw Error(Errc::missing_key, "logic (no branches)");
    rule.logic = std::move(branches);
  } else if (logic != j.end() && logic->is_string()) {
    rule.logic = logic->get<std::string>();
  } else if (auto instr = j.find("instruction"); instr != j.end() && instr->is_string()) {
    rule.logic = instr->get<std::string>();
  } else {
    throw Error(Errc::missing_key, "instruction");
  }
  if (const auto* text = std::get_if<std::string>(&rule.logic); text && trim(*text).empty())
    throw Error(Errc::missing_key, "instruction (empty)");

  if (auto p = j.find("provenance_cluster_id"); p != j.end() && p->is_number_integer())
    rule.provenance_cluster_id = p->get<int>();
  if (auto m = j.find("member_count"); m != j.end() && m->is_number_unsigned())
    rule.member_count = m->get<size_t>();
  return rule;
}

}  // namespace

ConsolidatedRule rule_from_json(const json& j, std::span<const std::string> label_set) {
  return parse_rule(j, &label_set);
}

std::string serialize_instruction_set(const InstructionSet& set) {
  json header{{"record", "instruction_set"},
              {"version", set.version},
              {"task_id", set.task_id},
              {"parent_version", set.parent_version ? json(*set.parent_version) : json(nullptr)},
              {"created_by_phase", std::string(to_string(set.created_by_phase))},
              {"rule_count", set.rules.size()}};
  std::vector<json> records{header};
  for (const auto& r : set.rules) records.push_back(rule_to_json(r, true));
  return to_jsonl(records);
}

InstructionSet parse_instruction_set(std::string_view text) {
  auto records = parse_jsonl(text);
  if (records.empty() || records.front().value("record", "") != "instruction_set")
    throw Error(Errc::malformed_record, "instruction set file has no header record");
  const auto& h = records.front();
  InstructionSet set;
  try {
    set.version = h.at("version").get<int>();
    set.task_id = h.at("task_id").get<std::string>();
    if (!h.at("parent_version").is_null()) set.parent_version = h.at("parent_version").get<int>();
    set.created_by_phase =
        h.at("created_by_phase").get<std::string>() == "resolution" ? CreatedBy::resolution : CreatedBy::synthesis;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_record, std::string("instruction set header: ") + e.what());
  }
  for (size_t i = 1; i < records.size(); ++i) set.rules.push_back(parse_rule(records[i], nullptr));
  return set;
}

std::string render_rules_json(const InstructionSet& set) {
  json arr = json::array();
  for (const auto& r : set.rules) arr.push_back(rule_to_json(r, false));
  return arr.dump(2, ' ', false, json::error_handler_t::replace);
}

std::string label_list(const TaskSchema& schema) { return join(schema.label_set, ", "); }

std::string render_synthesis_prompt(const Cluster& cluster, std::span<const MicroInstruction> members,
                                    const PromptTemplate& tmpl) {
  if (cluster.member_ids.empty() || members.empty())
    throw Error(Errc::empty_cluster, "cluster " + std::to_string(cluster.cluster_id));
  if (members.size() != cluster.member_ids.size())
    throw Error(Errc::invalid_params, "member list does not match cluster " + std::to_string(cluster.cluster_id));
  std::string list;
  for (size_t i = 0; i < members.size(); ++i) {
    if (members[i].instruction_id != cluster.member_ids[i])
      throw Error(Errc::invalid_params, "member list does not match cluster " + std::to_string(cluster.cluster_id));
    if (i) list += '\n';
    list += std::to_string(i + 1) + ". " + members[i].executable_rule;
  }
  return tmpl.render({{"raw_instructions", list}});
}

ConsolidatedRule parse_synthesis_output(std::string_view raw, std::span<const std::string> label_set) {
  auto values = scan_json_values(strip_code_fence(raw));
  const json* first_object = nullptr;
  for (const auto& v : values) {
    const json* candidate = &v;
    if (v.is_array() && !v.empty()) candidate = &v.front();
    if (!candidate->is_object()) continue;
    if (!first_object) first_object = candidate;
    if (candidate->contains("topic")) return rule_from_json(*candidate, label_set);
  }
  if (!first_object) throw Error(Errc::no_json_found, "synthesizer output has no JSON object");
  throw Error(Errc::missing_key, "topic");
}

InstructionSet synthesize_all(std::span<const Cluster> clusters,
                              std::span<const MicroInstruction> instructions,
                              const BackendConfig& synthesizer, const PromptTemplate& tmpl,
                              const TaskSchema& schema, Gateway& gateway) {
  if (clusters.empty()) throw Error(Errc::empty_rule_set, "no clusters to synthesize");
  std::map<std::string, const MicroInstruction*> by_id;
  for (const auto& mi : instructions) by_id[mi.instruction_id] = &mi;

  std::vector<const Cluster*> order;
  for (const auto& c : clusters) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const Cluster* a, const Cluster* b) {
    if (a->member_ids.size() != b->member_ids.size()) return a->member_ids.size() > b->member_ids.size();
    return a->cluster_id < b->cluster_id;
  });

  std::vector<ConsolidatedRule> rules(order.size());
  gateway.parallel_for(order.size(), [&](size_t i) {
    const Cluster& cluster = *order[i];
    std::vector<MicroInstruction> members;
    for (const auto& id : cluster.member_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(Errc::invalid_params, "cluster member " + id + " has no instruction");
      members.push_back(*it->second);
    }
    ChatRequest req;
    req.user_text = render_synthesis_prompt(cluster, members, tmpl);
    req.role = BackendRole::synthesizer;
    auto response = gateway.complete(req, synthesizer);
    try {
      rules[i] = parse_synthesis_output(response.text, schema.label_set);
    } catch (const Error& e) {
      throw Error(Errc::synthesis_failed, "cluster " + std::to_string(cluster.cluster_id) + ": " + e.what());
    }
    rules[i].provenance_cluster_id = cluster.cluster_id;
    rules[i].member_count = cluster.member_ids.size();
  });

  InstructionSet set;
  set.version = 0;
  set.task_id = schema.task_id;
  set.rules = std::move(rules);
  set.created_by_phase = CreatedBy::synthesis;
  set.validate();
  return set;
}

std::string render_rules_block(const InstructionSet& set) {
  std::string out;
  for (size_t i = 0; i < set.rules.size(); ++i) {
    const auto& rule = set.rules[i];
    if (i) out += "\n\n";
    out += std::to_string(i + 1) + ". Topic: " + rule.topic + "\n";
    if (const auto* text = std::get_if<std::string>(&rule.logic)) {
      out += *text;
    } else {
      const auto& branches = std::get<std::vector<RuleBranch>>(rule.logic);
      for (size_t b = 0; b < branches.size(); ++b) {
        if (b) out += '\n';
        out += "If " + branches[b].condition + " → " + branches[b].label;
      }
    }
  }
  return out;
}

std::string render_system_prompt(const InstructionSet& set, const TaskSchema& schema,
                                 const PromptTemplate& tmpl) {
  return tmpl.render({{"task_id", schema.task_id},
                      {"label_list", label_list(schema)},
                      {"rules", render_rules_block(set)}});
}

std::string render_baseline_system_prompt(const TaskSchema& schema, const PromptTemplate& tmpl) {
  return tmpl.render({{"task_id", schema.task_id}, {"label_list", label_list(schema)}});
}

}  // namespace distill

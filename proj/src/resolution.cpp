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

#include "distill/resolution.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "distill/errors.hpp"
#include "distill/json_scan.hpp"
#include "distill/random.hpp"
#include "distill/text.hpp"

namespace distill {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::converged: return "converged";
    case StopReason::max_rounds: return "max_rounds";
    case StopReason::no_failures: return "no_failures";
    case StopReason::resolver_error: return "resolver_error";
  }
  return "max_rounds";
}

json state_to_json(const ConvergenceState& state) {
  json rounds = json::array();
  for (const auto& r : state.rounds) {
    rounds.push_back({{"round_index", r.round_index},
                      {"input_version", r.input_version},
                      {"output_version", r.output_version},
                      {"train_macro_f1_before", r.train_macro_f1_before},
                      {"val_macro_f1_before", r.val_macro_f1_before},
                      {"val_macro_f1_after", r.val_macro_f1_after},
                      {"failure_sample_ids", r.failure_sample_ids},
                      {"success_sample_ids", r.success_sample_ids},
                      {"accepted", r.accepted}});
  }
  return json{{"rounds", rounds},
              {"best_version", state.best_version},
              {"best_val_macro_f1", state.best_val_macro_f1},
              {"initial_val_macro_f1", state.initial_val_macro_f1},
              {"stop_reason", std::string(to_string(state.stop_reason))},
              {"warnings", state.warnings}};
}

void ResolutionConfig::validate() const {
  if (max_rounds < 1 || n_failures < 1 || n_successes < 1 || train_eval_cap < 1)
    throw Error(Errc::invalid_config, "resolution counts must be >= 1");
  if (!(min_improvement >= 0)) throw Error(Errc::invalid_config, "min_improvement must be >= 0");
}

ErrorPartition partition_errors(std::span<const Prediction> predictions,
                                const std::map<std::string, std::string>& gold) {
  ErrorPartition out;
  for (const auto& p : predictions) {
    auto g = gold.find(p.example_id);
    if (g == gold.end()) throw Error(Errc::unknown_example_id, p.example_id);
    if (p.parsed_label && *p.parsed_label == g->second)
      out.successes.push_back(p.example_id);
    else
      out.failures.push_back(p.example_id);
  }
  return out;
}

namespace {

constexpr uint64_t kFailureSalt = 0x6661696cULL;
constexpr uint64_t kSuccessSalt = 0x73756363ULL;
constexpr uint64_t kTrainSubsetSalt = 0x74726e73ULL;

// Keeps the chosen ids in their original order.
std::vector<std::string> pick(const std::vector<std::string>& ids, size_t k, uint64_t seed) {
  if (k >= ids.size()) return ids;
  auto idx = sample_indices(ids.size(), k, seed);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (size_t i : idx) out.push_back(ids[i]);
  return out;
}

}  // namespace

SampledExhibits sample_exhibits(const ErrorPartition& partition, const std::map<std::string, std::string>& gold,
                                size_t n_failures, size_t n_successes, uint64_t seed, size_t round_index) {
  SampledExhibits out;
  const uint64_t round_seed = mix_seed(seed, round_index);

  if (partition.failures.size() <= n_failures) {
    out.failure_ids = partition.failures;
  } else {
    std::map<std::string, std::vector<std::string>> strata;
    for (const auto& id : partition.failures) strata[gold.at(id)].push_back(id);

    // Labels by stratum size (desc), then name, get the minimum-one quota first.
    std::vector<std::string> labels;
    for (const auto& [label, _] : strata) labels.push_back(label);
    std::stable_sort(labels.begin(), labels.end(),
                     [&](const auto& a, const auto& b) { return strata[a].size() > strata[b].size(); });

    const double total = static_cast<double>(partition.failures.size());
    std::map<std::string, size_t> quota;
    std::map<std::string, double> exact_share;
    std::vector<std::pair<double, std::string>> remainders;
    size_t assigned = 0;
    for (const auto& label : labels) {
      const double exact = static_cast<double>(n_failures) * static_cast<double>(strata[label].size()) / total;
      size_t q = std::max<size_t>(1, static_cast<size_t>(exact));
      q = std::min(q, strata[label].size());
      quota[label] = q;
      exact_share[label] = exact;
      assigned += q;
      remainders.emplace_back(exact - std::floor(exact), label);
    }
    // Overshoot comes from the minimum-one quotas. Take it back from strata
    // holding more than one, the most over their share first; only when
    // the budget is below the number of failing labels do the smallest
    // strata drop out.
    while (assigned > n_failures) {
      const std::string* victim = nullptr;
      for (const auto& label : labels) {
        if (quota[label] <= 1) continue;
        if (!victim || static_cast<double>(quota[label]) - exact_share[label] >
                           static_cast<double>(quota[*victim]) - exact_share[*victim])
          victim = &label;
      }
      if (!victim) break;
      --quota[*victim];
      --assigned;
    }
    for (auto it = labels.rbegin(); assigned > n_failures && it != labels.rend(); ++it) {
      if (quota[*it] > 0) {
        --quota[*it];
        --assigned;
      }
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    while (assigned < n_failures) {
      bool progressed = false;
      for (const auto& [_, label] : remainders) {
        if (assigned >= n_failures) break;
        if (quota[label] < strata[label].size()) {
          ++quota[label];
          ++assigned;
          progressed = true;
        }
      }
      if (!progressed) break;
    }

    std::set<std::string> chosen;
    uint64_t stratum = 0;
    for (const auto& [label, ids] : strata) {
      for (auto& id : pick(ids, quota[label], mix_seed(round_seed, kFailureSalt + stratum++))) chosen.insert(id);
    }
    for (const auto& id : partition.failures)
      if (chosen.count(id)) out.failure_ids.push_back(id);
  }

  out.success_ids = pick(partition.successes, n_successes, mix_seed(round_seed, kSuccessSalt));
  return out;
}

namespace {

std::string render_exhibit_block(std::span<const Exhibit> exhibits, const TaskSchema& schema, char tag) {
  if (exhibits.empty()) return "(none)";
  std::string out;
  for (size_t i = 0; i < exhibits.size(); ++i) {
    const auto& ex = exhibits[i];
    if (i) out += "\n\n";
    out += "[" + std::string(1, tag) + std::to_string(i + 1) + "] " + ex.example.example_id + "\n";
    out += render_inputs(ex.example, schema) + "\n";
    out += "Gold label: " + ex.example.gold_label + "\n";
    out += "Student answer: " + std::string(trim(ex.prediction.raw_text)) + "\n";
    out += "Parsed as: " + (ex.prediction.parsed_label ? *ex.prediction.parsed_label : std::string(kAbstain));
  }
  return out;
}

}  // namespace

std::string render_resolution_prompt(const InstructionSet& set, std::span<const Exhibit> failures,
                                     std::span<const Exhibit> successes, const TaskSchema& schema,
                                     const PromptTemplate& tmpl) {
  if (failures.empty()) throw Error(Errc::no_failures, "resolution prompt needs at least one failure");
  return tmpl.render({{"label_list", label_list(schema)},
                      {"rules_json", render_rules_json(set)},
                      {"failure_exhibits", render_exhibit_block(failures, schema, 'F')},
                      {"success_exhibits", render_exhibit_block(successes, schema, 'S')}});
}

InstructionSet apply_revision(std::string_view raw, const InstructionSet& parent,
                              std::span<const std::string> label_set) {
  auto values = scan_json_values(strip_code_fence(raw));
  if (values.empty()) throw Error(Errc::no_json_found, "resolver output has no JSON");

  auto is_rule = [](const json& v) { return v.is_object() && v.contains("topic"); };
  std::vector<const json*> rule_docs;
  for (const auto& v : values) {
    if (v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), is_rule)) {
      for (const auto& r : v) rule_docs.push_back(&r);
      break;
    }
    if (v.is_object() && v.contains("rules") && v["rules"].is_array()) {
      for (const auto& r : v["rules"]) rule_docs.push_back(&r);
      break;
    }
  }
  if (rule_docs.empty())
    for (const auto& v : values)
      if (is_rule(v)) rule_docs.push_back(&v);
  if (rule_docs.empty()) throw Error(Errc::empty_rule_set, "resolver output contains no rules");

  InstructionSet child;
  child.task_id = parent.task_id;
  child.version = parent.version + 1;
  child.parent_version = parent.version;
  child.created_by_phase = CreatedBy::resolution;
  for (const json* doc : rule_docs) {
    ConsolidatedRule rule = rule_from_json(*doc, label_set);
    if (!doc->contains("provenance_cluster_id")) {
      for (const auto& p : parent.rules) {
        if (iequals(trim(p.topic), trim(rule.topic))) {
          rule.provenance_cluster_id = p.provenance_cluster_id;
          rule.member_count = p.member_count;
          break;
        }
      }
    }
    child.rules.push_back(std::move(rule));
  }
  child.validate();
  return child;
}

namespace {

bool is_revision_parse_error(Errc code) {
  return code == Errc::no_json_found || code == Errc::empty_rule_set || code == Errc::unknown_branch_label ||
         code == Errc::missing_key;
}

constexpr std::string_view kRevisionReminder =
    "\n\nReturn only the complete revised rule set as a JSON array, using only the allowed labels.";

void write_set(const fs::path& dir, const InstructionSet& set, const std::string& system_prompt) {
  const auto stem = "instruction_set.v" + std::to_string(set.version);
  write_file_atomic(dir / (stem + ".jsonl"), serialize_instruction_set(set));
  write_file_atomic(dir / (stem + ".prompt.txt"), system_prompt);
}

std::vector<json> predictions_json(std::span<const Prediction> predictions) {
  std::vector<json> out;
  for (const auto& p : predictions) out.push_back(prediction_to_json(p));
  return out;
}

}  // namespace

ResolutionOutcome run_resolution_loop(std::span<const LabeledExample> train,
                                      std::span<const LabeledExample> validation, const InstructionSet& set0,
                                      const BackendConfig& student, const BackendConfig& resolver,
                                      const ResolutionConfig& cfg, const TaskSchema& schema,
                                      const ResolutionTemplates& templates, Gateway& gateway,
                                      const std::optional<fs::path>& artifact_dir) {
  cfg.validate();
  set0.validate();
  if (train.empty() || validation.empty())
    throw Error(Errc::insufficient_examples, "resolution needs non-empty train and validation splits");
  if (!templates.system || !templates.query || !templates.resolve)
    throw Error(Errc::unknown_template, "resolution templates not provided");

  std::vector<LabeledExample> train_subset;
  if (train.size() > cfg.train_eval_cap) {
    auto idx = sample_indices(train.size(), cfg.train_eval_cap, mix_seed(cfg.seed, kTrainSubsetSalt));
    std::sort(idx.begin(), idx.end());
    for (size_t i : idx) train_subset.push_back(train[i]);
  } else {
    train_subset.assign(train.begin(), train.end());
  }
  std::map<std::string, std::string> train_gold;
  std::map<std::string, const LabeledExample*> train_by_id;
  for (const auto& ex : train_subset) {
    train_gold[ex.example_id] = ex.gold_label;
    train_by_id[ex.example_id] = &ex;
  }

  EvalConfig eval_cfg;
  eval_cfg.regime = Regime::pld;
  eval_cfg.student = student;
  eval_cfg.seed = cfg.seed;
  const EvalTemplates eval_templates{templates.query, nullptr};
  auto system_prompt = [&](const InstructionSet& set) { return render_system_prompt(set, schema, *templates.system); };
  auto run_eval = [&](std::span<const LabeledExample> split, const InstructionSet& set) {
    return evaluate(split, system_prompt(set), eval_cfg, schema, eval_templates, {}, gateway);
  };

  ResolutionOutcome out;
  out.versions.push_back(set0);
  if (artifact_dir) write_set(*artifact_dir / "sets", set0, system_prompt(set0));

  InstructionSet best = set0;
  double best_val = run_eval(validation, best).report.macro_f1;
  out.state.initial_val_macro_f1 = best_val;
  int next_version = set0.version + 1;
  out.state.stop_reason = StopReason::max_rounds;

  for (size_t round = 1; round <= cfg.max_rounds; ++round) {
    const std::optional<fs::path> round_dir =
        artifact_dir ? std::optional<fs::path>(*artifact_dir / ("round_" + std::to_string(round))) : std::nullopt;

    auto train_eval = run_eval(train_subset, best);
    if (round_dir) write_file_atomic(*round_dir / "train_predictions.jsonl", to_jsonl(predictions_json(train_eval.predictions)));
    auto partition = partition_errors(train_eval.predictions, train_gold);
    if (partition.failures.empty()) {
      out.state.stop_reason = StopReason::no_failures;
      break;
    }

    auto sample = sample_exhibits(partition, train_gold, cfg.n_failures, cfg.n_successes, cfg.seed, round);
    std::map<std::string, const Prediction*> pred_by_id;
    for (const auto& p : train_eval.predictions) pred_by_id[p.example_id] = &p;
    auto exhibits = [&](const std::vector<std::string>& ids) {
      std::vector<Exhibit> v;
      for (const auto& id : ids) v.push_back({*train_by_id.at(id), *pred_by_id.at(id)});
      return v;
    };
    const auto failures = exhibits(sample.failure_ids);
    const auto successes = exhibits(sample.success_ids);
    if (round_dir) {
      std::vector<json> records;
      for (const auto& e : failures) records.push_back({{"kind", "failure"}, {"example_id", e.example.example_id}});
      for (const auto& e : successes) records.push_back({{"kind", "success"}, {"example_id", e.example.example_id}});
      write_file_atomic(*round_dir / "exhibits.jsonl", to_jsonl(records));
    }

    ChatRequest req;
    req.role = BackendRole::resolver;
    req.max_output_tokens = 8192;
    req.user_text = render_resolution_prompt(best, failures, successes, schema, *templates.resolve);
    if (round_dir) write_file_atomic(*round_dir / "resolver_prompt.txt", req.user_text);

    std::optional<InstructionSet> candidate;
    std::string raw_log;
    for (int attempt = 0; attempt < 2 && !candidate; ++attempt) {
      if (attempt == 1) req.user_text += kRevisionReminder;
      auto response = gateway.complete(req, resolver);
      raw_log += (attempt ? "\n\n----- retry -----\n\n" : "") + response.text;
      try {
        candidate = apply_revision(response.text, best, schema.label_set);
      } catch (const Error& e) {
        if (!is_revision_parse_error(e.code())) throw;
        out.state.warnings.push_back("round " + std::to_string(round) + " attempt " + std::to_string(attempt + 1) +
                                     ": unusable resolver output: " + e.what());
      }
    }
    if (round_dir) write_file_atomic(*round_dir / "resolver_raw.txt", raw_log);
    if (!candidate) {
      out.state.stop_reason = StopReason::resolver_error;
      break;
    }

    candidate->version = next_version++;
    candidate->parent_version = best.version;
    auto val_eval = run_eval(validation, *candidate);
    if (round_dir) write_file_atomic(*round_dir / "validation_predictions.jsonl", to_jsonl(predictions_json(val_eval.predictions)));
    if (artifact_dir) write_set(*artifact_dir / "sets", *candidate, system_prompt(*candidate));

    const double val_after = val_eval.report.macro_f1;
    ResolutionRound r;
    r.round_index = static_cast<int>(round);
    r.input_version = best.version;
    r.output_version = candidate->version;
    r.train_macro_f1_before = train_eval.report.macro_f1;
    r.val_macro_f1_before = best_val;
    r.val_macro_f1_after = val_after;
    r.failure_sample_ids = sample.failure_ids;
    r.success_sample_ids = sample.success_ids;
    r.accepted = val_after > best_val;
    out.state.rounds.push_back(r);
    out.versions.push_back(*candidate);

    const double improvement = val_after - best_val;
    if (r.accepted) {
      best = *candidate;
      best_val = val_after;
    }
    if (improvement >= 0 && improvement < cfg.min_improvement) {
      out.state.stop_reason = StopReason::converged;
      break;
    }
  }

  out.state.best_version = best.version;
  out.state.best_val_macro_f1 = best_val;
  out.final_set = best;
  return out;
}

}  // namespace distill

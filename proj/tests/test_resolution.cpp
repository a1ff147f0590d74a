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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "distill/convert.hpp"
#include "distill/errors.hpp"
#include "distill/io.hpp"
#include "distill/resolution.hpp"
#include "support/support.hpp"

using namespace distill;
using distill::testing::contains;
using distill::testing::fixed_resolver;
using distill::testing::keyword_rule;
using distill::testing::keyword_student;
using distill::testing::loop_fixture;
using distill::testing::loop_templates;
using distill::testing::LoopFixture;
using distill::testing::rules_array;
using distill::testing::golden_mismatch;
using distill::testing::shipped_templates;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io_error;
}

Prediction pred(const std::string& id, std::optional<std::string> label) {
  Prediction p;
  p.example_id = id;
  p.raw_text = label.value_or("no idea");
  p.parsed_label = std::move(label);
  return p;
}

ResolutionOutcome run_loop(const LoopFixture& f, const BackendConfig& resolver, ResolutionConfig cfg = {},
                           const std::optional<fs::path>& dir = std::nullopt, Gateway* gateway = nullptr) {
  Gateway local;
  return run_resolution_loop(f.train, f.validation, f.set0, keyword_student(), resolver, cfg, f.schema,
                             loop_templates(), gateway ? *gateway : local, dir);
}

void expect_monotone_best(const ResolutionOutcome& out) {
  EXPECT_GE(out.state.best_val_macro_f1, out.state.initial_val_macro_f1);
  double best_seen = out.state.initial_val_macro_f1;
  for (const auto& r : out.state.rounds) best_seen = std::max(best_seen, r.val_macro_f1_after);
  EXPECT_DOUBLE_EQ(out.state.best_val_macro_f1, best_seen);
  EXPECT_EQ(out.final_set.version, out.state.best_version);
}

}  // namespace

TEST(PartitionErrors, Basics) {
  std::map<std::string, std::string> gold;
  std::vector<Prediction> right, abstain, mixed;
  const std::set<int> wrong = {2, 5, 9};
  for (int i = 0; i < 10; ++i) {
    const std::string id = "e" + std::to_string(i);
    gold[id] = i % 2 ? "A" : "B";
    right.push_back(pred(id, gold[id]));
    abstain.push_back(pred(id, std::nullopt));
    mixed.push_back(pred(id, wrong.count(i) ? std::string(gold[id] == "A" ? "B" : "A") : gold[id]));
  }
  auto p = partition_errors(right, gold);
  EXPECT_TRUE(p.failures.empty());
  EXPECT_EQ(p.successes.size(), 10u);
  p = partition_errors(abstain, gold);
  EXPECT_EQ(p.failures.size(), 10u);
  EXPECT_TRUE(p.successes.empty());
  p = partition_errors(mixed, gold);
  EXPECT_EQ(p.failures, (std::vector<std::string>{"e2", "e5", "e9"}));
  EXPECT_EQ(p.successes.size(), 7u);
  EXPECT_EQ(code_of([&] { partition_errors(std::vector<Prediction>{pred("zz", "A")}, gold); }),
            Errc::unknown_example_id);
}

TEST(SampleExhibits, DeterministicDisjointAndStratified) {
  std::map<std::string, std::string> gold;
  ErrorPartition part;
  // 40 failures: 30 gold A, 8 gold B, 2 gold C. 30 successes.
  for (int i = 0; i < 40; ++i) {
    const std::string id = "f" + std::to_string(i);
    gold[id] = i < 30 ? "A" : i < 38 ? "B" : "C";
    part.failures.push_back(id);
  }
  for (int i = 0; i < 30; ++i) {
    const std::string id = "s" + std::to_string(i);
    gold[id] = "A";
    part.successes.push_back(id);
  }
  const auto a = sample_exhibits(part, gold, 10, 5, 42, 1);
  const auto b = sample_exhibits(part, gold, 10, 5, 42, 1);
  EXPECT_EQ(a.failure_ids, b.failure_ids);
  EXPECT_EQ(a.success_ids, b.success_ids);
  EXPECT_EQ(a.failure_ids.size(), 10u);
  EXPECT_EQ(a.success_ids.size(), 5u);

  std::map<std::string, size_t> per_label;
  for (const auto& id : a.failure_ids) ++per_label[gold[id]];
  EXPECT_GE(per_label["B"], 1u);
  EXPECT_GE(per_label["C"], 1u);
  EXPECT_GT(per_label["A"], per_label["B"]);

  std::set<std::string> f(a.failure_ids.begin(), a.failure_ids.end());
  for (const auto& id : a.success_ids) EXPECT_EQ(f.count(id), 0u);

  // Prediction order is kept.
  auto index = [&](const std::string& id) {
    return std::find(part.failures.begin(), part.failures.end(), id) - part.failures.begin();
  };
  for (size_t i = 1; i < a.failure_ids.size(); ++i) EXPECT_LT(index(a.failure_ids[i - 1]), index(a.failure_ids[i]));

  bool differs = false;
  for (size_t round = 2; round < 6 && !differs; ++round)
    differs = sample_exhibits(part, gold, 10, 5, 42, round).failure_ids != a.failure_ids;
  EXPECT_TRUE(differs);

  const auto all = sample_exhibits(part, gold, 100, 100, 1, 1);
  EXPECT_EQ(all.failure_ids, part.failures);
  EXPECT_EQ(all.success_ids, part.successes);
}

TEST(SampleExhibits, RandomPartitionsRespectBudgets) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::string> gold;
    ErrorPartition part;
    const size_t n = 1 + rng() % 60;
    for (size_t i = 0; i < n; ++i) {
      const std::string id = "x" + std::to_string(i);
      gold[id] = std::string(1, static_cast<char>('A' + rng() % 4));
      (rng() % 2 ? part.failures : part.successes).push_back(id);
    }
    const size_t nf = 1 + rng() % 20, ns = 1 + rng() % 10;
    const auto s = sample_exhibits(part, gold, nf, ns, rng(), 1 + rng() % 5);
    ASSERT_EQ(s.failure_ids.size(), std::min(nf, part.failures.size()));
    ASSERT_EQ(s.success_ids.size(), std::min(ns, part.successes.size()));
    std::set<std::string> labels_failing, labels_sampled;
    for (const auto& id : part.failures) labels_failing.insert(gold[id]);
    for (const auto& id : s.failure_ids) labels_sampled.insert(gold[id]);
    if (nf >= labels_failing.size()) {
      ASSERT_EQ(labels_sampled, labels_failing) << "trial " << trial;
    }
  }
}

TEST(ResolutionPrompt, BlocksInOrderAndGolden) {
  const auto fx = distill::testing::resolution_prompt_fixture();
  const auto& f = fx.loop;
  const auto& one = fx.set;
  const auto& failures = fx.failures;
  const auto& successes = fx.successes;
  const auto& tmpl = shipped_templates().get("resolve.v1");
  const auto prompt = render_resolution_prompt(one, failures, successes, f.schema, tmpl);
  const auto rules = prompt.find("Keyword kwA");
  const auto fail = prompt.find("kwB item 0");
  const auto succ = prompt.find("kwA item 0");
  ASSERT_NE(rules, std::string::npos);
  ASSERT_NE(fail, std::string::npos);
  ASSERT_NE(succ, std::string::npos);
  EXPECT_LT(rules, fail);
  EXPECT_LT(fail, succ);
  EXPECT_NE(prompt.find("Parsed as: ABSTAIN"), std::string::npos);
  EXPECT_NE(prompt.find("Allowed labels: alpha, beta"), std::string::npos);
  for (int i = 0; i < 20; ++i) ASSERT_EQ(render_resolution_prompt(one, failures, successes, f.schema, tmpl), prompt);
  EXPECT_EQ(golden_mismatch("resolution_prompt.txt", prompt), "");
  EXPECT_EQ(code_of([&] { render_resolution_prompt(one, {}, successes, f.schema, tmpl); }), Errc::no_failures);
}

namespace {

InstructionSet retaining_copies_parent() {
  InstructionSet set;
  set.task_id = "contract_nli";
  set.version = 0;
  set.rules.push_back(
      {"Retaining Copies",
       std::vector<RuleBranch>{
           {"The text mandates return/destruction of 'all' copies and lists NO exceptions", "Contradiction"},
           {"The text contains an exception clause (e.g., 'subject to,' 'except for,' 'provided that') allowing "
            "retention for 'legal,' 'archival,' 'backup,' or 'compliance' purposes",
            "Entailment"}},
       3, 40});
  set.rules.push_back({"Reverse Engineering", std::string("Prohibitions on decompiling entail the hypothesis."), 1, 22});
  return set;
}

constexpr const char* kRetainingCopiesRevision = R"(Here is the revised rule set.
```json
[
  {
    "topic": "Retaining Copies",
    "logic": [
      {
        "condition": "The text explicitly permits the Receiving Party to 'retain', 'keep', 'store', or 'preserve' copies of Confidential Information (or states return/destruction obligations are 'subject to' such retention) for specific purposes such as 'legal', 'archival', 'backup', 'compliance', 'audit', 'regulatory', 'record-keeping', 'defending claims', or for use by 'legal counsel'.",
        "label": "Entailment"
      },
      {
        "condition": "The text explicitly mandates the 'return', 'destruction', 'deletion', or 'erasure' of 'all' Confidential Information (or 'all copies', 'all records', 'all materials') upon termination or request, AND does not contain exceptions allowing retention for legal/backup/archival purposes.",
        "label": "Contradiction"
      },
      {
        "condition": "The text is silent regarding the return or destruction of Confidential Information upon termination/request, or does not explicitly specify whether copies may be retained.",
        "label": "NotMentioned"
      }
    ]
  },
  {"topic": "Reverse Engineering", "instruction": "Prohibitions on decompiling entail the hypothesis."}
]
```)";

}  // namespace

TEST(ApplyRevision, RetainingCopiesGainsNotMentionedBranch) {
  const auto parent = retaining_copies_parent();
  const auto labels = contract_nli_schema().label_set;
  const auto child = apply_revision(kRetainingCopiesRevision, parent, labels);
  ASSERT_EQ(child.rules.size(), 2u);
  const auto& branches = std::get<std::vector<RuleBranch>>(child.rules[0].logic);
  ASSERT_EQ(branches.size(), 3u);
  EXPECT_EQ(branches[2].label, "NotMentioned");
  std::set<std::string> covered;
  for (const auto& b : branches) covered.insert(b.label);
  EXPECT_EQ(covered, (std::set<std::string>{"Entailment", "Contradiction", "NotMentioned"}));
  EXPECT_NE(branches[0].condition.find("'retain', 'keep', 'store'"), std::string::npos);
  EXPECT_EQ(child.version, 1);
  EXPECT_EQ(child.parent_version, 0);
  EXPECT_EQ(child.created_by_phase, CreatedBy::resolution);
  EXPECT_EQ(child.rules[0].provenance_cluster_id, 3);
  EXPECT_EQ(child.rules[1].provenance_cluster_id, 1);
}

TEST(ApplyRevision, ParentSerializationIsAFixedPoint) {
  auto parent = retaining_copies_parent();
  parent.version = 2;
  parent.parent_version = 1;
  parent.created_by_phase = CreatedBy::resolution;
  const auto labels = contract_nli_schema().label_set;
  for (const auto& raw : {render_rules_json(parent), serialize_instruction_set(parent)}) {
    const auto child = apply_revision(raw, parent, labels);
    EXPECT_EQ(child.rules, parent.rules);
    EXPECT_EQ(child.version, 3);
    EXPECT_EQ(child.parent_version, 2);
  }
  const auto wrapped = apply_revision(json{{"rules", json::parse(render_rules_json(parent))}}.dump(), parent, labels);
  EXPECT_EQ(wrapped.rules, parent.rules);
}

TEST(ApplyRevision, Errors) {
  const auto parent = retaining_copies_parent();
  const auto labels = contract_nli_schema().label_set;
  EXPECT_EQ(code_of([&] {
              apply_revision(R"([{"topic":"T","logic":[{"condition":"c","label":"Maybe"}]}])", parent, labels);
            }),
            Errc::unknown_branch_label);
  EXPECT_EQ(code_of([&] { apply_revision("I would not change anything.", parent, labels); }), Errc::no_json_found);
  EXPECT_EQ(code_of([&] { apply_revision("[]", parent, labels); }), Errc::empty_rule_set);
}

TEST(ResolutionLoop, PerfectStudentStopsWithNoFailures) {
  auto f = loop_fixture();
  f.set0.rules[1] = keyword_rule("kwB", "beta", 1);
  f.train.resize(12);  // drop the keyword-less examples
  Gateway g;
  const auto out = run_loop(f, fixed_resolver("[]"), {}, std::nullopt, &g);
  EXPECT_EQ(out.state.stop_reason, StopReason::no_failures);
  EXPECT_TRUE(out.state.rounds.empty());
  EXPECT_EQ(out.final_set, f.set0);
  EXPECT_EQ(g.stats().count("resolver"), 0u);
}

TEST(ResolutionLoop, CorrectedSetConvergesAtVersionOne) {
  const auto f = loop_fixture();
  const auto corrected = rules_array({keyword_rule("kwA", "alpha", 0), keyword_rule("kwB", "beta", 1)});
  const auto out = run_loop(f, fixed_resolver(corrected));
  ASSERT_EQ(out.state.rounds.size(), 2u);
  EXPECT_NEAR(out.state.initial_val_macro_f1, (2.0 / 3.0 + 0.0) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(out.state.rounds[0].val_macro_f1_after, 1.0);
  EXPECT_TRUE(out.state.rounds[0].accepted);
  EXPECT_LT(out.state.rounds[1].val_macro_f1_after - out.state.rounds[1].val_macro_f1_before, 0.005);
  EXPECT_EQ(out.state.stop_reason, StopReason::converged);
  EXPECT_EQ(out.state.best_version, 1);
  EXPECT_EQ(out.final_set.version, 1);
  EXPECT_EQ(out.final_set.parent_version, 0);
  expect_monotone_best(out);
}

TEST(ResolutionLoop, AdversarialResolverNeverRegresses) {
  const auto f = loop_fixture();
  const auto worse = rules_array({keyword_rule("kwA", "beta", 0), keyword_rule("kwB", "alpha", 1)});
  ResolutionConfig cfg;
  cfg.max_rounds = 4;
  const auto out = run_loop(f, fixed_resolver(worse), cfg);
  EXPECT_EQ(out.state.stop_reason, StopReason::max_rounds);
  EXPECT_EQ(out.state.rounds.size(), 4u);
  EXPECT_EQ(out.state.best_version, 0);
  EXPECT_EQ(out.final_set, f.set0);
  for (const auto& r : out.state.rounds) {
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.input_version, 0);
  }
  expect_monotone_best(out);
}

TEST(ResolutionLoop, NoOpResolverTerminates) {
  const auto f = loop_fixture();
  const auto out = run_loop(f, fixed_resolver(render_rules_json(f.set0)));
  EXPECT_EQ(out.state.stop_reason, StopReason::converged);
  EXPECT_EQ(out.state.rounds.size(), 1u);
  EXPECT_EQ(out.state.best_version, 0);
  EXPECT_EQ(out.final_set.rules, f.set0.rules);
  expect_monotone_best(out);
}

TEST(ResolutionLoop, UnparseableResolverStopsWithWarning) {
  const auto f = loop_fixture();
  Gateway g;
  const auto out = run_loop(f, fixed_resolver("Sorry, I cannot help with that."), {}, std::nullopt, &g);
  EXPECT_EQ(out.state.stop_reason, StopReason::resolver_error);
  EXPECT_EQ(out.state.warnings.size(), 2u);
  EXPECT_EQ(out.final_set, f.set0);
  EXPECT_EQ(g.stats().at("resolver").backend_calls, 2u);
}

TEST(ResolutionLoop, RetryRecoversFromOneBadAnswer) {
  const auto f = loop_fixture();
  const auto corrected = rules_array({keyword_rule("kwA", "alpha", 0), keyword_rule("kwB", "beta", 1)});
  const auto resolver = scripted_chat_backend(
      {contains("Return only the complete revised rule set", corrected), contains("", "Let me think about it.")},
      "resolver");
  const auto out = run_loop(f, resolver);
  EXPECT_EQ(out.state.best_version, 1);
  EXPECT_FALSE(out.state.warnings.empty());
}

TEST(ResolutionLoop, ArtifactsForEveryVersion) {
  const auto f = loop_fixture();
  distill::testing::TempDir dir;
  const auto worse = rules_array({keyword_rule("kwA", "beta", 0), keyword_rule("kwB", "alpha", 1)});
  ResolutionConfig cfg;
  cfg.max_rounds = 3;
  const auto out = run_loop(f, fixed_resolver(worse), cfg, dir.path());
  ASSERT_EQ(out.versions.size(), 4u);
  for (size_t v = 0; v < out.versions.size(); ++v) {
    EXPECT_EQ(out.versions[v].version, static_cast<int>(v));
    if (v) {
      EXPECT_EQ(out.versions[v].parent_version, out.state.rounds[v - 1].input_version);
    }
    const auto set_file = dir.path() / "sets" / ("instruction_set.v" + std::to_string(v) + ".jsonl");
    ASSERT_TRUE(fs::exists(set_file)) << set_file;
    EXPECT_EQ(parse_instruction_set(read_file(set_file)), out.versions[v]);
    EXPECT_TRUE(fs::exists(dir.path() / "sets" / ("instruction_set.v" + std::to_string(v) + ".prompt.txt")));
  }
  for (size_t r = 1; r <= 3; ++r)
    for (const auto* name : {"train_predictions.jsonl", "exhibits.jsonl", "resolver_prompt.txt", "resolver_raw.txt",
                             "validation_predictions.jsonl"})
      EXPECT_TRUE(fs::exists(dir.path() / ("round_" + std::to_string(r)) / name)) << r << " " << name;
}

TEST(ResolutionLoop, TerminatesForArbitraryResolvers) {
  const auto f = loop_fixture();
  const std::vector<std::string> answers = {
      rules_array({keyword_rule("kwA", "alpha", 0), keyword_rule("kwB", "beta", 1)}),
      rules_array({keyword_rule("kwA", "beta", 0)}), render_rules_json(f.set0), "garbage",
      rules_array({keyword_rule("kwB", "beta", 0)})};
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Script script;
    for (int i = 0; i < 6; ++i) script.push_back(contains("", answers[rng() % answers.size()]));
    // First match wins, so vary which answer comes first.
    std::shuffle(script.begin(), script.end(), rng);
    ResolutionConfig cfg;
    cfg.max_rounds = 1 + rng() % 5;
    cfg.seed = rng();
    const auto out = run_loop(f, scripted_chat_backend(script, "resolver"), cfg);
    ASSERT_LE(out.state.rounds.size(), cfg.max_rounds);
    expect_monotone_best(out);
  }
}

TEST(ResolutionLoop, SameInputsSameOutcome) {
  const auto f = loop_fixture();
  const auto corrected = rules_array({keyword_rule("kwA", "alpha", 0), keyword_rule("kwB", "beta", 1)});
  ResolutionConfig cfg;
  cfg.n_failures = 1;
  cfg.n_successes = 2;
  cfg.seed = 99;
  const auto a = run_loop(f, fixed_resolver(corrected), cfg);
  const auto b = run_loop(f, fixed_resolver(corrected), cfg);
  EXPECT_EQ(state_to_json(a.state), state_to_json(b.state));
}

TEST(ResolutionConfig, Validation) {
  ResolutionConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_rounds = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_config);
  cfg = {};
  cfg.min_improvement = -0.1;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_config);
  cfg = {};
  cfg.n_successes = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_config);
}

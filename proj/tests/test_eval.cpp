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

#include <algorithm>
#include <random>

#include "distill/convert.hpp"
#include "distill/errors.hpp"
#include "distill/eval.hpp"
#include "oracles/f1_oracle.hpp"
#include "support/support.hpp"

using namespace distill;
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
  p.raw_text = label.value_or("unsure");
  p.parsed_label = std::move(label);
  return p;
}

const std::vector<std::string> kNli = {"Entailment", "Contradiction", "NotMentioned"};

TaskSchema two_class_schema() {
  TaskSchema s;
  s.task_id = "toy";
  s.input_fields = {"text"};
  s.label_set = {"pos", "neg"};
  return s;
}

std::vector<LabeledExample> toy_split(size_t per_class, Split split = Split::test) {
  std::vector<LabeledExample> out;
  for (size_t i = 0; i < per_class; ++i)
    for (const std::string label : {"pos", "neg"})
      out.push_back({label + "-" + std::to_string(split == Split::train ? 100 + i : i),
                     {{"text", "sample " + label + " " + std::to_string(i) + (split == Split::train ? " t" : "")}},
                     label,
                     split});
  return out;
}

EvalTemplates eval_templates() {
  return {&shipped_templates().get("query.v1"), &shipped_templates().get("few_shot.v1")};
}

}  // namespace

TEST(ParseLabel, Examples) {
  EXPECT_EQ(parse_label("Entailment", kNli), "Entailment");
  EXPECT_EQ(parse_label("  entailment.\n", kNli), "Entailment");
  EXPECT_EQ(parse_label("The answer is: contradiction.", kNli), "Contradiction");
  EXPECT_EQ(parse_label("Entailment or Contradiction", kNli), std::nullopt);
  EXPECT_EQ(parse_label("", kNli), std::nullopt);
  EXPECT_EQ(parse_label("NotMentionedness", kNli), std::nullopt);
}

TEST(ParseLabel, WholeWordsOnly) {
  const std::vector<std::string> labels = {"race", "gender", "profession", "religion"};
  EXPECT_EQ(parse_label("This is about racing cars and gender.", labels), "gender");
  EXPECT_EQ(parse_label("Religion", labels), "religion");
}

TEST(MacroF1, HandComputedCase) {
  const std::map<std::string, std::string> gold = {{"1", "A"}, {"2", "A"}, {"3", "B"}, {"4", "B"}};
  const std::vector<Prediction> preds = {pred("1", "A"), pred("2", "B"), pred("3", "B"), pred("4", "B")};
  const std::vector<std::string> labels = {"A", "B"};
  const auto r = macro_f1(preds, gold, labels);
  EXPECT_DOUBLE_EQ(r.per_class.at("A").precision, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class.at("A").recall, 0.5);
  EXPECT_NEAR(r.per_class.at("A").f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.per_class.at("B").precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.per_class.at("B").recall, 1.0);
  EXPECT_NEAR(r.per_class.at("B").f1, 0.8, 1e-15);
  EXPECT_NEAR(r.macro_f1, 0.7333333333333333, 1e-12);
}

TEST(MacroF1, AllCorrectAndAllAbstain) {
  const std::map<std::string, std::string> gold = {{"1", "A"}, {"2", "B"}, {"3", "C"}};
  const std::vector<std::string> labels = {"A", "B", "C"};
  std::vector<Prediction> right, none;
  for (const auto& [id, g] : gold) {
    right.push_back(pred(id, g));
    none.push_back(pred(id, std::nullopt));
  }
  EXPECT_DOUBLE_EQ(macro_f1(right, gold, labels).macro_f1, 1.0);
  const auto r = macro_f1(none, gold, labels);
  EXPECT_DOUBLE_EQ(r.macro_f1, 0.0);
  EXPECT_EQ(r.abstentions, 3u);
  for (const auto& [_, s] : r.per_class) EXPECT_DOUBLE_EQ(s.f1, 0.0);
}

TEST(MacroF1, AveragesOverGoldClassesOnly) {
  const std::map<std::string, std::string> gold = {{"1", "A"}, {"2", "A"}};
  const std::vector<std::string> labels = {"A", "B", "C"};
  const std::vector<Prediction> preds = {pred("1", "A"), pred("2", "A")};
  const auto r = macro_f1(preds, gold, labels);
  EXPECT_EQ(r.per_class.size(), 1u);
  EXPECT_DOUBLE_EQ(r.macro_f1, 1.0);
}

TEST(MacroF1, Errors) {
  const std::map<std::string, std::string> gold = {{"1", "A"}};
  const std::vector<std::string> labels = {"A"};
  EXPECT_EQ(code_of([&] { macro_f1(std::vector<Prediction>{pred("9", "A")}, gold, labels); }),
            Errc::unknown_example_id);
  EXPECT_EQ(code_of([&] { macro_f1(std::vector<Prediction>{pred("1", "A"), pred("1", "A")}, gold, labels); }),
            Errc::duplicate_prediction);
}

TEST(MacroF1, ConfusionRowsSumToGoldCounts) {
  const std::map<std::string, std::string> gold = {{"1", "A"}, {"2", "A"}, {"3", "B"}, {"4", "C"}, {"5", "C"}};
  const std::vector<std::string> labels = {"A", "B", "C"};
  const std::vector<Prediction> preds = {pred("1", "B"), pred("2", std::nullopt), pred("3", "B"), pred("4", "C"),
                                         pred("5", "A")};
  const auto r = macro_f1(preds, gold, labels);
  ASSERT_EQ(r.confusion_labels.back(), std::string(kAbstain));
  std::map<std::string, size_t> gold_counts;
  for (const auto& [_, g] : gold) ++gold_counts[g];
  for (size_t i = 0; i < labels.size(); ++i) {
    size_t row = 0;
    for (size_t v : r.confusion[i]) row += v;
    EXPECT_EQ(row, gold_counts[labels[i]]);
  }
}

TEST(MacroF1, PropertiesOnRandomFixtures) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> all = {"A", "B", "C", "D"};
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t k = 2 + rng() % 3;
    const size_t n = 1 + rng() % 50;
    const std::vector<std::string> labels(all.begin(), all.begin() + static_cast<long>(k));
    std::map<std::string, std::string> gold;
    std::vector<std::string> gold_vec, pred_vec;
    std::vector<Prediction> preds;
    for (size_t i = 0; i < n; ++i) {
      const std::string id = "e" + std::to_string(i);
      gold[id] = labels[rng() % k];
      const bool abstain = rng() % 10 == 0;
      preds.push_back(pred(id, abstain ? std::nullopt : std::optional<std::string>(labels[rng() % k])));
      gold_vec.push_back(gold[id]);
      pred_vec.push_back(preds.back().parsed_label.value_or(""));
    }
    const auto r = macro_f1(preds, gold, labels);
    ASSERT_NEAR(r.macro_f1, oracle::macro_f1(gold_vec, pred_vec), 1e-12) << "trial " << trial;

    double lo = 1, hi = 0;
    for (const auto& [_, s] : r.per_class) {
      ASSERT_GE(s.f1, 0.0);
      ASSERT_LE(s.f1, 1.0);
      lo = std::min(lo, s.f1);
      hi = std::max(hi, s.f1);
    }
    ASSERT_LE(lo, r.macro_f1 + 1e-15);
    ASSERT_GE(hi, r.macro_f1 - 1e-15);

    std::shuffle(preds.begin(), preds.end(), rng);
    ASSERT_EQ(macro_f1(preds, gold, labels).macro_f1, r.macro_f1) << "trial " << trial;
  }
}

TEST(MacroF1, ReportJsonRoundTrip) {
  const std::map<std::string, std::string> gold = {{"1", "A"}, {"2", "B"}};
  const std::vector<std::string> labels = {"A", "B"};
  auto r = macro_f1(std::vector<Prediction>{pred("1", "A"), pred("2", std::nullopt)}, gold, labels);
  r.instruction_set_version = 2;
  r.student_id = "student";
  const auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(report_to_json(back), report_to_json(r));
}

TEST(Evaluate, EchoStudentScoresOne) {
  const auto schema = two_class_schema();
  const auto split = toy_split(6);
  const auto templates = eval_templates();
  Script script;
  for (const auto& ex : split) {
    ScriptEntry e;
    e.matcher.mode = ScriptMatcher::Mode::full_text;
    e.matcher.pattern = templates.query->render({{"inputs", render_inputs(ex, schema)}});
    e.response = ex.gold_label;
    script.push_back(e);
  }
  EvalConfig cfg;
  cfg.regime = Regime::zero_shot;
  cfg.student = scripted_chat_backend(script, "echo");
  Gateway g;
  const auto out = evaluate(split, "system", cfg, schema, templates, {}, g);
  EXPECT_DOUBLE_EQ(out.report.macro_f1, 1.0);
  ASSERT_EQ(out.predictions.size(), split.size());
  for (size_t i = 0; i < split.size(); ++i) EXPECT_EQ(out.predictions[i].example_id, split[i].example_id);
  EXPECT_EQ(g.total_backend_calls(), split.size());
}

TEST(Evaluate, FixedWrongLabelMatchesOracle) {
  const auto schema = two_class_schema();
  const auto split = toy_split(5);
  EvalConfig cfg;
  cfg.regime = Regime::pld;
  cfg.student = scripted_chat_backend({distill::testing::contains("", "The label is neg.")}, "fixed");
  Gateway g;
  const auto out = evaluate(split, "rules", cfg, schema, eval_templates(), {}, g);
  std::vector<std::string> gold, preds;
  for (const auto& ex : split) {
    gold.push_back(ex.gold_label);
    preds.push_back("neg");
  }
  EXPECT_NEAR(out.report.macro_f1, oracle::macro_f1(gold, preds), 1e-12);
  EXPECT_NEAR(out.report.macro_f1, (0.0 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(Evaluate, TransportErrorsBecomeAbstentions) {
  const auto schema = two_class_schema();
  const auto split = toy_split(2);
  EvalConfig cfg;
  cfg.student.backend_id = "dead";
  cfg.student.kind = BackendKind::http_chat;
  cfg.student.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.student.model_name = "m";
  cfg.student.max_retries = 0;
  cfg.student.timeout_ms = 2000;
  Gateway g;
  const auto out = evaluate(split, "sys", cfg, schema, eval_templates(), {}, g);
  EXPECT_EQ(out.report.abstentions, split.size());
  EXPECT_DOUBLE_EQ(out.report.macro_f1, 0.0);
  for (const auto& p : out.predictions) {
    EXPECT_TRUE(p.abstained());
    EXPECT_FALSE(p.error.empty());
  }
}

TEST(Evaluate, FewShotPrefixesSeededExemplars) {
  const auto schema = two_class_schema();
  const auto split = toy_split(3);
  const auto pool = toy_split(6, Split::train);
  EvalConfig cfg;
  cfg.regime = Regime::few_shot;
  cfg.k_shots = 4;
  cfg.seed = 9;
  // Answers with the label of the first exemplar block, proving exemplars are
  // in the user prompt.
  cfg.student = scripted_chat_backend({distill::testing::contains("Labeled examples:", "pos")}, "fs");
  Gateway g1, g2;
  const auto a = evaluate(split, "sys", cfg, schema, eval_templates(), pool, g1);
  const auto b = evaluate(split, "sys", cfg, schema, eval_templates(), pool, g2);
  EXPECT_EQ(report_to_json(a.report), report_to_json(b.report));
  EXPECT_EQ(a.predictions.size(), split.size());
  for (const auto& p : a.predictions) EXPECT_EQ(p.parsed_label, "pos");

  const auto exemplars = render_exemplars(sample_few_shot(pool, 4, 9), schema);
  EXPECT_EQ(exemplars.substr(0, 7), "Input:\n");
  cfg.k_shots = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_config);
}

TEST(Evaluate, LatencySummary) {
  std::vector<Prediction> preds;
  for (int i = 1; i <= 100; ++i) {
    Prediction p;
    p.latency_ms = i;
    preds.push_back(p);
  }
  const auto s = summarize_latency(preds);
  EXPECT_NEAR(s.mean_ms, 50.5, 1e-9);
  EXPECT_GE(s.p50_ms, 50.0);
  EXPECT_LE(s.p50_ms, 51.0);
  EXPECT_GE(s.p95_ms, 95.0);
  EXPECT_LE(s.p95_ms, 96.0);
}

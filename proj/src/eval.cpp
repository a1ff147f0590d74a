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

#include "distill/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <set>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::zero_shot: return "zero_shot";
    case Regime::few_shot: return "few_shot";
    case Regime::pld: return "pld";
  }
  return "pld";
}

std::optional<Regime> parse_regime(std::string_view text) {
  for (auto r : {Regime::zero_shot, Regime::few_shot, Regime::pld})
    if (to_string(r) == text) return r;
  return std::nullopt;
}

json prediction_to_json(const Prediction& p) {
  json j{{"example_id", p.example_id},
         {"raw_text", p.raw_text},
         {"parsed_label", p.parsed_label ? *p.parsed_label : std::string(kAbstain)},
         {"latency_ms", p.latency_ms}};
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.example_id = j.at("example_id").get<std::string>();
  p.raw_text = j.at("raw_text").get<std::string>();
  auto label = j.at("parsed_label").get<std::string>();
  if (label != kAbstain) p.parsed_label = std::move(label);
  p.latency_ms = j.value("latency_ms", 0.0);
  p.error = j.value("error", std::string{});
  return p;
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string_view strip_punct(std::string_view s) {
  auto punct = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || std::ispunct(static_cast<unsigned char>(c));
  };
  while (!s.empty() && punct(s.front())) s.remove_prefix(1);
  while (!s.empty() && punct(s.back())) s.remove_suffix(1);
  return s;
}

bool contains_whole_word(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  for (size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

std::optional<std::string> parse_label(std::string_view raw, std::span<const std::string> labels) {
  const std::string whole = to_lower(strip_punct(raw));
  for (const auto& l : labels)
    if (whole == to_lower(l)) return l;

  const std::string lowered = to_lower(raw);
  const std::string* found = nullptr;
  for (const auto& l : labels) {
    if (contains_whole_word(lowered, to_lower(l))) {
      if (found) return std::nullopt;
      found = &l;
    }
  }
  if (found) return *found;
  return std::nullopt;
}

json report_to_json(const EvalReport& r) {
  json per_class = json::object();
  for (const auto& [label, s] : r.per_class)
    per_class[label] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  return json{{"regime", std::string(to_string(r.regime))},
              {"instruction_set_version", r.instruction_set_version ? json(*r.instruction_set_version) : json(nullptr)},
              {"split", r.split},
              {"student_id", r.student_id},
              {"n", r.n},
              {"abstentions", r.abstentions},
              {"macro_f1", r.macro_f1},
              {"per_class", per_class},
              {"confusion_labels", r.confusion_labels},
              {"confusion", r.confusion}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.regime = parse_regime(j.at("regime").get<std::string>()).value_or(Regime::pld);
  if (!j.at("instruction_set_version").is_null()) r.instruction_set_version = j.at("instruction_set_version").get<int>();
  r.split = j.at("split").get<std::string>();
  r.student_id = j.at("student_id").get<std::string>();
  r.n = j.at("n").get<size_t>();
  r.abstentions = j.at("abstentions").get<size_t>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& [label, s] : j.at("per_class").items())
    r.per_class[label] = {s.at("precision"), s.at("recall"), s.at("f1"), s.at("support")};
  r.confusion_labels = j.at("confusion_labels").get<std::vector<std::string>>();
  r.confusion = j.at("confusion").get<std::vector<std::vector<size_t>>>();
  return r;
}

EvalReport macro_f1(std::span<const Prediction> predictions, const std::map<std::string, std::string>& gold,
                    std::span<const std::string> label_set) {
  std::set<std::string> seen_ids;
  std::vector<std::string> axes(label_set.begin(), label_set.end());
  std::set<std::string> extra;
  for (const auto& p : predictions) {
    auto g = gold.find(p.example_id);
    if (g == gold.end()) throw Error(Errc::unknown_example_id, p.example_id);
    if (!seen_ids.insert(p.example_id).second) throw Error(Errc::duplicate_prediction, p.example_id);
    if (std::find(axes.begin(), axes.end(), g->second) == axes.end()) extra.insert(g->second);
    if (p.parsed_label && std::find(axes.begin(), axes.end(), *p.parsed_label) == axes.end())
      extra.insert(*p.parsed_label);
  }
  axes.insert(axes.end(), extra.begin(), extra.end());
  axes.emplace_back(kAbstain);
  auto axis = [&](const std::string& label) {
    return static_cast<size_t>(std::find(axes.begin(), axes.end(), label) - axes.begin());
  };

  EvalReport report;
  report.n = predictions.size();
  report.confusion_labels = axes;
  report.confusion.assign(axes.size(), std::vector<size_t>(axes.size(), 0));
  for (const auto& p : predictions) {
    const size_t row = axis(gold.at(p.example_id));
    const size_t col = p.parsed_label ? axis(*p.parsed_label) : axes.size() - 1;
    ++report.confusion[row][col];
    if (!p.parsed_label) ++report.abstentions;
  }

  double sum_f1 = 0;
  size_t classes = 0;
  for (size_t c = 0; c + 1 < axes.size(); ++c) {
    size_t support = 0, predicted = 0;
    for (size_t k = 0; k < axes.size(); ++k) {
      support += report.confusion[c][k];
      predicted += report.confusion[k][c];
    }
    if (support == 0) continue;
    const size_t tp = report.confusion[c][c];
    ClassScores s;
    s.support = support;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = static_cast<double>(tp) / static_cast<double>(support);
    s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    report.per_class[axes[c]] = s;
    sum_f1 += s.f1;
    ++classes;
  }
  report.macro_f1 = classes ? sum_f1 / static_cast<double>(classes) : 0.0;
  return report;
}

void EvalConfig::validate() const {
  if (regime == Regime::few_shot && k_shots < 1)
    throw Error(Errc::invalid_config, "few-shot evaluation needs k_shots >= 1");
  student.validate();
  if (!student.is_chat()) throw Error(Errc::invalid_config, "student backend must be a chat backend");
}

LatencySummary summarize_latency(std::span<const Prediction> predictions) {
  LatencySummary s;
  if (predictions.empty()) return s;
  std::vector<double> v;
  for (const auto& p : predictions) v.push_back(p.latency_ms);
  std::sort(v.begin(), v.end());
  double total = 0;
  for (double x : v) total += x;
  s.mean_ms = total / static_cast<double>(v.size());
  auto rank = [&](double q) {
    size_t idx = static_cast<size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<size_t>(idx, 1, v.size()) - 1];
  };
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  return s;
}

std::string render_inputs(const LabeledExample& example, const TaskSchema& schema) {
  std::string out;
  for (size_t i = 0; i < schema.input_fields.size(); ++i) {
    const auto& f = schema.input_fields[i];
    if (i) out += '\n';
    auto it = example.inputs.find(f);
    out += f + ": " + (it == example.inputs.end() ? std::string{} : it->second);
  }
  return out;
}

std::string render_exemplars(std::span<const LabeledExample> exemplars, const TaskSchema& schema) {
  std::string out;
  for (size_t i = 0; i < exemplars.size(); ++i) {
    if (i) out += "\n\n";
    out += "Input:\n" + render_inputs(exemplars[i], schema) + "\nLabel: " + exemplars[i].gold_label;
  }
  return out;
}

EvalOutcome evaluate(std::span<const LabeledExample> split, const std::string& system_prompt,
                     const EvalConfig& config, const TaskSchema& schema, const EvalTemplates& templates,
                     std::span<const LabeledExample> few_shot_pool, Gateway& gateway) {
  config.validate();
  if (split.empty()) throw Error(Errc::insufficient_examples, "evaluation split is empty");
  const bool few_shot = config.regime == Regime::few_shot;
  if (!templates.query || (few_shot && !templates.few_shot))
    throw Error(Errc::unknown_template, "evaluation templates not provided");

  std::string exemplars;
  if (few_shot) exemplars = render_exemplars(sample_few_shot(few_shot_pool, config.k_shots, config.seed), schema);

  EvalOutcome out;
  out.predictions.resize(split.size());
  gateway.parallel_for(split.size(), [&](size_t i) {
    const auto& ex = split[i];
    ChatRequest req;
    req.system_text = system_prompt;
    req.role = BackendRole::student;
    req.temperature = config.temperature;
    req.max_output_tokens = config.max_output_tokens;
    const std::string inputs = render_inputs(ex, schema);
    req.user_text = few_shot ? templates.few_shot->render({{"exemplars", exemplars}, {"inputs", inputs}})
                             : templates.query->render({{"inputs", inputs}});

    Prediction p;
    p.example_id = ex.example_id;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto response = gateway.complete(req, config.student);
      p.raw_text = response.text;
      p.parsed_label = parse_label(response.text, schema.label_set);
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    p.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.predictions[i] = std::move(p);
  });

  std::map<std::string, std::string> gold;
  for (const auto& ex : split) gold[ex.example_id] = ex.gold_label;
  out.report = macro_f1(out.predictions, gold, schema.label_set);
  out.report.regime = config.regime;
  out.report.student_id = config.student.backend_id;
  out.latency = summarize_latency(out.predictions);
  return out;
}

}  // namespace distill

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

#include "support.hpp"

#include <stdlib.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "distill/errors.hpp"

namespace distill::testing {

fs::path source_dir() { return DISTILL_SOURCE_DIR; }

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "distill-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw Error(Errc::io_error, "mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

PipelineConfig synthetic_config(const fs::path& run_root) {
  PipelineConfig cfg = load_config(source_dir() / "data/synthetic/config.json");
  cfg.run_root = run_root.string();
  return cfg;
}

BundleFixture three_bundle_fixture() {
  BundleFixture f;
  f.embedder = hash_embed_backend(16, "bundle-embed");
  f.embedder.anchors = {{"[alpha]", 0}, {"[beta]", 1}, {"[gamma]", 2}, {"[lone-1]", 3}, {"[lone-2]", 4}};
  f.embedder.anchor_jitter = 0.05;

  auto add = [&](const std::string& prefix, int count, const std::string& label, std::vector<std::string>& ids) {
    for (int i = 0; i < count; ++i) {
      MicroInstruction mi;
      mi.source_example_id = prefix.substr(1, prefix.size() - 2) + "-" + std::to_string(i);
      mi.instruction_id = "mi-" + mi.source_example_id;
      mi.reasoning_trace = "trace";
      mi.executable_rule = prefix + " rule variant " + std::to_string(i);
      mi.gold_label = label;
      ids.push_back(mi.instruction_id);
      f.instructions.push_back(std::move(mi));
    }
  };
  // Interleave the bundles so cluster numbering depends on first core point.
  add("[beta]", 15, "B", f.bundle_b);
  add("[lone-1]", 1, "A", f.outliers);
  add("[alpha]", 15, "A", f.bundle_a);
  add("[gamma]", 8, "C", f.bundle_c);
  add("[lone-2]", 1, "C", f.outliers);
  return f;
}

std::vector<std::vector<double>> random_unit_vectors(size_t n, size_t dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    double norm = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  return out;
}

std::string golden_mismatch(const std::string& name, const std::string& actual) {
  const fs::path path = source_dir() / "tests/golden" / name;
  if (const char* update = std::getenv("DISTILL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    write_file_atomic(path, actual);
    return "";
  }
  if (!fs::exists(path)) return "missing golden file " + path.string();
  const std::string expected = read_file(path);
  if (expected == actual) return "";
  size_t i = 0;
  while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
  return name + " differs at byte " + std::to_string(i) + " (expected " + std::to_string(expected.size()) +
         " bytes, got " + std::to_string(actual.size()) + ")";
}

const TemplateLibrary& shipped_templates() {
  static const TemplateLibrary library(source_dir() / "templates");
  return library;
}

LoopFixture loop_fixture() {
  LoopFixture f;
  f.schema.task_id = "toy";
  f.schema.input_fields = {"text"};
  f.schema.label_set = {"alpha", "beta"};
  for (int i = 0; i < 6; ++i) {
    f.train.push_back({"ta-" + std::to_string(i), {{"text", "kwA item " + std::to_string(i)}}, "alpha", Split::train});
    f.train.push_back({"tb-" + std::to_string(i), {{"text", "kwB item " + std::to_string(i)}}, "beta", Split::train});
  }
  f.train.push_back({"tm-0", {{"text", "nothing at all"}}, "beta", Split::train});
  f.train.push_back({"tm-1", {{"text", "still nothing"}}, "beta", Split::train});
  for (int i = 0; i < 3; ++i) {
    f.validation.push_back(
        {"va-" + std::to_string(i), {{"text", "kwA check " + std::to_string(i)}}, "alpha", Split::validation});
    f.validation.push_back(
        {"vb-" + std::to_string(i), {{"text", "kwB check " + std::to_string(i)}}, "beta", Split::validation});
  }
  f.set0.task_id = "toy";
  f.set0.rules = {keyword_rule("kwA", "alpha", 0), keyword_rule("kwB", "alpha", 1)};
  return f;
}

ConsolidatedRule keyword_rule(const std::string& kw, const std::string& label, int cluster) {
  return {"Keyword " + kw, std::vector<RuleBranch>{{"the text mentions " + kw, label}}, cluster, 6};
}

BackendConfig keyword_student() {
  return scripted_chat_backend({contains("kwB", "beta", "mentions kwB → beta"),
                                contains("kwB", "alpha", "mentions kwB → alpha"), contains("kwA", "beta", "mentions kwA → beta"),
                                contains("kwA", "alpha"), contains("", "alpha")},
                               "student");
}

std::string rules_array(const std::vector<ConsolidatedRule>& rules) {
  json arr = json::array();
  for (const auto& r : rules) arr.push_back(rule_to_json(r, false));
  return arr.dump();
}

BackendConfig fixed_resolver(std::string answer) {
  return scripted_chat_backend({contains("", std::move(answer))}, "resolver");
}

ResolutionTemplates loop_templates() {
  return {&shipped_templates().get("system_prompt.v1"), &shipped_templates().get("query.v1"),
          &shipped_templates().get("resolve.v1")};
}

namespace {

MicroInstruction micro(const std::string& id, const std::string& rule, const std::string& label) {
  return {id, "ex-" + id, "trace for " + id, rule, label};
}

}  // namespace

SynthesisPromptFixture synthesis_prompt_fixture() {
  SynthesisPromptFixture f;
  f.members = {micro("mi-1", "If the clause lets the recipient keep copies for legal archiving, answer Entailment.",
                     "Entailment"),
               micro("mi-2", "If the agreement orders all copies destroyed with no exception, answer Contradiction.",
                     "Contradiction"),
               micro("mi-3", "If retention of copies is never discussed, answer NotMentioned.", "NotMentioned")};
  f.cluster.cluster_id = 4;
  for (const auto& m : f.members) f.cluster.member_ids.push_back(m.instruction_id);
  f.cluster.medoid_id = "mi-1";
  return f;
}

InstructionSet system_prompt_fixture_set() {
  InstructionSet set;
  set.task_id = "contract-nli";
  set.rules.push_back({"Retaining Copies",
                       std::vector<RuleBranch>{
                           {"the text permits keeping copies for legal or archival purposes", "Entailment"},
                           {"the text requires destruction of every copy", "Contradiction"}},
                       2, 31});
  set.rules.push_back({"Confidentiality Of Agreement",
                       std::string("Treat the existence of the agreement as confidential only when the text says so."),
                       0, 12});
  return set;
}

ResolutionPromptFixture resolution_prompt_fixture() {
  ResolutionPromptFixture f;
  f.loop = loop_fixture();
  f.set = f.loop.set0;
  f.set.rules.resize(1);
  auto exhibit = [&](size_t i, const std::string& answer) {
    Prediction p;
    p.example_id = f.loop.train[i].example_id;
    p.raw_text = answer;
    p.parsed_label = parse_label(answer, f.loop.schema.label_set);
    return Exhibit{f.loop.train[i], p};
  };
  f.failures = {exhibit(1, "alpha"), exhibit(12, "hmm")};
  f.successes = {exhibit(0, "alpha")};
  return f;
}

ScriptEntry contains(std::string pattern, std::string response, std::optional<std::string> system_contains) {
  ScriptEntry e;
  e.matcher.pattern = std::move(pattern);
  e.matcher.system_contains = std::move(system_contains);
  e.response = std::move(response);
  return e;
}

}  // namespace distill::testing

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
#include <string>
#include <vector>

#include "distill/config.hpp"
#include "distill/extraction.hpp"
#include "distill/gateway.hpp"
#include "distill/io.hpp"
#include "distill/prompt_template.hpp"
#include "distill/resolution.hpp"

namespace distill::testing {

fs::path source_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// The bundled ticket-triage config with its run root moved to `run_root`.
PipelineConfig synthetic_config(const fs::path& run_root);

/// 15/15/8 instructions whose rules share one of three anchored prefixes, plus
/// two singletons anchored on axes of their own.
struct BundleFixture {
  std::vector<MicroInstruction> instructions;
  BackendConfig embedder;
  std::vector<std::string> bundle_a, bundle_b, bundle_c, outliers;
};
BundleFixture three_bundle_fixture();

/// Random unit vectors in `dim` dimensions.
std::vector<std::vector<double>> random_unit_vectors(size_t n, size_t dim, uint64_t seed);

/// Compares `actual` with tests/golden/<name>. With DISTILL_UPDATE_GOLDEN=1
/// in the environment the file is (re)written instead. Returns "" on match,
/// otherwise a description of the first difference.
std::string golden_mismatch(const std::string& name, const std::string& actual);

/// Templates shipped in the source tree.
const TemplateLibrary& shipped_templates();

/// Two keyword rules over labels alpha/beta for resolution-loop tests. Train
/// also holds two keyword-less examples with gold beta that the student
/// always gets wrong, so every round has something to resolve. set0 maps
/// kwB to the wrong label.
struct LoopFixture {
  TaskSchema schema;
  std::vector<LabeledExample> train, validation;
  InstructionSet set0;
};
LoopFixture loop_fixture();
ConsolidatedRule keyword_rule(const std::string& kw, const std::string& label, int cluster);
/// Student that follows whichever keyword rules its system prompt carries.
BackendConfig keyword_student();
/// JSON array of rules without provenance, as a resolver would answer.
std::string rules_array(const std::vector<ConsolidatedRule>& rules);
BackendConfig fixed_resolver(std::string answer);
ResolutionTemplates loop_templates();

/// Inputs of the reviewed golden prompts.
struct SynthesisPromptFixture {
  Cluster cluster;
  std::vector<MicroInstruction> members;
};
SynthesisPromptFixture synthesis_prompt_fixture();
InstructionSet system_prompt_fixture_set();

struct ResolutionPromptFixture {
  LoopFixture loop;
  InstructionSet set;
  std::vector<Exhibit> failures, successes;
};
ResolutionPromptFixture resolution_prompt_fixture();

ScriptEntry contains(std::string pattern, std::string response,
                     std::optional<std::string> system_contains = std::nullopt);

}  // namespace distill::testing

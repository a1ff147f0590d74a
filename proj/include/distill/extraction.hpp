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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill/corpus.hpp"
#include "distill/errors.hpp"
#include "distill/gateway.hpp"
#include "distill/prompt_template.hpp"

namespace distill {

/// One teacher-derived rule tied to the training example it came from.
struct MicroInstruction {
  std::string instruction_id;
  std::string source_example_id;
  std::string reasoning_trace;
  std::string executable_rule;
  std::string gold_label;

  friend bool operator==(const MicroInstruction&, const MicroInstruction&) = default;
};

void to_json(json& j, const MicroInstruction& mi);
void from_json(const json& j, MicroInstruction& mi);

struct TeacherOutput {
  std::string reasoning_trace;
  std::string executable_rule;
};

/// Binds every input field plus the gold label (under "gold_label" and under
/// `label_field` when that differs) and renders `tmpl`.
std::string render_extraction_prompt(const LabeledExample& example, const PromptTemplate& tmpl,
                                     const std::string& label_field = "gold_label");

/// Returns the first JSON object in `raw` (code fences stripped) carrying both
/// reasoning_trace and executable_rule, values verbatim.
/// Throws Error(no_json_found | missing_key | empty_rule).
TeacherOutput parse_teacher_output(std::string_view raw);

struct ExtractionFailure {
  std::string example_id;
  Errc code;
  std::string message;
};

struct ExtractionResult {
  std::vector<MicroInstruction> instructions;
  std::vector<ExtractionFailure> failures;
};

struct ExtractionOptions {
  double failure_ceiling = 0.2;
  std::string label_field = "gold_label";
  double temperature = 0.0;
  int max_output_tokens = 4096;
};

inline constexpr std::string_view kJsonReminder = "\n\nReturn only the JSON object.";

/// One teacher call per example (plus one reminder retry on a parse
/// failure). Per-example errors are collected; the result keeps input order
/// regardless of completion order. Throws Error(aborted_too_many_failures)
/// when failures exceed `failure_ceiling` of the input.
ExtractionResult extract_all(std::span<const LabeledExample> train, const PromptTemplate& tmpl,
                             const BackendConfig& teacher, Gateway& gateway,
                             const ExtractionOptions& options = {});

}  // namespace distill

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

#include "distill/extraction.hpp"

#include <optional>
#include <variant>

#include "distill/json_scan.hpp"
#include "distill/text.hpp"

namespace distill {

void to_json(json& j, const MicroInstruction& mi) {
  j = json{{"instruction_id", mi.instruction_id},
           {"source_example_id", mi.source_example_id},
           {"reasoning_trace", mi.reasoning_trace},
           {"executable_rule", mi.executable_rule},
           {"gold_label", mi.gold_label}};
}

void from_json(const json& j, MicroInstruction& mi) {
  j.at("instruction_id").get_to(mi.instruction_id);
  j.at("source_example_id").get_to(mi.source_example_id);
  j.at("reasoning_trace").get_to(mi.reasoning_trace);
  j.at("executable_rule").get_to(mi.executable_rule);
  j.at("gold_label").get_to(mi.gold_label);
}

std::string render_extraction_prompt(const LabeledExample& example, const PromptTemplate& tmpl,
                                     const std::string& label_field) {
  std::map<std::string, std::string> values(example.inputs.begin(), example.inputs.end());
  values["gold_label"] = example.gold_label;
  values[label_field] = example.gold_label;
  return tmpl.render(values);
}

TeacherOutput parse_teacher_output(std::string_view raw) {
  std::vector<json> objects;
  for (auto& v : scan_json_values(strip_code_fence(raw)))
    if (v.is_object()) objects.push_back(std::move(v));
  if (objects.empty()) throw Error(Errc::no_json_found, "teacher output has no JSON object");

  for (const auto& obj : objects) {
    auto trace = obj.find("reasoning_trace");
    auto rule = obj.find("executable_rule");
    if (trace == obj.end() || rule == obj.end()) continue;
    if (!trace->is_string()) throw Error(Errc::missing_key, "reasoning_trace (not a string)");
    if (!rule->is_string()) throw Error(Errc::missing_key, "executable_rule (not a string)");
    TeacherOutput out{trace->get<std::string>(), rule->get<std::string>()};
    if (trim(out.executable_rule).empty()) throw Error(Errc::empty_rule, "executable_rule is empty");
    return out;
  }
  const auto& first = objects.front();
  throw Error(Errc::missing_key, first.contains("reasoning_trace") ? "executable_rule" : "reasoning_trace");
}

namespace {

bool is_parse_error(Errc code) {
  return code == Errc::no_json_found || code == Errc::missing_key || code == Errc::empty_rule;
}

}  // namespace

ExtractionResult extract_all(std::span<const LabeledExample> train, const PromptTemplate& tmpl,
                             const BackendConfig& teacher, Gateway& gateway,
                             const ExtractionOptions& options) {
  if (train.empty()) throw Error(Errc::insufficient_examples, "extraction needs at least one example");

  using Outcome = std::variant<MicroInstruction, ExtractionFailure>;
  std::vector<std::optional<Outcome>> outcomes(train.size());

  gateway.parallel_for(train.size(), [&](size_t i) {
    const auto& ex = train[i];
    ChatRequest req;
    req.temperature = options.temperature;
    req.max_output_tokens = options.max_output_tokens;
    req.role = BackendRole::teacher;
    try {
      req.user_text = render_extraction_prompt(ex, tmpl, options.label_field);
    } catch (const Error& e) {
      outcomes[i] = ExtractionFailure{ex.example_id, e.code(), e.what()};
      return;
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        auto response = gateway.complete(req, teacher);
        auto parsed = parse_teacher_output(response.text);
        outcomes[i] = MicroInstruction{"mi-" + ex.example_id, ex.example_id,
                                       std::move(parsed.reasoning_trace),
                                       std::move(parsed.executable_rule), ex.gold_label};
        return;
      } catch (const Error& e) {
        if (attempt == 0 && is_parse_error(e.code())) {
          req.user_text += kJsonReminder;
          continue;
        }
        outcomes[i] = ExtractionFailure{ex.example_id, e.code(), e.what()};
        return;
      }
    }
  });

  ExtractionResult result;
  for (auto& o : outcomes) {
    if (auto* mi = std::get_if<MicroInstruction>(&*o))
      result.instructions.push_back(std::move(*mi));
    else
      result.failures.push_back(std::get<ExtractionFailure>(std::move(*o)));
  }
  const double fraction = static_cast<double>(result.failures.size()) / static_cast<double>(train.size());
  if (fraction > options.failure_ceiling)
    throw Error(Errc::aborted_too_many_failures,
                std::to_string(result.failures.size()) + " of " + std::to_string(train.size()) +
                    " examples failed (ceiling " + std::to_string(options.failure_ceiling) + ")");
  return result;
}

}  // namespace distill

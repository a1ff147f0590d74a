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

#include <stdexcept>
#include <string>
#include <string_view>

namespace distill {

/// Every failure the engine reports carries one of these codes. Callers
/// branch on the code; the message is for humans.
enum class Errc {
  // corpus
  malformed_record,
  unknown_label,
  duplicate_id,
  missing_field,
  invalid_schema,
  insufficient_examples,
  // model gateway
  transport_error,
  rate_limited,
  auth_missing,
  empty_completion,
  dimension_mismatch,
  script_exhausted,
  invalid_backend,
  // prompts and parsing
  missing_placeholder_value,
  unknown_template,
  no_json_found,
  missing_key,
  empty_rule,
  aborted_too_many_failures,
  // clustering
  zero_vector,
  invalid_params,
  // synthesis and resolution
  empty_cluster,
  unknown_branch_label,
  synthesis_failed,
  empty_rule_set,
  no_failures,
  // eval
  unknown_example_id,
  duplicate_prediction,
  // run store and cli
  io_error,
  run_exists,
  run_locked,
  corrupt_manifest,
  invalid_config,
  config_mismatch,
  phase_not_ready,
  no_reports,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace distill

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

#include "distill/errors.hpp"

namespace distill {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::missing_field: return "MissingField";
    case Errc::invalid_schema: return "InvalidSchema";
    case Errc::insufficient_examples: return "InsufficientExamples";
    case Errc::transport_error: return "TransportError";
    case Errc::rate_limited: return "RateLimited";
    case Errc::auth_missing: return "AuthMissing";
    case Errc::empty_completion: return "EmptyCompletion";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::script_exhausted: return "ScriptExhausted";
    case Errc::invalid_backend: return "InvalidBackend";
    case Errc::missing_placeholder_value: return "MissingPlaceholderValue";
    case Errc::unknown_template: return "UnknownTemplate";
    case Errc::no_json_found: return "NoJsonFound";
    case Errc::missing_key: return "MissingKey";
    case Errc::empty_rule: return "EmptyRule";
    case Errc::aborted_too_many_failures: return "AbortedTooManyFailures";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::invalid_params: return "InvalidParams";
    case Errc::empty_cluster: return "EmptyCluster";
    case Errc::unknown_branch_label: return "UnknownBranchLabel";
    case Errc::synthesis_failed: return "SynthesisFailed";
    case Errc::empty_rule_set: return "EmptyRuleSet";
    case Errc::no_failures: return "NoFailures";
    case Errc::unknown_example_id: return "UnknownExampleId";
    case Errc::duplicate_prediction: return "DuplicatePrediction";
    case Errc::io_error: return "IoError";
    case Errc::run_exists: return "RunExists";
    case Errc::run_locked: return "RunLocked";
    case Errc::corrupt_manifest: return "CorruptManifest";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::config_mismatch: return "ConfigMismatch";
    case Errc::phase_not_ready: return "PhaseNotReady";
    case Errc::no_reports: return "NoReports";
  }
  return "Unknown";
}

Error::Error(Errc code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace distill

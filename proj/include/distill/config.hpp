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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distill/clustering.hpp"
#include "distill/corpus.hpp"
#include "distill/gateway.hpp"
#include "distill/io.hpp"
#include "distill/prompt_template.hpp"
#include "distill/resolution.hpp"

namespace distill {

/// Rows of the final comparison table. `clustered` is the student prompted
/// with the synthesized set before any resolution round; `pld` uses the
/// resolved set.
enum class ReportRow { zero_shot, few_shot, clustered, pld };

inline constexpr std::array<ReportRow, 4> kReportRows = {ReportRow::zero_shot, ReportRow::few_shot,
                                                         ReportRow::clustered, ReportRow::pld};

std::string_view to_string(ReportRow row);
std::string_view display_name(ReportRow row);
std::optional<ReportRow> parse_report_row(std::string_view text);

struct Backends {
  BackendConfig teacher;
  BackendConfig synthesizer;
  BackendConfig resolver;
  BackendConfig student;
  BackendConfig embedder;
};

struct PipelineConfig {
  TaskSchema task;  // prompt_template_ids holds the template id per prompt slot
  std::string dataset;
  std::optional<std::string> template_dir;
  Backends backends;
  ClusteringParams clustering;
  ResolutionConfig resolution;
  size_t k_shots = 5;
  std::vector<ReportRow> regimes = {ReportRow::pld};
  Split eval_split = Split::test;
  int student_max_output_tokens = 64;
  std::optional<size_t> extraction_limit;
  double extraction_failure_ceiling = 0.2;
  uint64_t seed = 0;
  std::string run_root = "runs";
  size_t parallelism = 4;

  // Directory relative paths are resolved against; not serialized.
  fs::path base_dir = ".";

  fs::path resolve_path(const std::string& p) const;
  fs::path template_path() const;
  fs::path run_root_path() const { return resolve_path(run_root); }

  /// Template id for a prompt slot: extract, synthesize, resolve, system,
  /// system_zero_shot, query, few_shot.
  std::string template_id(const std::string& slot) const;

  /// Checks backends and that every referenced template exists and binds only
  /// known placeholders. Throws InvalidConfig, InvalidBackend or UnknownTemplate.
  void validate(const TemplateLibrary& library) const;

  /// Backend with its cache directory filled in under the run root when unset.
  BackendConfig effective_backend(const BackendConfig& cfg) const;
};

inline const std::vector<std::string> kTemplateSlots = {"extract", "synthesize", "resolve", "system",
                                                        "system_zero_shot", "query", "few_shot"};

/// Command-line overrides. Each maps onto one config field; unset fields leave
/// the config untouched.
struct ConfigOverrides {
  std::optional<double> epsilon;
  std::optional<size_t> min_samples;
  std::optional<size_t> k_shots;
  std::optional<size_t> max_rounds;
  std::optional<size_t> extraction_limit;
  std::optional<std::vector<ReportRow>> regimes;  // pld is always added
  std::optional<uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> run_root;
  std::optional<size_t> parallelism;
};

void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& o);

/// Parses "zero_shot,few_shot,clustered" style lists.
std::vector<ReportRow> parse_regime_list(std::string_view text);

json config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const json& j, fs::path base_dir = ".");
PipelineConfig load_config(const fs::path& path);

std::string default_template_dir();

}  // namespace distill

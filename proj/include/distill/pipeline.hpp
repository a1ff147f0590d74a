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

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "distill/config.hpp"
#include "distill/corpus.hpp"
#include "distill/errors.hpp"
#include "distill/eval.hpp"
#include "distill/gateway.hpp"
#include "distill/runstore.hpp"

namespace distill {

/// Content-derived run id: identical config and dataset map to the same run.
std::string default_run_id(const PipelineConfig& cfg, const std::string& dataset_digest);

struct PipelineOptions {
  std::optional<std::string> run_id;
  std::ostream* log = nullptr;
  // Test seam: called before each phase starts.
  std::function<void(Phase)> before_phase;
};

class Pipeline {
 public:
  /// Validates the config and loads the dataset and templates, then creates or
  /// resumes the run. No backend is contacted here.
  Pipeline(PipelineConfig cfg, Gateway& gateway, PipelineOptions options = {});

  /// Runs one phase, replacing its previous artifacts and invalidating
  /// downstream phases. Upstream phases must be complete.
  void run_phase(Phase phase);

  /// Runs every phase that is not complete, in order. Returns the phases executed.
  std::vector<Phase> run_all();

  const RunStore& store() const { return store_; }
  const fs::path& run_dir() const { return store_.dir(); }
  const Dataset& dataset() const { return dataset_; }

 private:
  void do_extract();
  void do_cluster();
  void do_synthesize();
  void do_resolve();
  void do_evaluate();
  void say(const std::string& line) const;
  static RunStore open_store(const PipelineConfig& cfg, const Dataset& dataset, const PipelineOptions& options);

  PipelineConfig cfg_;
  Gateway& gateway_;
  PipelineOptions options_;
  TemplateLibrary templates_;
  Dataset dataset_;
  RunStore store_;
};

enum class ReportFormat { text_table, records };

struct ReportEntry {
  ReportRow row = ReportRow::pld;
  EvalReport report;
};

/// Reads the stored reports of a run. Throws NoReports if evaluation has not
/// produced any.
std::vector<ReportEntry> load_reports(const fs::path& run_dir);

std::string render_report(std::span<const ReportEntry> entries, ReportFormat format);

/// Process exit status for an error: 2 configuration or dataset problem,
/// 3 phase failure, 4 backend or transport failure.
int exit_code(Errc code);

inline constexpr std::string_view kReportsFile = "evaluate/reports.jsonl";
inline constexpr std::string_view kReportTextFile = "evaluate/report.txt";

}  // namespace distill

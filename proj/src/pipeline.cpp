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

#include "distill/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include "distill/clustering.hpp"
#include "distill/digest.hpp"
#include "distill/errors.hpp"
#include "distill/extraction.hpp"
#include "distill/resolution.hpp"
#include "distill/synthesis.hpp"

namespace distill {

std::string default_run_id(const PipelineConfig& cfg, const std::string& dataset_digest) {
  const std::string config_digest = sha256_hex(dump_compact(config_to_json(cfg)));
  return cfg.task.task_id + "-" + sha256_hex(config_digest + ":" + dataset_digest).substr(0, 12);
}

namespace {

TemplateLibrary load_validated(const PipelineConfig& cfg) {
  TemplateLibrary lib(cfg.template_path());
  cfg.validate(lib);
  return lib;
}

std::vector<json> records(const auto& items, const auto& fn) {
  std::vector<json> out;
  for (const auto& item : items) out.push_back(fn(item));
  return out;
}

std::vector<ReportRow> canonical_rows(const std::vector<ReportRow>& rows) {
  std::set<ReportRow> seen(rows.begin(), rows.end());
  return {seen.begin(), seen.end()};
}

std::vector<MicroInstruction> read_instructions(const fs::path& path) {
  std::vector<MicroInstruction> out;
  for (const auto& j : read_jsonl(path)) out.push_back(j.get<MicroInstruction>());
  return out;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, Gateway& gateway, PipelineOptions options)
    : cfg_(std::move(cfg)),
      gateway_(gateway),
      options_(std::move(options)),
      templates_(load_validated(cfg_)),
      dataset_(load_dataset(cfg_.resolve_path(cfg_.dataset), cfg_.task)),
      store_(open_store(cfg_, dataset_, options_)) {
  for (const auto& w : store_.warnings()) say("warning: " + w);
}

RunStore Pipeline::open_store(const PipelineConfig& cfg, const Dataset& dataset, const PipelineOptions& options) {
  const std::string run_id = options.run_id.value_or(default_run_id(cfg, dataset.source_digest));
  const json config = config_to_json(cfg);
  const fs::path root = cfg.run_root_path();
  if (!RunStore::exists(root, run_id)) {
    return RunStore::init_run(root, {run_id, cfg.task.task_id, dataset.source_digest, cfg.dataset, config});
  }
  RunStore store = RunStore::resume(root, run_id);
  if (store.manifest().config_digest != sha256_hex(dump_compact(config)))
    throw Error(Errc::config_mismatch, "run " + run_id + " was created with a different configuration");
  if (store.manifest().dataset_digest != dataset.source_digest)
    throw Error(Errc::config_mismatch, "run " + run_id + " was created from a different dataset");
  return store;
}

void Pipeline::say(const std::string& line) const {
  if (options_.log) *options_.log << line << "\n";
}

void Pipeline::run_phase(Phase phase) {
  store_.require_upstream(phase);
  store_.begin_phase(phase);
  say("[" + std::string(to_string(phase)) + "] running");
  try {
    if (options_.before_phase) options_.before_phase(phase);
    switch (phase) {
      case Phase::extract: do_extract(); break;
      case Phase::cluster: do_cluster(); break;
      case Phase::synthesize: do_synthesize(); break;
      case Phase::resolve: do_resolve(); break;
      case Phase::evaluate: do_evaluate(); break;
    }
  } catch (const std::exception& e) {
    say("[" + std::string(to_string(phase)) + "] failed: " + e.what());
    store_.fail_phase(phase);
    throw;
  }
  store_.complete_phase(phase);
}

std::vector<Phase> Pipeline::run_all() {
  std::vector<Phase> executed;
  for (Phase p : kPhases) {
    if (store_.manifest().complete(p)) continue;
    run_phase(p);
    executed.push_back(p);
  }
  return executed;
}

void Pipeline::do_extract() {
  auto train = dataset_.split(Split::train);
  if (cfg_.extraction_limit && train.size() > *cfg_.extraction_limit) train.resize(*cfg_.extraction_limit);
  ExtractionOptions opt;
  opt.failure_ceiling = cfg_.extraction_failure_ceiling;
  opt.label_field = cfg_.task.label_field;
  const auto result = extract_all(train, templates_.get(cfg_.template_id("extract")),
                                  cfg_.effective_backend(cfg_.backends.teacher), gateway_, opt);

  const fs::path dir = store_.phase_dir(Phase::extract);
  write_file_atomic(dir / "instructions.jsonl",
                    to_jsonl(records(result.instructions, [](const MicroInstruction& mi) { return json(mi); })));
  write_file_atomic(dir / "failures.jsonl", to_jsonl(records(result.failures, [](const ExtractionFailure& f) {
                      return json{{"example_id", f.example_id},
                                  {"code", std::string(to_string(f.code))},
                                  {"message", f.message}};
                    })));
  say("[extract] " + std::to_string(result.instructions.size()) + " instructions, " +
      std::to_string(result.failures.size()) + " failures");
}

void Pipeline::do_cluster() {
  const auto instructions = read_instructions(store_.phase_dir(Phase::extract) / "instructions.jsonl");
  const auto result = cluster_instructions(instructions, cfg_.effective_backend(cfg_.backends.embedder),
                                           cfg_.clustering, gateway_);
  std::map<std::string, const MicroInstruction*> by_id;
  for (const auto& mi : instructions) by_id[mi.instruction_id] = &mi;

  const fs::path dir = store_.phase_dir(Phase::cluster);
  write_file_atomic(dir / "assignments.jsonl", to_jsonl(records(result.assignments, [](const ClusterAssignment& a) {
                      return json{{"instruction_id", a.instruction_id},
                                  {"cluster_id", a.is_noise() ? json("NOISE") : json(a.cluster_id)}};
                    })));
  write_file_atomic(dir / "clusters.jsonl", to_jsonl(records(result.clusters, [&](const Cluster& c) {
                      return json{{"cluster_id", c.cluster_id},
                                  {"size", c.member_ids.size()},
                                  {"label_histogram", c.label_histogram},
                                  {"medoid_id", c.medoid_id},
                                  {"medoid_rule", by_id.at(c.medoid_id)->executable_rule},
                                  {"member_ids", c.member_ids}};
                    })));
  say("[cluster] " + std::to_string(result.clusters.size()) + " clusters, " +
      std::to_string(result.noise_ids.size()) + " noise");
}

void Pipeline::do_synthesize() {
  const auto instructions = read_instructions(store_.phase_dir(Phase::extract) / "instructions.jsonl");
  std::vector<Cluster> clusters;
  for (const auto& j : read_jsonl(store_.phase_dir(Phase::cluster) / "clusters.jsonl")) {
    Cluster c;
    j.at("cluster_id").get_to(c.cluster_id);
    j.at("member_ids").get_to(c.member_ids);
    j.at("label_histogram").get_to(c.label_histogram);
    j.at("medoid_id").get_to(c.medoid_id);
    clusters.push_back(std::move(c));
  }
  InstructionSet set = synthesize_all(clusters, instructions, cfg_.effective_backend(cfg_.backends.synthesizer),
                                      templates_.get(cfg_.template_id("synthesize")), cfg_.task, gateway_);

  const fs::path dir = store_.phase_dir(Phase::synthesize);
  write_file_atomic(dir / "instruction_set.v0.jsonl", serialize_instruction_set(set));
  write_file_atomic(dir / "system_prompt.v0.txt",
                    render_system_prompt(set, cfg_.task, templates_.get(cfg_.template_id("system"))));
  say("[synthesize] " + std::to_string(set.rules.size()) + " rules");
}

void Pipeline::do_resolve() {
  const InstructionSet set0 =
      parse_instruction_set(read_file(store_.phase_dir(Phase::synthesize) / "instruction_set.v0.jsonl"));
  ResolutionConfig rc = cfg_.resolution;
  rc.seed = cfg_.seed;
  const ResolutionTemplates tmpl{&templates_.get(cfg_.template_id("system")),
                                 &templates_.get(cfg_.template_id("query")),
                                 &templates_.get(cfg_.template_id("resolve"))};
  const fs::path dir = store_.phase_dir(Phase::resolve);
  const auto train = dataset_.split(Split::train);
  const auto validation = dataset_.split(Split::validation);
  auto outcome = run_resolution_loop(train, validation, set0, cfg_.effective_backend(cfg_.backends.student),
                                     cfg_.effective_backend(cfg_.backends.resolver), rc, cfg_.task, tmpl, gateway_,
                                     dir);

  json summary = state_to_json(outcome.state);
  json rounds = summary["rounds"];
  summary.erase("rounds");
  summary["record"] = "summary";
  std::vector<json> lines{summary};
  for (auto& r : rounds) {
    r["record"] = "round";
    lines.push_back(r);
  }
  write_file_atomic(dir / "convergence.jsonl", to_jsonl(lines));
  write_file_atomic(dir / "instruction_set.final.jsonl", serialize_instruction_set(outcome.final_set));
  write_file_atomic(dir / "system_prompt.final.txt", render_system_prompt(outcome.final_set, cfg_.task, *tmpl.system));
  for (const auto& w : outcome.state.warnings) say("[resolve] warning: " + w);
  say("[resolve] stop=" + std::string(to_string(outcome.state.stop_reason)) + " best=v" +
      std::to_string(outcome.state.best_version) + " rounds=" + std::to_string(outcome.state.rounds.size()));
}

void Pipeline::do_evaluate() {
  const auto split = dataset_.split(cfg_.eval_split);
  const auto pool = dataset_.split(Split::train);
  const InstructionSet set0 =
      parse_instruction_set(read_file(store_.phase_dir(Phase::synthesize) / "instruction_set.v0.jsonl"));
  const InstructionSet final_set =
      parse_instruction_set(read_file(store_.phase_dir(Phase::resolve) / "instruction_set.final.jsonl"));
  const auto& system = templates_.get(cfg_.template_id("system"));
  const auto& baseline = templates_.get(cfg_.template_id("system_zero_shot"));
  const EvalTemplates tmpl{&templates_.get(cfg_.template_id("query")), &templates_.get(cfg_.template_id("few_shot"))};

  const fs::path dir = store_.phase_dir(Phase::evaluate);
  std::vector<ReportEntry> entries;
  std::vector<json> report_lines;
  std::vector<json> latency_lines;
  for (ReportRow row : canonical_rows(cfg_.regimes)) {
    EvalConfig ec;
    ec.k_shots = cfg_.k_shots;
    ec.seed = cfg_.seed;
    ec.student = cfg_.effective_backend(cfg_.backends.student);
    ec.max_output_tokens = cfg_.student_max_output_tokens;
    std::string prompt;
    std::optional<int> version;
    switch (row) {
      case ReportRow::zero_shot:
        ec.regime = Regime::zero_shot;
        prompt = render_baseline_system_prompt(cfg_.task, baseline);
        break;
      case ReportRow::few_shot:
        ec.regime = Regime::few_shot;
        prompt = render_baseline_system_prompt(cfg_.task, baseline);
        break;
      case ReportRow::clustered:
        ec.regime = Regime::pld;
        prompt = render_system_prompt(set0, cfg_.task, system);
        version = set0.version;
        break;
      case ReportRow::pld:
        ec.regime = Regime::pld;
        prompt = render_system_prompt(final_set, cfg_.task, system);
        version = final_set.version;
        break;
    }
    auto outcome = evaluate(split, prompt, ec, cfg_.task, tmpl, pool, gateway_);
    outcome.report.split = std::string(to_string(cfg_.eval_split));
    outcome.report.instruction_set_version = version;
    const std::string name(to_string(row));
    write_file_atomic(dir / ("predictions." + name + ".jsonl"),
                      to_jsonl(records(outcome.predictions, [](const Prediction& p) { return prediction_to_json(p); })));
    report_lines.push_back({{"row", name}, {"report", report_to_json(outcome.report)}});
    latency_lines.push_back({{"row", name},
                             {"mean_ms", outcome.latency.mean_ms},
                             {"p50_ms", outcome.latency.p50_ms},
                             {"p95_ms", outcome.latency.p95_ms}});
    entries.push_back({row, outcome.report});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", outcome.report.macro_f1);
    say("[evaluate] " + name + " macro-F1 " + buf);
  }
  write_file_atomic(dir / "reports.jsonl", to_jsonl(report_lines));
  write_file_atomic(dir / "latency.jsonl", to_jsonl(latency_lines));
  write_file_atomic(dir / "report.txt", render_report(entries, ReportFormat::text_table));
}

// ---------------------------------------------------------------------------

int exit_code(Errc code) {
  switch (code) {
    case Errc::malformed_record:
    case Errc::unknown_label:
    case Errc::duplicate_id:
    case Errc::missing_field:
    case Errc::invalid_schema:
    case Errc::invalid_backend:
    case Errc::unknown_template:
    case Errc::missing_placeholder_value:
    case Errc::invalid_params:
    case Errc::invalid_config:
    case Errc::config_mismatch:
    case Errc::run_exists:
    case Errc::run_locked:
    case Errc::corrupt_manifest:
      return 2;
    case Errc::transport_error:
    case Errc::rate_limited:
    case Errc::auth_missing:
    case Errc::empty_completion:
    case Errc::dimension_mismatch:
    case Errc::script_exhausted:
      return 4;
    default:
      return 3;
  }
}

std::vector<ReportEntry> load_reports(const fs::path& run_dir) {
  const fs::path path = run_dir / kReportsFile;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(Errc::no_reports, "no reports in " + run_dir.string());
  std::vector<ReportEntry> out;
  for (const auto& j : read_jsonl(path)) {
    auto row = parse_report_row(j.at("row").get<std::string>());
    if (!row) throw Error(Errc::malformed_record, "unknown report row " + j.at("row").dump());
    out.push_back({*row, report_from_json(j.at("report"))});
  }
  if (out.empty()) throw Error(Errc::no_reports, "no reports in " + run_dir.string());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
  return out;
}

std::string render_report(std::span<const ReportEntry> entries, ReportFormat format) {
  if (entries.empty()) throw Error(Errc::no_reports, "nothing to render");
  std::string out;
  if (format == ReportFormat::records) {
    for (const auto& e : entries) {
      json j{{"row", std::string(to_string(e.row))},
             {"method", std::string(display_name(e.row))},
             {"macro_f1", e.report.macro_f1},
             {"n", e.report.n},
             {"abstentions", e.report.abstentions},
             {"split", e.report.split},
             {"student_id", e.report.student_id},
             {"instruction_set_version",
              e.report.instruction_set_version ? json(*e.report.instruction_set_version) : json(nullptr)}};
      out += dump_compact(j) + "\n";
    }
    return out;
  }
  const std::string& split = entries.front().report.split;
  out += "Macro-F1 on the " + split + " split";
  if (split == "test") out += " (assumed evaluation split; override with eval.split)";
  out += "\n\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-26s %8s\n", "Method", "Macro-F1");
  out += line;
  out += std::string(26, '-') + " " + std::string(8, '-') + "\n";
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-26s %8.2f\n", std::string(display_name(e.row)).c_str(), e.report.macro_f1);
    out += line;
  }
  return out;
}

}  // namespace distill

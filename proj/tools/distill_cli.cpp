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

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "distill/config.hpp"
#include "distill/convert.hpp"
#include "distill/errors.hpp"
#include "distill/pipeline.hpp"

using namespace distill;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::string> run_id;
  std::optional<double> epsilon;
  std::optional<size_t> min_samples;
  std::optional<size_t> k_shots;
  std::optional<size_t> max_rounds;
  std::optional<size_t> limit;
  std::optional<std::string> regimes;
  std::optional<uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> run_root;
  std::optional<size_t> parallelism;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "Pipeline config file")->required()->check(CLI::ExistingFile);
  app->add_option("--run-id", a.run_id, "Run id (default: derived from config and dataset)");
  app->add_option("--epsilon", a.epsilon, "DBSCAN neighbourhood radius (cosine distance)");
  app->add_option("--min-samples", a.min_samples, "DBSCAN min_samples, counting the point itself");
  app->add_option("--k-shots", a.k_shots, "Exemplars for the few-shot baseline");
  app->add_option("--max-rounds", a.max_rounds, "Conflict resolution round limit");
  app->add_option("--limit", a.limit, "Extract from at most this many train examples");
  app->add_option("--regimes", a.regimes, "Comma list of zero_shot,few_shot,clustered,pld (pld always runs)");
  app->add_option("--seed", a.seed, "Seed for every sampling step");
  app->add_option("--dataset", a.dataset, "Dataset file (overrides the config)");
  app->add_option("--run-root", a.run_root, "Directory holding run directories");
  app->add_option("--parallelism", a.parallelism, "Concurrent backend requests");
}

PipelineConfig effective_config(const CommonArgs& a) {
  PipelineConfig cfg = load_config(a.config);
  ConfigOverrides o;
  o.epsilon = a.epsilon;
  o.min_samples = a.min_samples;
  o.k_shots = a.k_shots;
  o.max_rounds = a.max_rounds;
  o.extraction_limit = a.limit;
  if (a.regimes) o.regimes = parse_regime_list(*a.regimes);
  o.seed = a.seed;
  // Paths given on the command line are relative to the working directory.
  if (a.dataset) o.dataset = fs::absolute(*a.dataset).string();
  if (a.run_root) o.run_root = fs::absolute(*a.run_root).string();
  o.parallelism = a.parallelism;
  apply_overrides(cfg, o);
  return cfg;
}

int run_command(const CommonArgs& a, std::optional<Phase> only) {
  PipelineConfig cfg = effective_config(a);
  Gateway gateway(GatewayOptions{cfg.parallelism});
  Pipeline pipeline(std::move(cfg), gateway, PipelineOptions{a.run_id, &std::cerr, {}});
  std::cerr << "run: " << pipeline.store().manifest().run_id << " (" << pipeline.run_dir().string() << ")\n";
  if (only) {
    pipeline.run_phase(*only);
  } else {
    const auto executed = pipeline.run_all();
    if (executed.empty()) std::cerr << "all phases already complete\n";
    std::cout << render_report(load_reports(pipeline.run_dir()), ReportFormat::text_table);
  }
  std::cerr << "backend calls: " << gateway.total_backend_calls() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distill instruction sets from a teacher model into a student system prompt"};
  app.require_subcommand(1);

  std::string format, input, output, schema_out;
  uint64_t convert_seed = 0;
  auto* convert = app.add_subcommand("convert", "Convert a public dataset into the record format");
  convert->add_option("--format", format, "contract_nli or stereoset")
      ->required()
      ->check(CLI::IsMember({"contract_nli", "stereoset"}));
  convert->add_option("--input", input, "Contract-NLI directory or StereoSet dev.json")->required();
  convert->add_option("--output", output, "Dataset file to write")->required();
  convert->add_option("--schema-out", schema_out, "Also write the task schema as JSON");
  convert->add_option("--seed", convert_seed, "Split seed (StereoSet only)");

  CommonArgs args;
  std::map<CLI::App*, std::optional<Phase>> phase_commands;
  for (Phase p : kPhases) {
    auto* sub = app.add_subcommand(std::string(to_string(p)), "Run the " + std::string(to_string(p)) + " phase");
    add_common(sub, args);
    phase_commands[sub] = p;
  }
  auto* run = app.add_subcommand("run", "Run every incomplete phase in order and print the report");
  add_common(run, args);
  phase_commands[run] = std::nullopt;

  std::string report_run_id, report_root, report_config, report_format = "text_table";
  auto* report = app.add_subcommand("report", "Print the stored evaluation reports of a run");
  report->add_option("--run-id", report_run_id)->required();
  auto* root_opt = report->add_option("--run-root", report_root, "Directory holding run directories");
  report->add_option("--config", report_config, "Config file naming the run root")->excludes(root_opt);
  report->add_option("--format", report_format)->check(CLI::IsMember({"text_table", "records"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (convert->parsed()) {
      Dataset ds = format == "contract_nli" ? convert_contract_nli(input) : convert_stereoset(input, convert_seed);
      write_file_atomic(output, serialize_dataset(ds));
      if (!schema_out.empty()) write_file_atomic(schema_out, json(ds.schema).dump(2) + "\n");
      const auto c = split_counts(ds);
      std::cout << ds.schema.task_id << ": train " << c.train << ", validation " << c.validation << ", test "
                << c.test << "\n";
      return 0;
    }
    if (report->parsed()) {
      fs::path root = report_root;
      if (root.empty()) {
        if (report_config.empty()) throw Error(Errc::invalid_config, "report needs --run-root or --config");
        root = load_config(report_config).run_root_path();
      }
      const auto fmt = report_format == "records" ? ReportFormat::records : ReportFormat::text_table;
      std::cout << render_report(load_reports(root / report_run_id), fmt);
      return 0;
    }
    for (const auto& [sub, phase] : phase_commands)
      if (sub->parsed()) return run_command(args, phase);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

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

#include "distill/config.hpp"

#include <algorithm>
#include <set>

#include "distill/errors.hpp"
#include "distill/text.hpp"

#ifndef DISTILL_TEMPLATE_DIR
#define DISTILL_TEMPLATE_DIR "templates"
#endif

namespace distill {

std::string_view to_string(ReportRow row) {
  switch (row) {
    case ReportRow::zero_shot: return "zero_shot";
    case ReportRow::few_shot: return "few_shot";
    case ReportRow::clustered: return "clustered";
    case ReportRow::pld: return "pld";
  }
  return "pld";
}

std::string_view display_name(ReportRow row) {
  switch (row) {
    case ReportRow::zero_shot: return "Zero-shot";
    case ReportRow::few_shot: return "Few-shot";
    case ReportRow::clustered: return "Clustered Instructions";
    case ReportRow::pld: return "Post Conflict resolution";
  }
  return "";
}

std::optional<ReportRow> parse_report_row(std::string_view text) {
  for (ReportRow r : kReportRows)
    if (to_string(r) == text) return r;
  return std::nullopt;
}

std::string default_template_dir() { return DISTILL_TEMPLATE_DIR; }

namespace {

const std::map<std::string, std::string> kDefaultTemplateIds = {
    {"synthesize", "synthesize.v1"},     {"resolve", "resolve.v1"}, {"system", "system_prompt.v1"},
    {"system_zero_shot", "system_zero_shot.v1"}, {"query", "query.v1"},     {"few_shot", "few_shot.v1"}};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::invalid_config, where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw Error(Errc::invalid_config, "unknown key '" + k + "' in " + where);
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

fs::path PipelineConfig::resolve_path(const std::string& p) const {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

fs::path PipelineConfig::template_path() const {
  return template_dir ? resolve_path(*template_dir) : fs::path(default_template_dir());
}

std::string PipelineConfig::template_id(const std::string& slot) const {
  if (auto it = task.prompt_template_ids.find(slot); it != task.prompt_template_ids.end()) return it->second;
  if (auto it = kDefaultTemplateIds.find(slot); it != kDefaultTemplateIds.end()) return it->second;
  throw Error(Errc::invalid_config, "no template id for '" + slot + "'");
}

BackendConfig PipelineConfig::effective_backend(const BackendConfig& cfg) const {
  BackendConfig out = cfg;
  if (out.cache_dir) {
    out.cache_dir = resolve_path(out.cache_dir->string());
  } else {
    out.cache_dir = run_root_path() / ".cache" / out.backend_id;
  }
  return out;
}

void PipelineConfig::validate(const TemplateLibrary& library) const {
  try {
    task.validate();
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  for (const auto& [slot, _] : task.prompt_template_ids)
    if (std::find(kTemplateSlots.begin(), kTemplateSlots.end(), slot) == kTemplateSlots.end())
      throw Error(Errc::invalid_config, "unknown template slot '" + slot + "'");

  std::set<std::string> extract_keys(task.input_fields.begin(), task.input_fields.end());
  extract_keys.insert("gold_label");
  extract_keys.insert(task.label_field);
  const std::map<std::string, std::set<std::string>> allowed = {
      {"extract", extract_keys},
      {"synthesize", {"raw_instructions"}},
      {"resolve", {"label_list", "rules_json", "failure_exhibits", "success_exhibits"}},
      {"system", {"task_id", "label_list", "rules"}},
      {"system_zero_shot", {"task_id", "label_list"}},
      {"query", {"inputs"}},
      {"few_shot", {"exemplars", "inputs"}}};
  for (const auto& slot : kTemplateSlots) {
    const std::string id = template_id(slot);
    if (!library.contains(id)) throw Error(Errc::unknown_template, slot + " template '" + id + "' not found");
    for (const auto& name : library.get(id).required_placeholders)
      if (!allowed.at(slot).count(name))
        throw Error(Errc::invalid_config, "template '" + id + "' uses unknown placeholder {" + name + "}");
  }

  auto check = [](const BackendConfig& b, const char* role, bool chat) {
    b.validate();
    if (chat != b.is_chat())
      throw Error(Errc::invalid_backend,
                  std::string(role) + " backend must be " + (chat ? "a chat" : "an embedding") + " backend");
  };
  check(backends.teacher, "teacher", true);
  check(backends.synthesizer, "synthesizer", true);
  check(backends.resolver, "resolver", true);
  check(backends.student, "student", true);
  check(backends.embedder, "embedder", false);

  clustering.validate();
  try {
    resolution.validate();
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  if (k_shots < 1) throw Error(Errc::invalid_config, "k_shots must be >= 1");
  if (regimes.empty()) throw Error(Errc::invalid_config, "at least one regime is required");
  if (eval_split == Split::train) throw Error(Errc::invalid_config, "evaluation split cannot be train");
  if (student_max_output_tokens < 1) throw Error(Errc::invalid_config, "student max_output_tokens must be >= 1");
  if (extraction_limit && *extraction_limit == 0) throw Error(Errc::invalid_config, "extraction_limit must be >= 1");
  if (!(extraction_failure_ceiling >= 0 && extraction_failure_ceiling <= 1))
    throw Error(Errc::invalid_config, "extraction failure ceiling must be in [0, 1]");
  if (parallelism < 1) throw Error(Errc::invalid_config, "parallelism must be >= 1");
  if (dataset.empty()) throw Error(Errc::invalid_config, "no dataset path");
}

void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& o) {
  if (o.epsilon) cfg.clustering.epsilon = *o.epsilon;
  if (o.min_samples) cfg.clustering.min_samples = *o.min_samples;
  if (o.k_shots) cfg.k_shots = *o.k_shots;
  if (o.max_rounds) cfg.resolution.max_rounds = *o.max_rounds;
  if (o.extraction_limit) cfg.extraction_limit = *o.extraction_limit;
  if (o.regimes) {
    cfg.regimes = *o.regimes;
    if (std::find(cfg.regimes.begin(), cfg.regimes.end(), ReportRow::pld) == cfg.regimes.end())
      cfg.regimes.push_back(ReportRow::pld);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.dataset) cfg.dataset = *o.dataset;
  if (o.run_root) cfg.run_root = *o.run_root;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
}

std::vector<ReportRow> parse_regime_list(std::string_view text) {
  std::vector<ReportRow> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string item(trim(text.substr(start, end - start)));
    if (!item.empty()) {
      auto row = parse_report_row(item);
      if (!row) throw Error(Errc::invalid_config, "unknown regime '" + item + "'");
      out.push_back(*row);
    }
    start = end + 1;
  }
  return out;
}

json config_to_json(const PipelineConfig& cfg) {
  json regimes = json::array();
  for (ReportRow r : cfg.regimes) regimes.push_back(std::string(to_string(r)));
  json j{{"task", cfg.task},
         {"dataset", cfg.dataset},
         {"backends",
          {{"teacher", backend_to_json(cfg.backends.teacher)},
           {"synthesizer", backend_to_json(cfg.backends.synthesizer)},
           {"resolver", backend_to_json(cfg.backends.resolver)},
           {"student", backend_to_json(cfg.backends.student)},
           {"embedder", backend_to_json(cfg.backends.embedder)}}},
         {"clustering", {{"epsilon", cfg.clustering.epsilon}, {"min_samples", cfg.clustering.min_samples}}},
         {"resolution",
          {{"max_rounds", cfg.resolution.max_rounds},
           {"min_improvement", cfg.resolution.min_improvement},
           {"n_failures", cfg.resolution.n_failures},
           {"n_successes", cfg.resolution.n_successes}}},
         {"eval",
          {{"k_shots", cfg.k_shots},
           {"regimes", regimes},
           {"split", std::string(to_string(cfg.eval_split))},
           {"max_output_tokens", cfg.student_max_output_tokens}}},
         {"limits",
          {{"extraction_limit", cfg.extraction_limit ? json(*cfg.extraction_limit) : json(nullptr)},
           {"train_eval_cap", cfg.resolution.train_eval_cap},
           {"extraction_failure_ceiling", cfg.extraction_failure_ceiling}}},
         {"seed", cfg.seed},
         {"run_root", cfg.run_root},
         {"parallelism", cfg.parallelism}};
  if (cfg.template_dir) j["template_dir"] = *cfg.template_dir;
  return j;
}

PipelineConfig config_from_json(const json& j, fs::path base_dir) {
  PipelineConfig cfg;
  cfg.base_dir = std::move(base_dir);
  try {
    reject_unknown(j,
                   {"task", "dataset", "template_dir", "backends", "clustering", "resolution", "eval", "limits",
                    "seed", "run_root", "parallelism"},
                   "config");
    reject_unknown(j.at("task"), {"task_id", "input_fields", "label_set", "label_field", "prompt_template_ids"},
                   "task");
    cfg.task = j.at("task").get<TaskSchema>();
    maybe(j, "dataset", cfg.dataset);
    if (auto it = j.find("template_dir"); it != j.end() && !it->is_null()) cfg.template_dir = it->get<std::string>();

    const json& b = j.at("backends");
    reject_unknown(b, {"teacher", "synthesizer", "resolver", "student", "embedder"}, "backends");
    auto backend = [&](const char* role) {
      if (!b.contains(role)) throw Error(Errc::invalid_config, std::string("missing backend '") + role + "'");
      return backend_from_json(b.at(role));
    };
    cfg.backends = {backend("teacher"), backend("synthesizer"), backend("resolver"), backend("student"),
                    backend("embedder")};

    if (auto it = j.find("clustering"); it != j.end()) {
      reject_unknown(*it, {"epsilon", "min_samples"}, "clustering");
      maybe(*it, "epsilon", cfg.clustering.epsilon);
      maybe(*it, "min_samples", cfg.clustering.min_samples);
    }
    if (auto it = j.find("resolution"); it != j.end()) {
      reject_unknown(*it, {"max_rounds", "min_improvement", "n_failures", "n_successes"}, "resolution");
      maybe(*it, "max_rounds", cfg.resolution.max_rounds);
      maybe(*it, "min_improvement", cfg.resolution.min_improvement);
      maybe(*it, "n_failures", cfg.resolution.n_failures);
      maybe(*it, "n_successes", cfg.resolution.n_successes);
    }
    if (auto it = j.find("eval"); it != j.end()) {
      reject_unknown(*it, {"k_shots", "regimes", "split", "max_output_tokens"}, "eval");
      maybe(*it, "k_shots", cfg.k_shots);
      maybe(*it, "max_output_tokens", cfg.student_max_output_tokens);
      if (auto r = it->find("regimes"); r != it->end()) {
        cfg.regimes.clear();
        for (const auto& name : *r) {
          auto row = parse_report_row(name.get<std::string>());
          if (!row) throw Error(Errc::invalid_config, "unknown regime '" + name.get<std::string>() + "'");
          cfg.regimes.push_back(*row);
        }
      }
      if (auto s = it->find("split"); s != it->end()) {
        auto split = parse_split(s->get<std::string>());
        if (!split) throw Error(Errc::invalid_config, "unknown split '" + s->get<std::string>() + "'");
        cfg.eval_split = *split;
      }
    }
    if (auto it = j.find("limits"); it != j.end()) {
      reject_unknown(*it, {"extraction_limit", "train_eval_cap", "extraction_failure_ceiling"}, "limits");
      if (auto l = it->find("extraction_limit"); l != it->end() && !l->is_null())
        cfg.extraction_limit = l->get<size_t>();
      maybe(*it, "train_eval_cap", cfg.resolution.train_eval_cap);
      maybe(*it, "extraction_failure_ceiling", cfg.extraction_failure_ceiling);
    }
    maybe(j, "seed", cfg.seed);
    maybe(j, "run_root", cfg.run_root);
    maybe(j, "parallelism", cfg.parallelism);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

}  // namespace distill

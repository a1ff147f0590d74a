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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "distill/io.hpp"

namespace distill {

enum class Phase { extract, cluster, synthesize, resolve, evaluate };
enum class PhaseStatus { pending, complete, failed };

inline constexpr std::array<Phase, 5> kPhases = {Phase::extract, Phase::cluster, Phase::synthesize,
                                                 Phase::resolve, Phase::evaluate};

std::string_view to_string(Phase phase);
std::string_view to_string(PhaseStatus status);
std::optional<Phase> parse_phase(std::string_view text);
std::optional<PhaseStatus> parse_phase_status(std::string_view text);

/// The phase itself plus everything after it in the chain.
std::vector<Phase> downstream_closure(Phase phase);

struct RunManifest {
  std::string run_id;
  std::string task_id;
  std::string dataset_digest;
  std::string dataset_path;
  std::string config_digest;
  json config;  // effective configuration, overrides applied
  std::map<Phase, PhaseStatus> phase_status;
  // Keys are "<phase>/<relative path>"; values are paths relative to the run directory.
  std::map<std::string, std::string> artifact_paths;
  std::map<std::string, std::string> artifact_digests;
  std::string created_at;

  bool complete(Phase phase) const;
};

json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const json& j);

/// Exclusive writer lock on a run directory. A lock left behind by a dead
/// process is taken over.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir);
  ~RunLock();
  RunLock(RunLock&& other) noexcept;
  RunLock& operator=(RunLock&&) = delete;
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

struct RunIdentity {
  std::string run_id;
  std::string task_id;
  std::string dataset_digest;
  std::string dataset_path;
  json config;
};

class RunStore {
 public:
  static constexpr std::string_view kManifestFile = "manifest.json";
  static constexpr std::string_view kConfigFile = "config.json";

  /// Creates <root>/<run_id> with every phase pending. Throws RunExists if the
  /// directory is already there.
  static RunStore init_run(const fs::path& root, const RunIdentity& identity);

  /// Opens an existing run and re-verifies every recorded artifact. Phases with
  /// a missing or altered artifact fall back to pending together with all
  /// phases after them.
  static RunStore resume(const fs::path& root, const std::string& run_id);

  static bool exists(const fs::path& root, const std::string& run_id);

  const RunManifest& manifest() const { return manifest_; }
  const fs::path& dir() const { return dir_; }
  fs::path phase_dir(Phase phase) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Throws PhaseNotReady unless every upstream phase is complete.
  void require_upstream(Phase phase) const;

  /// Clears the phase directory and marks the phase and its downstream pending.
  void begin_phase(Phase phase);

  /// Digests every file under the phase directory and marks the phase complete.
  void complete_phase(Phase phase);

  void fail_phase(Phase phase);

 private:
  RunStore(fs::path dir, RunManifest manifest, RunLock lock);
  void save() const;
  void drop_artifacts(Phase phase);

  fs::path dir_;
  RunManifest manifest_;
  RunLock lock_;
  std::vector<std::string> warnings_;
};

}  // namespace distill

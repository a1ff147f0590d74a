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

#include "distill/runstore.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <ctime>

#include "distill/digest.hpp"
#include "distill/errors.hpp"

namespace distill {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::extract: return "extract";
    case Phase::cluster: return "cluster";
    case Phase::synthesize: return "synthesize";
    case Phase::resolve: return "resolve";
    case Phase::evaluate: return "evaluate";
  }
  return "extract";
}

std::string_view to_string(PhaseStatus status) {
  switch (status) {
    case PhaseStatus::pending: return "pending";
    case PhaseStatus::complete: return "complete";
    case PhaseStatus::failed: return "failed";
  }
  return "pending";
}

std::optional<Phase> parse_phase(std::string_view text) {
  for (Phase p : kPhases)
    if (to_string(p) == text) return p;
  return std::nullopt;
}

std::optional<PhaseStatus> parse_phase_status(std::string_view text) {
  for (PhaseStatus s : {PhaseStatus::pending, PhaseStatus::complete, PhaseStatus::failed})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

std::vector<Phase> downstream_closure(Phase phase) {
  std::vector<Phase> out;
  for (Phase p : kPhases)
    if (p >= phase) out.push_back(p);
  return out;
}

bool RunManifest::complete(Phase phase) const {
  auto it = phase_status.find(phase);
  return it != phase_status.end() && it->second == PhaseStatus::complete;
}

json manifest_to_json(const RunManifest& m) {
  json status = json::object();
  for (const auto& [p, s] : m.phase_status) status[std::string(to_string(p))] = std::string(to_string(s));
  return json{{"run_id", m.run_id},
              {"task_id", m.task_id},
              {"dataset_digest", m.dataset_digest},
              {"dataset_path", m.dataset_path},
              {"config_digest", m.config_digest},
              {"config", m.config},
              {"phase_status", status},
              {"artifact_paths", m.artifact_paths},
              {"artifact_digests", m.artifact_digests},
              {"created_at", m.created_at}};
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    j.at("run_id").get_to(m.run_id);
    j.at("task_id").get_to(m.task_id);
    j.at("dataset_digest").get_to(m.dataset_digest);
    j.at("dataset_path").get_to(m.dataset_path);
    j.at("config_digest").get_to(m.config_digest);
    m.config = j.at("config");
    for (const auto& [k, v] : j.at("phase_status").items()) {
      auto p = parse_phase(k);
      auto s = parse_phase_status(v.get<std::string>());
      if (!p || !s) throw Error(Errc::corrupt_manifest, "bad phase status " + k);
      m.phase_status[*p] = *s;
    }
    for (Phase p : kPhases)
      if (!m.phase_status.count(p)) throw Error(Errc::corrupt_manifest, "missing phase " + std::string(to_string(p)));
    j.at("artifact_paths").get_to(m.artifact_paths);
    j.at("artifact_digests").get_to(m.artifact_digests);
    j.at("created_at").get_to(m.created_at);
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt_manifest, e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

bool process_alive(pid_t pid) {
  if (pid <= 0) return false;
  return ::kill(pid, 0) == 0 || errno == EPERM;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  for (int attempt = 0; attempt < 2; ++attempt) {
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid());
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST) throw Error(Errc::io_error, "cannot create " + path_.string());
    pid_t holder = 0;
    try {
      holder = static_cast<pid_t>(std::stol(read_file(path_)));
    } catch (...) {
    }
    if (holder == ::getpid() || process_alive(holder))
      throw Error(Errc::run_locked, run_dir.string() + " held by pid " + std::to_string(holder));
    std::error_code ec;
    fs::remove(path_, ec);
  }
  throw Error(Errc::run_locked, run_dir.string());
}

RunLock::RunLock(RunLock&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

RunLock::~RunLock() {
  if (path_.empty()) return;
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------

RunStore::RunStore(fs::path dir, RunManifest manifest, RunLock lock)
    : dir_(std::move(dir)), manifest_(std::move(manifest)), lock_(std::move(lock)) {}

bool RunStore::exists(const fs::path& root, const std::string& run_id) {
  std::error_code ec;
  return fs::exists(root / run_id, ec);
}

RunStore RunStore::init_run(const fs::path& root, const RunIdentity& id) {
  if (id.run_id.empty() || id.run_id.find('/') != std::string::npos || id.run_id == "." || id.run_id == "..")
    throw Error(Errc::invalid_config, "bad run id '" + id.run_id + "'");
  const fs::path dir = root / id.run_id;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + root.string() + ": " + ec.message());
  if (!fs::create_directory(dir, ec)) {
    if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
    throw Error(Errc::run_exists, dir.string());
  }

  RunManifest m;
  m.run_id = id.run_id;
  m.task_id = id.task_id;
  m.dataset_digest = id.dataset_digest;
  m.dataset_path = id.dataset_path;
  m.config = id.config;
  m.config_digest = sha256_hex(dump_compact(id.config));
  for (Phase p : kPhases) m.phase_status[p] = PhaseStatus::pending;
  m.created_at = utc_now();

  RunStore store(dir, std::move(m), RunLock(dir));
  write_file_atomic(dir / kConfigFile, id.config.dump(2) + "\n");
  store.save();
  return store;
}

RunStore RunStore::resume(const fs::path& root, const std::string& run_id) {
  const fs::path dir = root / run_id;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::io_error, "no run directory " + dir.string());
  RunLock lock(dir);

  RunManifest m;
  try {
    m = manifest_from_json(json::parse(read_file(dir / kManifestFile)));
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt_manifest, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::corrupt_manifest) throw;
    throw Error(Errc::corrupt_manifest, e.what());
  }
  if (m.run_id != run_id) throw Error(Errc::corrupt_manifest, "manifest names run " + m.run_id);

  RunStore store(dir, std::move(m), std::move(lock));
  auto& man = store.manifest_;

  std::optional<Phase> first_bad;
  auto flag = [&](Phase p) {
    if (!first_bad || p < *first_bad) first_bad = p;
  };
  for (const auto& [key, rel] : man.artifact_paths) {
    auto phase = parse_phase(key.substr(0, key.find('/')));
    if (!phase) throw Error(Errc::corrupt_manifest, "artifact key " + key);
    if (!man.complete(*phase)) continue;
    const fs::path path = dir / rel;
    auto digest = man.artifact_digests.find(key);
    if (!fs::exists(path, ec)) {
      store.warnings_.push_back("missing artifact " + rel);
      flag(*phase);
    } else if (digest == man.artifact_digests.end() || sha256_file(path) != digest->second) {
      store.warnings_.push_back("digest mismatch for " + rel);
      flag(*phase);
    }
  }
  // A phase can only stay complete if everything upstream is complete.
  for (Phase p : kPhases) {
    if (!man.complete(p)) {
      if (p != Phase::evaluate) flag(static_cast<Phase>(static_cast<int>(p) + 1));
      break;
    }
  }
  if (first_bad) {
    bool changed = false;
    for (Phase p : downstream_closure(*first_bad)) {
      if (man.phase_status[p] == PhaseStatus::complete) {
        store.warnings_.push_back("phase " + std::string(to_string(p)) + " downgraded to pending");
        man.phase_status[p] = PhaseStatus::pending;
        changed = true;
      }
    }
    if (changed) store.save();
  }
  return store;
}

fs::path RunStore::phase_dir(Phase phase) const { return dir_ / std::string(to_string(phase)); }

void RunStore::require_upstream(Phase phase) const {
  for (Phase p : kPhases) {
    if (p >= phase) break;
    if (!manifest_.complete(p))
      throw Error(Errc::phase_not_ready,
                  std::string(to_string(phase)) + " needs " + std::string(to_string(p)) + " to be complete");
  }
}

void RunStore::drop_artifacts(Phase phase) {
  const std::string prefix = std::string(to_string(phase)) + "/";
  for (auto it = manifest_.artifact_paths.begin(); it != manifest_.artifact_paths.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      manifest_.artifact_digests.erase(it->first);
      it = manifest_.artifact_paths.erase(it);
    } else {
      ++it;
    }
  }
}

void RunStore::begin_phase(Phase phase) {
  require_upstream(phase);
  for (Phase p : downstream_closure(phase)) {
    manifest_.phase_status[p] = PhaseStatus::pending;
    drop_artifacts(p);
  }
  std::error_code ec;
  fs::remove_all(phase_dir(phase), ec);
  fs::create_directories(phase_dir(phase), ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + phase_dir(phase).string());
  save();
}

void RunStore::complete_phase(Phase phase) {
  drop_artifacts(phase);
  const std::string name(to_string(phase));
  std::error_code ec;
  if (fs::is_directory(phase_dir(phase), ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(phase_dir(phase)))
      if (entry.is_regular_file()) files.push_back(entry.path());
    for (const auto& f : files) {
      const std::string rel = fs::relative(f, dir_).generic_string();
      const std::string key = name + "/" + fs::relative(f, phase_dir(phase)).generic_string();
      manifest_.artifact_paths[key] = rel;
      manifest_.artifact_digests[key] = sha256_file(f);
    }
  }
  manifest_.phase_status[phase] = PhaseStatus::complete;
  save();
}

void RunStore::fail_phase(Phase phase) {
  manifest_.phase_status[phase] = PhaseStatus::failed;
  save();
}

void RunStore::save() const {
  write_file_atomic(dir_ / kManifestFile, manifest_to_json(manifest_).dump(2) + "\n");
}

}  // namespace distill

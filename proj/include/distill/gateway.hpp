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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "distill/io.hpp"

namespace distill {

enum class BackendRole { teacher, synthesizer, resolver, student };
enum class BackendKind { http_chat, http_embed, scripted_chat, hash_embed };

std::string_view to_string(BackendRole role);
std::string_view to_string(BackendKind kind);
std::optional<BackendRole> parse_role(std::string_view text);
std::optional<BackendKind> parse_kind(std::string_view text);

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  BackendRole role = BackendRole::teacher;

  void validate() const;
};

struct ChatResponse {
  std::string text;
  size_t prompt_token_count = 0;
  size_t output_token_count = 0;
  std::string backend_id;
  bool cached = false;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_text_digest;
};

/// Scripted backends answer with the response of the first entry whose
/// matcher accepts the request. Matchers test user_text (substring or full
/// text); an optional system_contains narrows the entry to requests whose
/// system prompt carries the given substring, which is how mock students
/// "follow" rules present in their system prompt.
struct ScriptMatcher {
  enum class Mode { substring, full_text };
  Mode mode = Mode::substring;
  std::string pattern;
  std::optional<std::string> system_contains;

  bool matches(const ChatRequest& req) const;
};

struct ScriptEntry {
  ScriptMatcher matcher;
  std::string response;
};

using Script = std::vector<ScriptEntry>;

/// hash_embed anchors: texts starting with `prefix` embed near basis vector
/// `axis` (plus seeded jitter), giving tests controllable semantic bundles.
struct EmbedAnchor {
  std::string prefix;
  size_t axis = 0;
};

struct BackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::scripted_chat;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> model_name;
  std::optional<std::string> auth_env_var;
  int max_retries = 3;
  int requests_per_minute = 0;  // 0 = unlimited
  std::optional<fs::path> cache_dir;
  /// Unset: cache for teacher/synthesizer/resolver, not for student.
  std::optional<bool> cache;
  int timeout_ms = 120000;
  int backoff_base_ms = 500;
  int backoff_max_ms = 30000;
  /// Opaque provider parameters merged into the request body (e.g. a
  /// thinking-mode switch). Part of the cache key when non-empty.
  json extra_params = json::object();

  // embedding backends
  size_t dimension = 0;
  size_t batch_size = 64;

  // scripted_chat
  std::shared_ptr<const Script> script;

  // hash_embed
  std::vector<EmbedAnchor> anchors;
  double anchor_jitter = 0.05;

  bool is_chat() const {
    return kind == BackendKind::http_chat || kind == BackendKind::scripted_chat;
  }
  bool is_embed() const {
    return kind == BackendKind::http_embed || kind == BackendKind::hash_embed;
  }

  /// Throws Error(invalid_backend).
  void validate() const;
};

BackendConfig backend_from_json(const json& j);
json backend_to_json(const BackendConfig& cfg);

BackendConfig scripted_chat_backend(Script script, std::string backend_id = "scripted");
BackendConfig hash_embed_backend(size_t dimension, std::string backend_id = "hash-embed");

/// Cache key: digest over backend id, model, both texts, temperature, the
/// output-token cap and (when non-empty) extra_params.
std::string chat_cache_key(const ChatRequest& req, const BackendConfig& cfg);

struct GatewayOptions {
  size_t parallelism = 4;
};

struct BackendStats {
  size_t backend_calls = 0;  // requests that reached a backend (mock or network)
  size_t cache_hits = 0;
  size_t retries = 0;
};

/// Shared access point for all model traffic. Thread-safe: any number of
/// workers may call complete()/embed_batch() concurrently; the gateway bounds
/// in-flight backend calls to `parallelism` and applies a token bucket per
/// backend_id.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ChatResponse complete(const ChatRequest& req, const BackendConfig& cfg);
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                           const BackendConfig& cfg);

  /// Runs fn(0..n-1) on up to `parallelism` workers. Rethrows the first
  /// exception after all workers finish.
  void parallel_for(size_t n, const std::function<void(size_t)>& fn);

  std::map<std::string, BackendStats> stats() const;
  size_t total_backend_calls() const;
  size_t parallelism() const { return options_.parallelism; }

 private:
  class Slot;
  struct Bucket;

  void acquire_rate(const BackendConfig& cfg);
  void record(const std::string& backend_id, const std::function<void(BackendStats&)>& fn);
  std::string call_chat_backend(const ChatRequest& req, const BackendConfig& cfg);
  std::vector<std::vector<double>> call_embed_backend(const std::vector<std::string>& texts,
                                                      const BackendConfig& cfg);
  std::string post_with_retry(const BackendConfig& cfg, const json& body);

  GatewayOptions options_;
  mutable std::mutex stats_mu_;
  std::map<std::string, BackendStats> stats_;
  std::mutex slot_mu_;
  std::condition_variable slot_cv_;
  size_t in_flight_ = 0;
  std::mutex bucket_mu_;
  std::map<std::string, std::unique_ptr<Bucket>> buckets_;
};

/// Deterministic unit vector for `text` (see EmbedAnchor).
std::vector<double> hash_embedding(std::string_view text, const BackendConfig& cfg);

}  // namespace distill

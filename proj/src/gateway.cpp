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

#include "distill/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include "httplib.h"

#include "distill/digest.hpp"
#include "distill/errors.hpp"
#include "distill/random.hpp"
#include "distill/text.hpp"

namespace distill {

std::string_view to_string(BackendRole role) {
  switch (role) {
    case BackendRole::teacher: return "teacher";
    case BackendRole::synthesizer: return "synthesizer";
    case BackendRole::resolver: return "resolver";
    case BackendRole::student: return "student";
  }
  return "teacher";
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http_chat: return "http_chat";
    case BackendKind::http_embed: return "http_embed";
    case BackendKind::scripted_chat: return "scripted_chat";
    case BackendKind::hash_embed: return "hash_embed";
  }
  return "scripted_chat";
}

std::optional<BackendRole> parse_role(std::string_view text) {
  for (auto r : {BackendRole::teacher, BackendRole::synthesizer, BackendRole::resolver,
                 BackendRole::student})
    if (to_string(r) == text) return r;
  return std::nullopt;
}

std::optional<BackendKind> parse_kind(std::string_view text) {
  for (auto k : {BackendKind::http_chat, BackendKind::http_embed, BackendKind::scripted_chat,
                 BackendKind::hash_embed})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

void ChatRequest::validate() const {
  if (system_text.empty() && user_text.empty())
    throw Error(Errc::invalid_backend, "chat request has no text");
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0)
    throw Error(Errc::invalid_backend, "temperature must be finite and in [0, 2]");
  if (max_output_tokens <= 0) throw Error(Errc::invalid_backend, "max_output_tokens must be > 0");
}

bool ScriptMatcher::matches(const ChatRequest& req) const {
  if (system_contains && req.system_text.find(*system_contains) == std::string::npos)
    return false;
  if (mode == Mode::full_text) return req.user_text == pattern;
  return req.user_text.find(pattern) != std::string::npos;
}

void BackendConfig::validate() const {
  auto bad = [&](const std::string& why) {
    throw Error(Errc::invalid_backend, (backend_id.empty() ? "<unnamed>" : backend_id) + ": " + why);
  };
  if (backend_id.empty()) bad("backend_id is empty");
  const bool http = kind == BackendKind::http_chat || kind == BackendKind::http_embed;
  if (http) {
    if (!endpoint_url || endpoint_url->empty()) bad("http backends require endpoint_url");
    if (!model_name || model_name->empty()) bad("http backends require model_name");
  } else {
    if (endpoint_url || model_name || auth_env_var)
      bad("mock backends take no endpoint_url, model_name or auth_env_var");
  }
  if (kind == BackendKind::scripted_chat && !script) bad("scripted_chat requires a script");
  if (kind == BackendKind::hash_embed && dimension == 0) bad("hash_embed requires dimension > 0");
  for (const auto& a : anchors)
    if (a.axis >= dimension) bad("anchor axis out of range");
  if (max_retries < 0) bad("max_retries must be >= 0");
  if (requests_per_minute < 0) bad("requests_per_minute must be >= 0");
  if (timeout_ms <= 0) bad("timeout_ms must be > 0");
  if (backoff_base_ms < 0 || backoff_max_ms < 0) bad("backoff delays must be >= 0");
  if (batch_size == 0) bad("batch_size must be > 0");
  if (!extra_params.is_object()) bad("extra_params must be an object");
  if (!std::isfinite(anchor_jitter) || anchor_jitter < 0) bad("anchor_jitter must be >= 0");
}

namespace {

const std::set<std::string> kBackendKeys = {
    "backend_id", "kind",          "endpoint_url",    "model_name",     "auth_env_var",
    "max_retries", "requests_per_minute", "cache_dir", "cache",         "timeout_ms",
    "backoff_base_ms", "backoff_max_ms", "extra_params", "dimension",    "batch_size",
    "script",     "anchors",       "anchor_jitter"};

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

template <typename T>
void maybe_get(const json& j, const char* key, std::optional<T>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

BackendConfig backend_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_backend, "backend entry is not an object");
  for (const auto& [key, _] : j.items())
    if (!kBackendKeys.count(key)) throw Error(Errc::invalid_backend, "unknown backend key '" + key + "'");

  BackendConfig cfg;
  try {
    maybe_get(j, "backend_id", cfg.backend_id);
    auto kind = parse_kind(j.value("kind", std::string{}));
    if (!kind) throw Error(Errc::invalid_backend, cfg.backend_id + ": unknown kind");
    cfg.kind = *kind;
    maybe_get(j, "endpoint_url", cfg.endpoint_url);
    maybe_get(j, "model_name", cfg.model_name);
    maybe_get(j, "auth_env_var", cfg.auth_env_var);
    maybe_get(j, "max_retries", cfg.max_retries);
    maybe_get(j, "requests_per_minute", cfg.requests_per_minute);
    if (auto it = j.find("cache_dir"); it != j.end() && !it->is_null())
      cfg.cache_dir = fs::path(it->get<std::string>());
    maybe_get(j, "cache", cfg.cache);
    maybe_get(j, "timeout_ms", cfg.timeout_ms);
    maybe_get(j, "backoff_base_ms", cfg.backoff_base_ms);
    maybe_get(j, "backoff_max_ms", cfg.backoff_max_ms);
    maybe_get(j, "extra_params", cfg.extra_params);
    maybe_get(j, "dimension", cfg.dimension);
    maybe_get(j, "batch_size", cfg.batch_size);
    maybe_get(j, "anchor_jitter", cfg.anchor_jitter);
    if (auto it = j.find("anchors"); it != j.end()) {
      for (const auto& a : *it) cfg.anchors.push_back({a.at("prefix"), a.at("axis")});
    }
    if (auto it = j.find("script"); it != j.end()) {
      Script script;
      for (const auto& e : *it) {
        ScriptEntry entry;
        if (e.contains("user_equals")) {
          entry.matcher.mode = ScriptMatcher::Mode::full_text;
          entry.matcher.pattern = e.at("user_equals").get<std::string>();
        } else {
          entry.matcher.pattern = e.value("user_contains", std::string{});
        }
        if (e.contains("system_contains"))
          entry.matcher.system_contains = e.at("system_contains").get<std::string>();
        entry.response = e.at("respond").get<std::string>();
        script.push_back(std::move(entry));
      }
      cfg.script = std::make_shared<const Script>(std::move(script));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_backend, cfg.backend_id + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

json backend_to_json(const BackendConfig& cfg) {
  json j{{"backend_id", cfg.backend_id},
         {"kind", std::string(to_string(cfg.kind))},
         {"max_retries", cfg.max_retries},
         {"requests_per_minute", cfg.requests_per_minute},
         {"timeout_ms", cfg.timeout_ms},
         {"backoff_base_ms", cfg.backoff_base_ms},
         {"backoff_max_ms", cfg.backoff_max_ms},
         {"extra_params", cfg.extra_params}};
  if (cfg.endpoint_url) j["endpoint_url"] = *cfg.endpoint_url;
  if (cfg.model_name) j["model_name"] = *cfg.model_name;
  if (cfg.auth_env_var) j["auth_env_var"] = *cfg.auth_env_var;
  if (cfg.cache_dir) j["cache_dir"] = cfg.cache_dir->string();
  if (cfg.cache) j["cache"] = *cfg.cache;
  if (cfg.is_embed()) {
    j["dimension"] = cfg.dimension;
    j["batch_size"] = cfg.batch_size;
  }
  if (cfg.kind == BackendKind::hash_embed) {
    j["anchor_jitter"] = cfg.anchor_jitter;
    json anchors = json::array();
    for (const auto& a : cfg.anchors) anchors.push_back({{"prefix", a.prefix}, {"axis", a.axis}});
    j["anchors"] = anchors;
  }
  if (cfg.script) {
    json script = json::array();
    for (const auto& e : *cfg.script) {
      json entry;
      if (e.matcher.mode == ScriptMatcher::Mode::full_text)
        entry["user_equals"] = e.matcher.pattern;
      else
        entry["user_contains"] = e.matcher.pattern;
      if (e.matcher.system_contains) entry["system_contains"] = *e.matcher.system_contains;
      entry["respond"] = e.response;
      script.push_back(std::move(entry));
    }
    j["script"] = script;
  }
  return j;
}

BackendConfig scripted_chat_backend(Script script, std::string backend_id) {
  BackendConfig cfg;
  cfg.backend_id = std::move(backend_id);
  cfg.kind = BackendKind::scripted_chat;
  cfg.script = std::make_shared<const Script>(std::move(script));
  cfg.validate();
  return cfg;
}

BackendConfig hash_embed_backend(size_t dimension, std::string backend_id) {
  BackendConfig cfg;
  cfg.backend_id = std::move(backend_id);
  cfg.kind = BackendKind::hash_embed;
  cfg.dimension = dimension;
  cfg.validate();
  return cfg;
}

std::string chat_cache_key(const ChatRequest& req, const BackendConfig& cfg) {
  json key{{"backend_id", cfg.backend_id},
           {"model_name", cfg.model_name.value_or("")},
           {"system_text", req.system_text},
           {"user_text", req.user_text},
           {"temperature", req.temperature},
           {"max_output_tokens", req.max_output_tokens}};
  if (!cfg.extra_params.empty()) key["extra_params"] = cfg.extra_params;
  return sha256_hex(dump_compact(key));
}

std::vector<double> hash_embedding(std::string_view text, const BackendConfig& cfg) {
  const std::string digest = sha256_hex(text);
  std::mt19937_64 rng(std::stoull(digest.substr(0, 16), nullptr, 16));
  std::vector<double> v(cfg.dimension);
  double norm = 0;
  for (auto& x : v) {
    x = 2.0 * uniform_unit(rng) - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;

  for (const auto& a : cfg.anchors) {
    if (text.substr(0, a.prefix.size()) != a.prefix) continue;
    for (auto& x : v) x *= cfg.anchor_jitter;
    v[a.axis] += 1.0;
    norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    break;
  }
  return v;
}

// ---------------------------------------------------------------------------

class Gateway::Slot {
 public:
  explicit Slot(Gateway& g) : g_(g) {
    std::unique_lock lock(g_.slot_mu_);
    g_.slot_cv_.wait(lock, [&] { return g_.in_flight_ < std::max<size_t>(1, g_.options_.parallelism); });
    ++g_.in_flight_;
  }
  ~Slot() {
    {
      std::lock_guard lock(g_.slot_mu_);
      --g_.in_flight_;
    }
    g_.slot_cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  Gateway& g_;
};

struct Gateway::Bucket {
  std::mutex mu;
  double tokens = 0;
  double capacity = 1;
  double per_second = 1;
  std::chrono::steady_clock::time_point last;
};

Gateway::Gateway(GatewayOptions options) : options_(options) {}
Gateway::~Gateway() = default;

void Gateway::record(const std::string& backend_id,
                     const std::function<void(BackendStats&)>& fn) {
  std::lock_guard lock(stats_mu_);
  fn(stats_[backend_id]);
}

std::map<std::string, BackendStats> Gateway::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

size_t Gateway::total_backend_calls() const {
  std::lock_guard lock(stats_mu_);
  size_t n = 0;
  for (const auto& [_, s] : stats_) n += s.backend_calls;
  return n;
}

void Gateway::acquire_rate(const BackendConfig& cfg) {
  if (cfg.requests_per_minute <= 0) return;
  Bucket* bucket = nullptr;
  {
    std::lock_guard lock(bucket_mu_);
    auto& slot = buckets_[cfg.backend_id];
    if (!slot) {
      slot = std::make_unique<Bucket>();
      slot->per_second = cfg.requests_per_minute / 60.0;
      slot->capacity = std::max(1.0, slot->per_second);
      slot->tokens = slot->capacity;
      slot->last = std::chrono::steady_clock::now();
    }
    bucket = slot.get();
  }
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(bucket->mu);
      auto now = std::chrono::steady_clock::now();
      std::chrono::duration<double> elapsed = now - bucket->last;
      bucket->last = now;
      bucket->tokens = std::min(bucket->capacity, bucket->tokens + elapsed.count() * bucket->per_second);
      if (bucket->tokens >= 1.0) {
        bucket->tokens -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - bucket->tokens) / bucket->per_second);
    }
    std::this_thread::sleep_for(wait);
  }
}

void Gateway::parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  const size_t workers = std::min(n, std::max<size_t>(1, options_.parallelism));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::invalid_backend, "bad endpoint_url " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

json synthetic_payload(const std::string& text, const ChatRequest& req) {
  return json{{"choices", json::array({json{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", text}}}}})},
              {"usage",
               {{"prompt_tokens", count_words(req.system_text) + count_words(req.user_text)},
                {"completion_tokens", count_words(text)}}}};
}

ChatResponse parse_chat_payload(const std::string& payload, const BackendConfig& cfg) {
  json doc = json::parse(payload, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::transport_error, cfg.backend_id + ": response is not JSON");
  ChatResponse out;
  out.backend_id = cfg.backend_id;
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) out.text = content.get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::transport_error, cfg.backend_id + ": response has no choices[0].message.content");
  }
  if (trim(out.text).empty()) throw Error(Errc::empty_completion, cfg.backend_id);
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    out.prompt_token_count = usage->value("prompt_tokens", size_t{0});
    out.output_token_count = usage->value("completion_tokens", size_t{0});
  } else {
    out.output_token_count = count_words(out.text);
  }
  return out;
}

std::optional<double> parse_retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return std::nullopt;
  const auto value = res.get_header_value("Retry-After");
  char* end = nullptr;
  double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || !std::isfinite(seconds) || seconds < 0) return std::nullopt;
  return seconds;
}

}  // namespace

std::string Gateway::post_with_retry(const BackendConfig& cfg, const json& body) {
  const auto url = split_url(*cfg.endpoint_url);
  httplib::Headers headers;
  if (cfg.auth_env_var) {
    const char* key = std::getenv(cfg.auth_env_var->c_str());
    if (!key || !*key) throw Error(Errc::auth_missing, *cfg.auth_env_var);
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const std::string payload = dump_compact(body);
  for (int attempt = 0;; ++attempt) {
    acquire_rate(cfg);
    httplib::Result res = [&] {
      Slot slot(*this);
      record(cfg.backend_id, [](BackendStats& s) { ++s.backend_calls; });
      return client.Post(url.path, headers, payload, "application/json");
    }();
    if (res && res->status >= 200 && res->status < 300) return res->body;

    std::string why;
    bool retryable = true;
    std::optional<double> retry_after;
    int status = 0;
    if (!res) {
      why = httplib::to_string(res.error());
    } else {
      status = res->status;
      why = "HTTP " + std::to_string(status);
      retryable = status == 429 || status >= 500;
      retry_after = parse_retry_after(*res);
      if (!retryable) why += ": " + res->body.substr(0, 200);
    }
    if (!retryable) throw Error(Errc::transport_error, cfg.backend_id + ": " + why);
    if (attempt >= cfg.max_retries) {
      if (status == 429)
        throw Error(Errc::rate_limited,
                    cfg.backend_id + ": retry-after=" +
                        (retry_after ? std::to_string(*retry_after) + "s" : std::string("unknown")));
      throw Error(Errc::transport_error, cfg.backend_id + ": after " + std::to_string(attempt + 1) +
                                             " attempts: " + why);
    }
    long long delay_ms = std::min<long long>(cfg.backoff_max_ms,
                                             static_cast<long long>(cfg.backoff_base_ms) << std::min(attempt, 20));
    if (retry_after)
      delay_ms = std::max(delay_ms, std::min<long long>(cfg.backoff_max_ms,
                                                        static_cast<long long>(*retry_after * 1000)));
    record(cfg.backend_id, [](BackendStats& s) { ++s.retries; });
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
  }
}

std::string Gateway::call_chat_backend(const ChatRequest& req, const BackendConfig& cfg) {
  if (cfg.kind == BackendKind::scripted_chat) {
    Slot slot(*this);
    record(cfg.backend_id, [](BackendStats& s) { ++s.backend_calls; });
    for (const auto& entry : *cfg.script)
      if (entry.matcher.matches(req)) return dump_compact(synthetic_payload(entry.response, req));
    throw Error(Errc::script_exhausted, cfg.backend_id + ": request " +
                                            sha256_hex(req.system_text + '\0' + req.user_text).substr(0, 16));
  }
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  if (!req.user_text.empty()) messages.push_back({{"role", "user"}, {"content", req.user_text}});
  json body{{"model", *cfg.model_name},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_output_tokens}};
  for (const auto& [k, v] : cfg.extra_params.items()) body[k] = v;
  return post_with_retry(cfg, body);
}

ChatResponse Gateway::complete(const ChatRequest& req, const BackendConfig& cfg) {
  req.validate();
  if (!cfg.is_chat()) throw Error(Errc::invalid_backend, cfg.backend_id + " is not a chat backend");

  const bool use_cache = cfg.cache_dir && cfg.cache.value_or(req.role != BackendRole::student);
  fs::path cache_path;
  if (use_cache) {
    cache_path = *cfg.cache_dir / (chat_cache_key(req, cfg) + ".json");
    std::error_code ec;
    if (fs::exists(cache_path, ec)) {
      ChatResponse hit = parse_chat_payload(read_file(cache_path), cfg);
      hit.cached = true;
      record(cfg.backend_id, [](BackendStats& s) { ++s.cache_hits; });
      return hit;
    }
  }

  const std::string payload = call_chat_backend(req, cfg);
  ChatResponse out = parse_chat_payload(payload, cfg);
  if (use_cache) write_file_atomic(cache_path, payload);
  return out;
}

std::vector<std::vector<double>> Gateway::call_embed_backend(const std::vector<std::string>& texts,
                                                             const BackendConfig& cfg) {
  if (cfg.kind == BackendKind::hash_embed) {
    Slot slot(*this);
    record(cfg.backend_id, [](BackendStats& s) { ++s.backend_calls; });
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t, cfg));
    return out;
  }
  json body{{"model", *cfg.model_name}, {"input", texts}};
  for (const auto& [k, v] : cfg.extra_params.items()) body[k] = v;
  json doc = json::parse(post_with_retry(cfg, body), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::transport_error, cfg.backend_id + ": response is not JSON");

  std::vector<std::vector<double>> out(texts.size());
  try {
    if (doc.contains("data")) {
      const auto& data = doc.at("data");
      if (data.size() != texts.size())
        throw Error(Errc::transport_error, cfg.backend_id + ": expected " + std::to_string(texts.size()) +
                                               " embeddings, got " + std::to_string(data.size()));
      for (size_t i = 0; i < data.size(); ++i) {
        const auto& item = data[i];
        if (item.is_array()) {
          out[i] = item.get<std::vector<double>>();
        } else {
          size_t index = item.value("index", i);
          if (index >= out.size()) throw Error(Errc::transport_error, cfg.backend_id + ": bad index");
          out[index] = item.at("embedding").get<std::vector<double>>();
        }
      }
    } else {
      const auto& data = doc.at("embeddings");
      if (data.size() != texts.size())
        throw Error(Errc::transport_error, cfg.backend_id + ": embedding count mismatch");
      for (size_t i = 0; i < data.size(); ++i) out[i] = data[i].get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::transport_error, cfg.backend_id + ": malformed embedding response: " + e.what());
  }
  return out;
}

std::vector<EmbeddingVector> Gateway::embed_batch(const std::vector<std::string>& texts,
                                                  const BackendConfig& cfg) {
  if (!cfg.is_embed()) throw Error(Errc::invalid_backend, cfg.backend_id + " is not an embedding backend");
  if (texts.empty()) throw Error(Errc::invalid_backend, "embed_batch needs at least one text");

  const bool use_cache = cfg.kind == BackendKind::http_embed && cfg.cache_dir && cfg.cache.value_or(true);
  std::vector<std::optional<std::vector<double>>> values(texts.size());
  std::vector<fs::path> cache_paths(texts.size());
  std::vector<size_t> pending;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (use_cache) {
      json key{{"backend_id", cfg.backend_id}, {"model_name", cfg.model_name.value_or("")},
               {"embed", texts[i]}};
      if (!cfg.extra_params.empty()) key["extra_params"] = cfg.extra_params;
      cache_paths[i] = *cfg.cache_dir / ("embed-" + sha256_hex(dump_compact(key)) + ".json");
      std::error_code ec;
      if (fs::exists(cache_paths[i], ec)) {
        values[i] = json::parse(read_file(cache_paths[i])).get<std::vector<double>>();
        record(cfg.backend_id, [](BackendStats& s) { ++s.cache_hits; });
        continue;
      }
    }
    pending.push_back(i);
  }

  const size_t batches = (pending.size() + cfg.batch_size - 1) / cfg.batch_size;
  parallel_for(batches, [&](size_t b) {
    const size_t lo = b * cfg.batch_size;
    const size_t hi = std::min(pending.size(), lo + cfg.batch_size);
    std::vector<std::string> chunk;
    for (size_t p = lo; p < hi; ++p) chunk.push_back(texts[pending[p]]);
    auto vectors = call_embed_backend(chunk, cfg);
    for (size_t p = lo; p < hi; ++p) {
      const size_t i = pending[p];
      values[i] = std::move(vectors[p - lo]);
      if (use_cache) write_file_atomic(cache_paths[i], dump_compact(json(*values[i])));
    }
  });

  const size_t expected = cfg.dimension ? cfg.dimension : values.front()->size();
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    auto& v = *values[i];
    if (v.size() != expected)
      throw Error(Errc::dimension_mismatch, "expected " + std::to_string(expected) + ", got " +
                                                std::to_string(v.size()));
    for (double x : v)
      if (!std::isfinite(x)) throw Error(Errc::transport_error, cfg.backend_id + ": non-finite embedding value");
    out.push_back({std::move(v), sha256_hex(texts[i])});
  }
  return out;
}

}  // namespace distill

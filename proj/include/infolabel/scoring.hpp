// Copyright 2026 The infolabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "infolabel/trace.hpp"

namespace infolabel {

// Per-token log-probabilities are floored here so that a zero-probability
// token cannot turn an information value into -inf.
inline constexpr double kLogprobFloor = -100.0;

struct ScoringRequest {
  std::string context;
  std::string continuation;
};

struct TokenLogprobs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // natural log, one per token
  std::string backend_id;

  double total() const;
};

// Checks |tokens| = |logprobs| >= 1 and no NaN, then clamps every logprob
// into [kLogprobFloor, 0]. Throws Error(kProtocol) on violations.
TokenLogprobs sanitize(TokenLogprobs raw);

nlohmann::json to_json(const TokenLogprobs& t);
TokenLogprobs token_logprobs_from_json(const nlohmann::json& j);

// Anything that can score a continuation under a context.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  // Stable identity used in cache keys.
  virtual std::string id() const = 0;
  virtual TokenLogprobs score(const ScoringRequest& request) = 0;
};

// Deterministic stand-in for a language model. The table maps a context key
// (context followed by the continuation emitted so far) to next-token
// probabilities. Tokenization is greedy longest match against the tokens
// listed for the current key; anything else is consumed one UTF-8 code point
// at a time with fallback_prob.
class ReferenceModel final : public ScoringBackend {
 public:
  ReferenceModel(std::map<std::string, std::map<std::string, double>> table,
                 double fallback_prob);
  // The call counter restarts at the moved-from value.
  ReferenceModel(ReferenceModel&& other) noexcept
      : generations(std::move(other.generations)),
        table_(std::move(other.table_)),
        fallback_prob_(other.fallback_prob_),
        id_(std::move(other.id_)),
        calls_(other.calls_.load()) {}

  static ReferenceModel from_json(const nlohmann::json& j);
  static ReferenceModel load(const std::filesystem::path& path);

  std::string id() const override { return id_; }
  TokenLogprobs score(const ScoringRequest& request) override;

  // Probability of `token` right after `key`, fallback when unlisted.
  double probability(const std::string& key, std::string_view token) const;
  double fallback_prob() const { return fallback_prob_; }
  const std::map<std::string, std::map<std::string, double>>& table() const {
    return table_;
  }
  std::uint64_t calls() const { return calls_.load(); }

  // Optional canned generations for /v1/generate, keyed by prompt.
  std::map<std::string, std::vector<std::string>> generations;

 private:
  std::map<std::string, std::map<std::string, double>> table_;
  double fallback_prob_;
  std::string id_;
  std::atomic<std::uint64_t> calls_{0};
};

struct HttpOptions {
  int max_retries = 3;
  int backoff_ms = 100;  // doubled after each failed attempt
  double timeout_s = 30.0;
};

// JSON-over-HTTP backend: POST /v1/score and POST /v1/generate.
class HttpBackend final : public ScoringBackend {
 public:
  explicit HttpBackend(std::string base_url, HttpOptions options = {});

  std::string id() const override { return "http:" + base_url_; }
  TokenLogprobs score(const ScoringRequest& request) override;

  // Sampling pass-through; returns config.samples_per_problem texts.
  std::vector<std::string> generate(std::string_view prompt,
                                    const GenerationConfig& config);

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  std::string base_url_;
  HttpOptions options_;
};

// Builds a backend from "reference:<fixture path>" or an http(s) URL.
std::shared_ptr<ScoringBackend> make_backend(const std::string& spec,
                                             const HttpOptions& options = {});

// Serves a ReferenceModel over the scoring wire protocol. Used by tests and
// by `infolabel serve-reference`.
class ReferenceServer {
 public:
  explicit ReferenceServer(std::shared_ptr<ReferenceModel> model);
  ~ReferenceServer();
  ReferenceServer(const ReferenceServer&) = delete;
  ReferenceServer& operator=(const ReferenceServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks the calling thread.
  void serve_forever(const std::string& host, int port);
  void stop();
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Content-addressed, append-only record store: one JSON file per key under
// <dir>/records/<first two hex digits>/<key>.json, plus an in-memory index.
// Records are written once (temp file + rename) and never modified.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path dir);

  static std::string key_for(std::string_view backend_id,
                             const ScoringRequest& request);

  std::optional<TokenLogprobs> lookup(const std::string& key) const;
  void store(const std::string& key, const ScoringRequest& request,
             const TokenLogprobs& value);
  std::size_t size() const;

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, TokenLogprobs> index_;
};

struct ScorerStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;

  double hit_rate() const {
    return requests == 0 ? 1.0 : static_cast<double>(cache_hits) / requests;
  }
};

// Backend plus optional cache.
class Scorer {
 public:
  Scorer(std::shared_ptr<ScoringBackend> backend,
         std::shared_ptr<ScoreCache> cache = nullptr);

  // Throws Error(kPrecondition) on an empty continuation.
  TokenLogprobs score_continuation(const ScoringRequest& request);

  ScorerStats stats() const;
  const std::string& backend_id() const { return backend_id_; }

 private:
  std::shared_ptr<ScoringBackend> backend_;
  std::shared_ptr<ScoreCache> cache_;
  std::string backend_id_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
};

// question, then each step on its own line. With no steps this is the
// question alone, so row i's context is a strict prefix of row i+1's.
std::string build_context(std::string_view question,
                          std::span<const std::string> steps_prefix);

// I_i(answer): summed log-likelihood of the answer given the question and
// the step prefix, in nats.
double information(const Problem& problem,
                   std::span<const std::string> steps_prefix,
                   std::string_view answer, Scorer& scorer);

struct InformationProfile {
  std::string problem_id;
  std::string trace_id;
  std::vector<std::string> answers;
  // values[i][j] = I_i(answers[j]); row 0 is the question-only baseline.
  std::vector<std::vector<double>> values;

  std::size_t num_steps() const { return values.empty() ? 0 : values.size() - 1; }
  // Column of `answer`, if it was scored.
  std::optional<std::size_t> column(std::string_view answer) const;
};

// Issues (N + 1) * |answers| scorings, up to `concurrency` at a time, and
// places results by index so completion order does not matter.
InformationProfile information_profile(const Problem& problem,
                                       const ReasoningTrace& trace,
                                       const std::vector<std::string>& answers,
                                       Scorer& scorer,
                                       std::size_t concurrency = 1);

nlohmann::json to_json(const InformationProfile& profile);
InformationProfile profile_from_json(const nlohmann::json& j);

}  // namespace infolabel

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


#include "infolabel/scoring.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "infolabel/error.hpp"
#include "infolabel/util.hpp"

namespace infolabel {

namespace fs = std::filesystem;

double TokenLogprobs::total() const {
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return sum;
}

TokenLogprobs sanitize(TokenLogprobs raw) {
  if (raw.tokens.empty() || raw.tokens.size() != raw.logprobs.size()) {
    throw Error(ErrorKind::kProtocol,
                "token/logprob length mismatch or empty scoring result");
  }
  for (double& lp : raw.logprobs) {
    if (std::isnan(lp)) throw Error(ErrorKind::kProtocol, "NaN logprob");
    lp = std::clamp(lp, kLogprobFloor, 0.0);
  }
  return raw;
}

nlohmann::json to_json(const TokenLogprobs& t) {
  return nlohmann::json{
      {"tokens", t.tokens}, {"logprobs", t.logprobs}, {"backend_id", t.backend_id}};
}

TokenLogprobs token_logprobs_from_json(const nlohmann::json& j) {
  TokenLogprobs t;
  try {
    t.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& v : j.at("logprobs")) {
      // -inf travels as null in JSON.
      t.logprobs.push_back(v.is_null() ? -std::numeric_limits<double>::infinity()
                                       : v.get<double>());
    }
    t.backend_id = j.value("backend_id", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed scoring response: ") + e.what());
  }
  return sanitize(std::move(t));
}

// ---------------------------------------------------------------------------
// Reference model

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

}  // namespace

ReferenceModel::ReferenceModel(
    std::map<std::string, std::map<std::string, double>> table,
    double fallback_prob)
    : table_(std::move(table)), fallback_prob_(fallback_prob) {
  if (!(fallback_prob_ > 0.0 && fallback_prob_ < 1.0)) {
    throw Error(ErrorKind::kConfig, "fallback_prob must be in (0, 1)");
  }
  for (const auto& [key, dist] : table_) {
    double sum = 0.0;
    for (const auto& [token, p] : dist) {
      if (token.empty()) {
        throw Error(ErrorKind::kConfig, "empty token in reference table");
      }
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::kConfig, "probability outside [0, 1] in reference table");
      }
      sum += p;
    }
    if (sum > 1.0 + 1e-9) {
      throw Error(ErrorKind::kConfig,
                  "reference table probabilities sum above 1 for a context");
    }
  }
  nlohmann::json canon{{"table", table_}, {"fallback_prob", fallback_prob_}};
  id_ = "reference:" + sha256_hex(canon.dump()).substr(0, 16);
}

ReferenceModel ReferenceModel::from_json(const nlohmann::json& j) {
  try {
    ReferenceModel model(
        j.at("table").get<std::map<std::string, std::map<std::string, double>>>(),
        j.at("fallback_prob").get<double>());
    if (j.contains("generations")) {
      model.generations =
          j.at("generations").get<std::map<std::string, std::vector<std::string>>>();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("bad reference model: ") + e.what());
  }
}

ReferenceModel ReferenceModel::load(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return from_json(j);
}

double ReferenceModel::probability(const std::string& key,
                                   std::string_view token) const {
  auto it = table_.find(key);
  if (it != table_.end()) {
    auto t = it->second.find(std::string(token));
    if (t != it->second.end()) return t->second;
  }
  return fallback_prob_;
}

TokenLogprobs ReferenceModel::score(const ScoringRequest& request) {
  calls_.fetch_add(1);
  TokenLogprobs out;
  out.backend_id = id_;
  std::string key = request.context;
  std::string_view rest = request.continuation;
  while (!rest.empty()) {
    std::string token;
    double p = fallback_prob_;
    if (auto it = table_.find(key); it != table_.end()) {
      for (const auto& [candidate, prob] : it->second) {
        if (candidate.size() > token.size() && rest.substr(0, candidate.size()) == candidate) {
          token = candidate;
          p = prob;
        }
      }
    }
    if (token.empty()) {
      token = std::string(rest.substr(0, std::min(rest.size(),
                                                  utf8_length(static_cast<unsigned char>(rest[0])))));
      p = fallback_prob_;
    }
    out.tokens.push_back(token);
    out.logprobs.push_back(std::log(p));
    key += token;
    rest.remove_prefix(token.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(std::string base_url, HttpOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

nlohmann::json HttpBackend::post(const std::string& path,
                                 const nlohmann::json& body) {
  httplib::Client client(base_url_);
  if (!client.is_valid()) {
    throw Error(ErrorKind::kConfig, "invalid backend url " + base_url_);
  }
  const auto timeout = std::chrono::duration<double>(options_.timeout_s);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  const std::string payload = body.dump();
  std::string last_error;
  int backoff = options_.backoff_ms;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorKind::kProtocol, base_url_ + path + " returned HTTP " +
                                            std::to_string(res->status) + ": " +
                                            res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kProtocol,
                  base_url_ + path + " returned malformed JSON: " + e.what());
    }
  }
  throw Error(ErrorKind::kBackend, "backend " + base_url_ + " unreachable after " +
                                       std::to_string(options_.max_retries + 1) +
                                       " attempts: " + last_error);
}

TokenLogprobs HttpBackend::score(const ScoringRequest& request) {
  nlohmann::json response = post(
      "/v1/score",
      {{"context", request.context}, {"continuation", request.continuation}});
  TokenLogprobs t = token_logprobs_from_json(response);
  if (t.backend_id.empty()) t.backend_id = id();
  return t;
}

std::vector<std::string> HttpBackend::generate(std::string_view prompt,
                                               const GenerationConfig& config) {
  config.check();
  nlohmann::json response = post("/v1/generate", {{"prompt", prompt},
                                                  {"temperature", config.temperature},
                                                  {"top_p", config.top_p},
                                                  {"n", config.samples_per_problem}});
  try {
    auto texts = response.at("texts").get<std::vector<std::string>>();
    if (texts.size() != static_cast<std::size_t>(config.samples_per_problem)) {
      throw Error(ErrorKind::kProtocol, "generate returned " +
                                            std::to_string(texts.size()) +
                                            " texts, expected " +
                                            std::to_string(config.samples_per_problem));
    }
    return texts;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed generate response: ") + e.what());
  }
}

std::shared_ptr<ScoringBackend> make_backend(const std::string& spec,
                                             const HttpOptions& options) {
  constexpr std::string_view kReference = "reference:";
  if (spec.rfind(kReference, 0) == 0) {
    return std::make_shared<ReferenceModel>(
        ReferenceModel::load(spec.substr(kReference.size())));
  }
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_shared<HttpBackend>(spec, options);
  }
  throw Error(ErrorKind::kConfig, "unsupported backend '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Reference server

struct ReferenceServer::Impl {
  std::shared_ptr<ReferenceModel> model;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
};

ReferenceServer::ReferenceServer(std::shared_ptr<ReferenceModel> model)
    : impl_(std::make_unique<Impl>()) {
  impl_->model = std::move(model);
  auto json_reply = [](httplib::Response& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  };
  impl_->server.Post("/v1/score", [this, json_reply](const httplib::Request& req,
                                                     httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      ScoringRequest r{body.at("context").get<std::string>(),
                       body.at("continuation").get<std::string>()};
      if (r.continuation.empty()) {
        json_reply(res, 400, {{"error", "empty continuation"}});
        return;
      }
      TokenLogprobs t = impl_->model->score(r);
      nlohmann::json out = to_json(t);
      json_reply(res, 200, out);
    } catch (const std::exception& e) {
      json_reply(res, 400, {{"error", e.what()}});
    }
  });
  impl_->server.Post("/v1/generate", [this, json_reply](const httplib::Request& req,
                                                        httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body.at("prompt").get<std::string>();
      const int n = body.value("n", 1);
      auto it = impl_->model->generations.find(prompt);
      if (it == impl_->model->generations.end() || it->second.empty()) {
        json_reply(res, 404, {{"error", "no canned generations for prompt"}});
        return;
      }
      std::vector<std::string> texts;
      for (int i = 0; i < n; ++i) {
        texts.push_back(it->second[static_cast<std::size_t>(i) % it->second.size()]);
      }
      json_reply(res, 200, {{"texts", texts}});
    } catch (const std::exception& e) {
      json_reply(res, 400, {{"error", e.what()}});
    }
  });
}

ReferenceServer::~ReferenceServer() { stop(); }

int ReferenceServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port < 0) {
    throw Error(ErrorKind::kResource, "cannot bind reference server");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void ReferenceServer::serve_forever(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::kResource, "cannot listen on " + host + ":" +
                                          std::to_string(port));
  }
}

void ReferenceServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string ReferenceServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

// ---------------------------------------------------------------------------
// Cache

ScoreCache::ScoreCache(fs::path dir) : dir_(std::move(dir)) {
  const fs::path records = dir_ / "records";
  fs::create_directories(records);
  for (const auto& entry : fs::recursive_directory_iterator(records)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      auto j = nlohmann::json::parse(read_file(entry.path()));
      index_.emplace(j.at("key").get<std::string>(),
                     token_logprobs_from_json(j.at("value")));
    } catch (const std::exception& e) {
      // A torn or foreign file is ignored; it will be rewritten on demand.
      std::clog << "cache: skipping unreadable record " << entry.path() << ": "
                << e.what() << "\n";
    }
  }
}

std::string ScoreCache::key_for(std::string_view backend_id,
                                const ScoringRequest& request) {
  std::string material;
  material.reserve(backend_id.size() + request.context.size() +
                   request.continuation.size() + 2);
  material += backend_id;
  material.push_back('\0');
  material += request.context;
  material.push_back('\0');
  material += request.continuation;
  return sha256_hex(material);
}

std::optional<TokenLogprobs> ScoreCache::lookup(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::store(const std::string& key, const ScoringRequest& request,
                       const TokenLogprobs& value) {
  std::unique_lock lock(mu_);
  if (index_.count(key)) return;
  nlohmann::json record{{"key", key},
                        {"continuation", request.continuation},
                        {"context_sha256", sha256_hex(request.context)},
                        {"value", to_json(value)}};
  write_file_atomic(dir_ / "records" / key.substr(0, 2) / (key + ".json"),
                    record.dump() + "\n");
  index_.emplace(key, value);
}

std::size_t ScoreCache::size() const {
  std::shared_lock lock(mu_);
  return index_.size();
}

// ---------------------------------------------------------------------------
// Scorer

Scorer::Scorer(std::shared_ptr<ScoringBackend> backend,
               std::shared_ptr<ScoreCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {
  if (!backend_) throw Error(ErrorKind::kConfig, "no scoring backend");
  backend_id_ = backend_->id();
}

TokenLogprobs Scorer::score_continuation(const ScoringRequest& request) {
  if (request.continuation.empty()) {
    throw Error(ErrorKind::kPrecondition, "empty continuation");
  }
  requests_.fetch_add(1);
  std::string key;
  if (cache_) {
    key = ScoreCache::key_for(backend_id_, request);
    if (auto hit = cache_->lookup(key)) {
      hits_.fetch_add(1);
      return *hit;
    }
  }
  backend_calls_.fetch_add(1);
  TokenLogprobs result = sanitize(backend_->score(request));
  if (result.backend_id.empty()) result.backend_id = backend_id_;
  if (cache_) cache_->store(key, request, result);
  return result;
}

ScorerStats Scorer::stats() const {
  return {requests_.load(), hits_.load(), backend_calls_.load()};
}

// ---------------------------------------------------------------------------
// Information

std::string build_context(std::string_view question,
                          std::span<const std::string> steps_prefix) {
  std::string context(question);
  for (const std::string& step : steps_prefix) {
    context.push_back('\n');
    context += step;
  }
  return context;
}

double information(const Problem& problem,
                   std::span<const std::string> steps_prefix,
                   std::string_view answer, Scorer& scorer) {
  ScoringRequest request{build_context(problem.question, steps_prefix),
                         std::string(answer)};
  return scorer.score_continuation(request).total();
}

std::optional<std::size_t> InformationProfile::column(std::string_view answer) const {
  for (std::size_t j = 0; j < answers.size(); ++j) {
    if (answers[j] == answer) return j;
  }
  return std::nullopt;
}

InformationProfile information_profile(const Problem& problem,
                                       const ReasoningTrace& trace,
                                       const std::vector<std::string>& answers,
                                       Scorer& scorer, std::size_t concurrency) {
  if (answers.empty()) {
    throw Error(ErrorKind::kPrecondition, "information_profile needs answers");
  }
  if (trace.steps.empty()) {
    throw Error(ErrorKind::kPrecondition, "information_profile needs >= 1 step");
  }
  const std::size_t rows = trace.steps.size() + 1;
  const std::size_t cols = answers.size();
  InformationProfile profile;
  profile.problem_id = trace.problem_id;
  profile.trace_id = trace.trace_id;
  profile.answers = answers;
  std::vector<double> flat(rows * cols, 0.0);
  std::vector<std::string> contexts(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    contexts[i] = build_context(
        problem.question, std::span<const std::string>(trace.steps.data(), i));
  }
  parallel_for(rows * cols, concurrency, [&](std::size_t cell) {
    const std::size_t i = cell / cols;
    const std::size_t j = cell % cols;
    flat[cell] = scorer.score_continuation({contexts[i], answers[j]}).total();
  });
  profile.values.assign(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) profile.values[i][j] = flat[i * cols + j];
  }
  return profile;
}

nlohmann::json to_json(const InformationProfile& profile) {
  return nlohmann::json{{"problem_id", profile.problem_id},
                        {"trace_id", profile.trace_id},
                        {"answers", profile.answers},
                        {"values", profile.values}};
}

InformationProfile profile_from_json(const nlohmann::json& j) {
  InformationProfile p;
  try {
    p.problem_id = j.at("problem_id").get<std::string>();
    p.trace_id = j.at("trace_id").get<std::string>();
    p.answers = j.at("answers").get<std::vector<std::string>>();
    p.values = j.at("values").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad profile record: ") + e.what());
  }
  for (const auto& row : p.values) {
    if (row.size() != p.answers.size()) {
      throw Error(ErrorKind::kData, "profile row width mismatch for " + p.trace_id);
    }
  }
  return p;
}

}  // namespace infolabel

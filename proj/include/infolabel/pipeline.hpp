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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "infolabel/error.hpp"
#include "infolabel/evaluation.hpp"
#include "infolabel/infogain.hpp"
#include "infolabel/scoring.hpp"

namespace infolabel {

inline constexpr std::string_view kToolkitVersion = "0.3.0";

struct RunConfig {
  std::filesystem::path problems_file;
  std::filesystem::path traces_file;  // raw {problem_id, trace_id, raw_text}
  std::filesystem::path out_dir = "out";
  // http(s) URL or "reference:<fixture path>"
  std::string backend;
  std::filesystem::path cache_dir = "cache";
  std::uint64_t seed = 0;
  std::vector<Domain> domains;  // empty: every domain
  Method method = Method::kMCNIG;
  Aggregation aggregation = Aggregation::kMax;
  Reference reference = Reference::kStep0;
  std::size_t k_subsample = 8;
  std::optional<std::filesystem::path> thresholds_file;
  std::size_t concurrency_limit = 4;
  std::filesystem::path sandbox_dir;  // empty: system temp dir
  std::size_t external_concurrency = 4;
  std::size_t grid_points = 256;
  std::size_t records_per_shard = 5000;
  std::size_t eval_k = 8;
  std::string eval_scorer = "label-product";
  HttpOptions http;
  bool force = false;  // ignore up-to-date stage stamps

  // Throws Error(kConfig) on violated invariants.
  void check() const;
  // Everything that influences stage outputs (no paths to outputs, no
  // concurrency knobs).
  nlohmann::json fingerprint() const;
};

// TOML-like `key = value` file; relative paths resolve against the file's
// directory.
RunConfig load_config(const std::filesystem::path& path);
// INFOLABEL_BACKEND_URL and INFOLABEL_CACHE_DIR override the file.
void apply_env_overrides(RunConfig& config);

enum class Stage { kIngest, kValidate, kScore, kSweep, kLabel, kEmitPrm, kEmitOrm, kEvalBok };

const char* to_string(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

// Files a run reads and writes under out_dir.
struct Artifacts {
  explicit Artifacts(const std::filesystem::path& out_dir);

  std::filesystem::path traces;      // parsed traces
  std::filesystem::path validated;   // traces with validator outcomes
  std::filesystem::path pools;       // full answer pools
  std::filesystem::path working;     // filtered, subsampled traces
  std::filesystem::path profiles;    // information profiles
  std::filesystem::path sweep;       // per-domain threshold sweeps
  std::filesystem::path thresholds;  // {domain: tau}
  std::filesystem::path labels;      // signals + labels
  std::filesystem::path prm_dir;
  std::filesystem::path orm_dir;
  std::filesystem::path bok;
  std::filesystem::path manifest;
  std::filesystem::path drops;
  std::filesystem::path stamps_dir;
};

struct StageReport {
  Stage stage = Stage::kIngest;
  std::string status = "pending";  // ok | skipped | failed
  std::size_t problems_in = 0;
  std::size_t problems_out = 0;
  std::map<std::string, std::size_t> problems_dropped;  // by reason code
  std::size_t traces_in = 0;
  std::size_t traces_out = 0;
  std::map<std::string, std::size_t> traces_dropped;
  nlohmann::json details = nlohmann::json::object();
  std::string error;

  nlohmann::json to_json() const;
};

struct RunManifest {
  nlohmann::json config;
  std::map<std::string, std::string> input_digests;
  std::vector<StageReport> stages;
  ScorerStats scoring;
  std::string started_at;
  std::string finished_at;
  bool ok = false;

  nlohmann::json to_json() const;
  const StageReport* find(Stage stage) const;
};

// Runs `stages` in pipeline order, each reading its upstream artifacts from
// out_dir. Outputs are written atomically. On failure the manifest records
// the failed stage and the Error is rethrown.
RunManifest run_pipeline(const RunConfig& config, const std::vector<Stage>& stages);

// Best-of-K over the run's working set. `scorer` is one of label-product,
// oracle, random, majority, step-product or orm; the last two read
// `scores_file`. Correctness reuses the outcomes recorded at validation.
BestOfKReport evaluate_best_of_k(const RunConfig& config, const std::string& scorer,
                                 std::size_t k,
                                 const std::optional<std::filesystem::path>& scores_file);

// Exit status for the CLI: 2 config, 3 data, 4 backend, 5 internal.
int exit_code_for(ErrorKind kind);

}  // namespace infolabel

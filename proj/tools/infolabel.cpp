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


// infolabel: command-line front end for the step-labeling toolkit.

#include <sstream>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "infolabel/analysis.hpp"
#include "infolabel/error.hpp"
#include "infolabel/evaluation.hpp"
#include "infolabel/pipeline.hpp"
#include "infolabel/scoring.hpp"
#include "infolabel/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace infolabel;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string cache_dir;
  std::string out_dir;
  bool force = false;
};

// Precedence: config file < environment < command-line flags.
RunConfig resolve_config(const GlobalOptions& g) {
  if (g.config.empty()) throw Error(ErrorKind::kConfig, "--config is required");
  RunConfig config = load_config(g.config);
  apply_env_overrides(config);
  if (g.seed) config.seed = *g.seed;
  if (!g.backend.empty()) config.backend = g.backend;
  if (!g.cache_dir.empty()) config.cache_dir = g.cache_dir;
  if (!g.out_dir.empty()) config.out_dir = g.out_dir;
  config.force = config.force || g.force;
  return config;
}

void print_stage_summary(const RunManifest& manifest) {
  for (const StageReport& r : manifest.stages) {
    std::cout << to_string(r.stage) << ": " << r.status << "  problems " << r.problems_in
              << " -> " << r.problems_out << "  traces " << r.traces_in << " -> "
              << r.traces_out << '\n';
  }
  std::cout << "scoring cache hit rate: " << manifest.scoring.hit_rate() << '\n';
}

std::string read_pool_file(const fs::path& path, std::vector<double>& pool) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    // Fall back to whitespace-separated numbers.
    std::istringstream in(text);
    double v;
    while (in >> v) pool.push_back(v);
    if (!in.eof()) throw Error(ErrorKind::kData, path.string() + ": not a number list");
    return "text";
  }
  if (j.is_object() && j.contains("pool")) j = j["pool"];
  if (!j.is_array()) throw Error(ErrorKind::kData, path.string() + ": expected a JSON array");
  for (const json& v : j) {
    if (!v.is_number()) throw Error(ErrorKind::kData, path.string() + ": non-numeric entry");
    pool.push_back(v.get<double>());
  }
  return "json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-theoretic step labels for reasoning traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  GlobalOptions g;
  app.add_option("--config", g.config, "run configuration file (key = value)");
  app.add_option("--seed", g.seed, "override the run seed");
  app.add_option("--backend", g.backend, "scoring backend URL or reference:<fixture>");
  app.add_option("--cache-dir", g.cache_dir, "scoring cache directory");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_flag("--force", g.force, "re-run stages even when up to date");

  // Pipeline stages, each runnable on its own from persisted artifacts.
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  const std::vector<std::pair<Stage, std::string>> stage_help = {
      {Stage::kIngest, "parse raw traces into steps and final answers"},
      {Stage::kValidate, "validate answers, build pools, filter and subsample"},
      {Stage::kScore, "score information profiles through the backend"},
      {Stage::kSweep, "calibrate per-domain thresholds by balanced accuracy"},
      {Stage::kLabel, "compute step signals and binary labels"},
      {Stage::kEmitPrm, "write PRM training shards"},
      {Stage::kEmitOrm, "write ORM training shards"},
  };
  for (const auto& [stage, help] : stage_help) {
    stage_cmds.emplace_back(app.add_subcommand(to_string(stage), help), stage);
  }

  CLI::App* run = app.add_subcommand("run", "run every pipeline stage in order");
  std::vector<std::string> run_stages;
  run->add_option("--stages", run_stages, "subset of stages (default: all)")->delimiter(',');

  CLI::App* bok = app.add_subcommand("eval-bok", "best-of-K evaluation on the working set");
  std::string bok_scorer = "label-product";
  std::size_t bok_k = 8;
  std::string bok_scores;
  std::string bok_output;
  bok->add_option("--scorer", bok_scorer, "label-product|oracle|random|majority|step-product|orm")
      ->check(CLI::IsMember(
          {"label-product", "oracle", "random", "majority", "step-product", "orm"}));
  bok->add_option("--k", bok_k, "candidates per problem")->check(CLI::PositiveNumber);
  bok->add_option("--scores", bok_scores, "JSONL scores for step-product or orm");
  bok->add_option("--output", bok_output, "write the report here as well");

  CLI::App* cx = app.add_subcommand("analyze-complexity", "token-cost model comparison");
  ComplexityParams params;
  bool natural_log = false;
  cx->add_option("--n", params.n, "CoT steps")->required();
  cx->add_option("--s-bar", params.s_bar, "average tokens per step")->required();
  cx->add_option("--m", params.m, "rollouts per prefix");
  cx->add_option("--big-s", params.s, "sampled candidate answers");
  cx->add_option("--t", params.t, "average answer tokens");
  cx->add_option("--q-len", params.q_len, "question tokens");
  cx->add_flag("--natural-log", natural_log, "natural log in the OmegaPRM cost");

  CLI::App* bias = app.add_subcommand("analyze-bias", "subsampling bias and variance study");
  std::string pool_file;
  std::size_t bias_s = 1;
  std::size_t replicates = 10000;
  bool exhaustive = false;
  std::uint64_t bias_seed = 0;
  bias->add_option("--pool-file", pool_file, "JSON array or whitespace-separated numbers")
      ->required()
      ->check(CLI::ExistingFile);
  bias->add_option("--s", bias_s, "subsample size")->required();
  bias->add_option("--replicates", replicates, "Monte Carlo replicates");
  bias->add_option("--bias-seed", bias_seed, "seed for the Monte Carlo draws");
  bias->add_flag("--exhaustive", exhaustive, "enumerate every subset instead");

  CLI::App* report = app.add_subcommand("report", "summarize the last run's manifest");

  CLI::App* serve = app.add_subcommand("serve-reference", "serve a reference model over HTTP");
  std::string fixture;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--fixture", fixture, "reference model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, stage] : stage_cmds) {
      if (cmd->parsed()) {
        const RunManifest m = run_pipeline(resolve_config(g), {stage});
        print_stage_summary(m);
        return 0;
      }
    }
    if (run->parsed()) {
      std::vector<Stage> stages;
      for (const std::string& s : run_stages) stages.push_back(parse_stage(s));
      if (stages.empty()) stages = all_stages();
      const RunManifest m = run_pipeline(resolve_config(g), stages);
      print_stage_summary(m);
      return 0;
    }
    if (bok->parsed()) {
      RunConfig config = resolve_config(g);
      std::optional<fs::path> scores;
      if (!bok_scores.empty()) scores = bok_scores;
      const json out = to_json(evaluate_best_of_k(config, bok_scorer, bok_k, scores));
      if (!bok_output.empty()) write_file_atomic(bok_output, out.dump(2) + "\n");
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (cx->parsed()) {
      const LogBase base = natural_log ? LogBase::kNatural : LogBase::kTwo;
      json out{{"params", to_json(params)},
               {"log_base", natural_log ? "e" : "2"},
               {"mathshepherd", tokens_mathshepherd(params)},
               {"mcnig", tokens_mcnig(params)}};
      // Undefined below two steps; reported as null rather than failing.
      out["omegaprm"] = params.n >= 2 ? json(tokens_omegaprm(params, base)) : json(nullptr);
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (bias->parsed()) {
      std::vector<double> pool;
      read_pool_file(pool_file, pool);
      SubsampleStudy study;
      if (exhaustive) {
        const ExactBias exact = exhaustive_bias(pool, bias_s);
        study.pool = pool;
        study.s = bias_s;
        study.replicates = 0;
        study.bias = exact.bias;
        study.variance = exact.variance;
        study.exact = true;
      } else {
        study = subsample_bias_variance(pool, bias_s, replicates, bias_seed);
      }
      std::cout << to_json(study).dump(2) << '\n';
      return 0;
    }
    if (report->parsed()) {
      const RunConfig config = resolve_config(g);
      const Artifacts paths(config.out_dir);
      if (!fs::exists(paths.manifest)) {
        throw Error(ErrorKind::kPrecondition, "no manifest at " + paths.manifest.string());
      }
      const json m = json::parse(read_file(paths.manifest));
      std::cout << "toolkit " << m.value("toolkit_version", "?") << ", run "
                << (m.value("ok", false) ? "ok" : "FAILED") << ", finished "
                << m.value("finished_at", "?") << '\n';
      for (const json& s : m.at("stages")) {
        std::cout << "  " << s.at("stage").get<std::string>() << ": "
                  << s.at("status").get<std::string>() << "  problems "
                  << s.at("problems_in") << " -> " << s.at("problems_out");
        if (!s.at("problems_dropped").empty()) std::cout << " dropped " << s.at("problems_dropped");
        if (!s.at("traces_dropped").empty()) std::cout << " traces dropped " << s.at("traces_dropped");
        if (s.contains("error")) std::cout << " error: " << s.at("error").get<std::string>();
        std::cout << '\n';
      }
      std::cout << "  scoring: " << m.at("scoring").dump() << '\n';
      return 0;
    }
    if (serve->parsed()) {
      auto model = std::make_shared<ReferenceModel>(ReferenceModel::load(fixture));
      ReferenceServer server(model);
      std::cout << "serving " << model->id() << " on http://" << host << ":" << port << '\n'
                << std::flush;
      server.serve_forever(host, port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return exit_code_for(ErrorKind::kInternal);
  }
  return 0;
}

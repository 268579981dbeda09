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


#include "infolabel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "infolabel/calibration.hpp"
#include "infolabel/dataset.hpp"
#include "infolabel/evaluation.hpp"
#include "infolabel/trace.hpp"
#include "infolabel/util.hpp"
#include "infolabel/validators.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace infolabel {

// ---------------------------------------------------------------- config

void RunConfig::check() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  if (problems_file.empty()) fail("problems file is not set");
  if (traces_file.empty()) fail("traces file is not set");
  if (out_dir.empty()) fail("out_dir is not set");
  if (concurrency_limit < 1) fail("concurrency_limit must be >= 1");
  if (external_concurrency < 1) fail("external_concurrency must be >= 1");
  if (k_subsample < 1) fail("k_subsample must be >= 1");
  if (grid_points < 1) fail("grid_points must be >= 1");
  if (records_per_shard < 1) fail("records_per_shard must be >= 1");
  if (eval_k < 1) fail("eval_k must be >= 1");
  static const std::set<std::string> scorers = {"label-product", "oracle", "random",
                                                "majority"};
  if (!scorers.count(eval_scorer)) fail("unknown eval_scorer: " + eval_scorer);
  if (http.max_retries < 0 || http.backoff_ms < 0 || !(http.timeout_s > 0)) {
    fail("invalid http options");
  }
}

json RunConfig::fingerprint() const {
  json domains_json = json::array();
  for (Domain d : domains) domains_json.push_back(to_string(d));
  return json{{"problems_file", problems_file.string()},
              {"traces_file", traces_file.string()},
              {"backend", backend},
              {"seed", seed},
              {"domains", domains_json},
              {"method", to_string(method)},
              {"aggregation", to_string(aggregation)},
              {"reference", to_string(reference)},
              {"k_subsample", k_subsample},
              {"thresholds_file", thresholds_file ? thresholds_file->string() : ""},
              {"grid_points", grid_points},
              {"records_per_shard", records_per_shard},
              {"eval_k", eval_k},
              {"eval_scorer", eval_scorer}};
}

namespace {

// Strips a trailing # comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

// Values are JSON-compatible scalars or arrays: "text", 12, 0.5, true, [..].
json parse_value(const std::string& raw, const std::string& where) {
  try {
    return json::parse(raw);
  } catch (const json::exception&) {
    throw Error(ErrorKind::kConfig, where + ": cannot parse value '" + raw + "'");
  }
}

std::string expect_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw Error(ErrorKind::kConfig, key + " must be a string");
  return v.get<std::string>();
}

std::size_t expect_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorKind::kConfig, key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

// "reference:<path>" fixtures are files too; resolve them like other paths.
std::string resolve_backend(const fs::path& base, const std::string& spec) {
  constexpr std::string_view prefix = "reference:";
  if (spec.rfind(prefix, 0) == 0) {
    return std::string(prefix) + resolve(base, spec.substr(prefix.size())).string();
  }
  return spec;
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  RunConfig c;
  c.out_dir = base / "out";
  c.cache_dir = base / "cache";
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfig, where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const json v = parse_value(trim(body.substr(eq + 1)), where);
    if (!seen.insert(key).second) throw Error(ErrorKind::kConfig, where + ": duplicate key " + key);

    try {
      if (key == "problems") {
        c.problems_file = resolve(base, expect_string(v, key));
      } else if (key == "traces") {
        c.traces_file = resolve(base, expect_string(v, key));
      } else if (key == "out_dir") {
        c.out_dir = resolve(base, expect_string(v, key));
      } else if (key == "backend" || key == "backend_url") {
        c.backend = resolve_backend(base, expect_string(v, key));
      } else if (key == "cache_dir") {
        c.cache_dir = resolve(base, expect_string(v, key));
      } else if (key == "seed") {
        if (!v.is_number_integer()) throw Error(ErrorKind::kConfig, "seed must be an integer");
        c.seed = v.get<std::uint64_t>();
      } else if (key == "domains") {
        if (!v.is_array()) throw Error(ErrorKind::kConfig, "domains must be an array");
        c.domains.clear();
        for (const json& d : v) c.domains.push_back(parse_domain(expect_string(d, key)));
      } else if (key == "method") {
        c.method = parse_method(expect_string(v, key));
      } else if (key == "aggregation") {
        c.aggregation = parse_aggregation(expect_string(v, key));
      } else if (key == "reference") {
        c.reference = parse_reference(expect_string(v, key));
      } else if (key == "k_subsample") {
        c.k_subsample = expect_count(v, key);
      } else if (key == "thresholds_file") {
        c.thresholds_file = resolve(base, expect_string(v, key));
      } else if (key == "concurrency_limit") {
        c.concurrency_limit = expect_count(v, key);
      } else if (key == "sandbox_dir") {
        c.sandbox_dir = resolve(base, expect_string(v, key));
      } else if (key == "external_concurrency") {
        c.external_concurrency = expect_count(v, key);
      } else if (key == "grid_points") {
        c.grid_points = expect_count(v, key);
      } else if (key == "records_per_shard") {
        c.records_per_shard = expect_count(v, key);
      } else if (key == "eval_k") {
        c.eval_k = expect_count(v, key);
      } else if (key == "eval_scorer") {
        c.eval_scorer = expect_string(v, key);
      } else if (key == "http_retries") {
        c.http.max_retries = static_cast<int>(expect_count(v, key));
      } else if (key == "http_backoff_ms") {
        c.http.backoff_ms = static_cast<int>(expect_count(v, key));
      } else if (key == "http_timeout_s") {
        if (!v.is_number()) throw Error(ErrorKind::kConfig, "http_timeout_s must be a number");
        c.http.timeout_s = v.get<double>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown key " + key);
      }
    } catch (const Error& e) {
      // Enum parsers report kConfig or kData; either way this is a bad config.
      throw Error(ErrorKind::kConfig, where + ": " + e.what());
    }
  }
  return c;
}

void apply_env_overrides(RunConfig& config) {
  if (const char* url = std::getenv("INFOLABEL_BACKEND_URL"); url && *url) {
    config.backend = url;
  }
  if (const char* dir = std::getenv("INFOLABEL_CACHE_DIR"); dir && *dir) {
    config.cache_dir = dir;
  }
}

// ---------------------------------------------------------------- stages

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kValidate: return "validate";
    case Stage::kScore: return "score";
    case Stage::kSweep: return "sweep";
    case Stage::kLabel: return "label";
    case Stage::kEmitPrm: return "emit-prm";
    case Stage::kEmitOrm: return "emit-orm";
    case Stage::kEvalBok: return "eval-bok";
  }
  return "unknown";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {
      Stage::kIngest, Stage::kValidate, Stage::kScore,   Stage::kSweep,
      Stage::kLabel,  Stage::kEmitPrm,  Stage::kEmitOrm, Stage::kEvalBok};
  return stages;
}

Stage parse_stage(std::string_view name) {
  for (Stage s : all_stages()) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorKind::kConfig, "unknown stage: " + std::string(name));
}

Artifacts::Artifacts(const fs::path& out)
    : traces(out / "traces.jsonl"),
      validated(out / "validated.jsonl"),
      pools(out / "pools.jsonl"),
      working(out / "working.jsonl"),
      profiles(out / "profiles.jsonl"),
      sweep(out / "sweep.json"),
      thresholds(out / "thresholds.json"),
      labels(out / "labels.jsonl"),
      prm_dir(out / "prm"),
      orm_dir(out / "orm"),
      bok(out / "bok.json"),
      manifest(out / "manifest.json"),
      drops(out / "drops.jsonl"),
      stamps_dir(out / ".stamps") {}

json StageReport::to_json() const {
  json j{{"stage", to_string(stage)},
         {"status", status},
         {"problems_in", problems_in},
         {"problems_out", problems_out},
         {"problems_dropped", problems_dropped},
         {"traces_in", traces_in},
         {"traces_out", traces_out},
         {"traces_dropped", traces_dropped},
         {"details", details}};
  if (!error.empty()) j["error"] = error;
  return j;
}

json RunManifest::to_json() const {
  json stage_list = json::array();
  for (const StageReport& r : stages) stage_list.push_back(r.to_json());
  return json{{"toolkit_version", std::string(kToolkitVersion)},
              {"config", config},
              {"input_digests", input_digests},
              {"stages", stage_list},
              {"scoring",
               {{"requests", scoring.requests},
                {"cache_hits", scoring.cache_hits},
                {"backend_calls", scoring.backend_calls},
                {"cache_hit_rate", scoring.hit_rate()}}},
              {"started_at", started_at},
              {"finished_at", finished_at},
              {"ok", ok}};
}

const StageReport* RunManifest::find(Stage stage) const {
  for (const StageReport& r : stages) {
    if (r.stage == stage) return &r;
  }
  return nullptr;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData:
    case ErrorKind::kPrecondition:
    case ErrorKind::kDomain:
    case ErrorKind::kUndefined:
    case ErrorKind::kResource: return 3;
    case ErrorKind::kBackend:
    case ErrorKind::kProtocol: return 4;
    case ErrorKind::kInternal: return 5;
  }
  return 5;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const json& r : rows) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<json> read_json_rows(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kPrecondition,
                "missing upstream artifact " + path.string() + "; run the earlier stage first");
  }
  std::vector<json> rows;
  for (const JsonlLine& line : read_jsonl_lines(path)) {
    try {
      rows.push_back(json::parse(line.text));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kData, path.string() + ":" + std::to_string(line.line_no) + ": " +
                                        e.what());
    }
  }
  return rows;
}

json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kPrecondition,
                "missing upstream artifact " + path.string() + "; run the earlier stage first");
  }
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kData, path.string() + ": " + e.what());
  }
}

std::vector<ReasoningTrace> read_traces(const fs::path& path) {
  std::vector<ReasoningTrace> out;
  for (const json& j : read_json_rows(path)) out.push_back(trace_from_json(j));
  return out;
}

// Shared state for one run.
struct RunState {
  const RunConfig& config;
  Artifacts paths;
  std::vector<DropRecord> drops;
  std::shared_ptr<Scorer> scorer;  // created on first use
  std::optional<std::vector<Problem>> problems;

  const std::vector<Problem>& load_problem_set() {
    if (!problems) problems = load_problems(config.problems_file);
    return *problems;
  }

  std::map<std::string, const Problem*> problem_index() {
    std::map<std::string, const Problem*> index;
    for (const Problem& p : load_problem_set()) index[p.id] = &p;
    return index;
  }

  Scorer& get_scorer() {
    if (!scorer) {
      if (config.backend.empty()) throw Error(ErrorKind::kConfig, "backend is not set");
      auto backend = make_backend(config.backend, config.http);
      auto cache = std::make_shared<ScoreCache>(config.cache_dir);
      scorer = std::make_shared<Scorer>(std::move(backend), std::move(cache));
    }
    return *scorer;
  }

  // One structured line per drop on stderr; all drops also go to drops.jsonl.
  void drop(StageReport& report, const std::string& problem_id, const std::string& trace_id,
            const std::string& reason) {
    std::clog << "drop stage=" << to_string(report.stage) << " problem=" << problem_id;
    if (!trace_id.empty()) std::clog << " trace=" << trace_id;
    std::clog << " reason=" << reason << '\n';
    drops.push_back({to_string(report.stage), problem_id, trace_id, reason});
    if (trace_id.empty()) {
      ++report.problems_dropped[reason];
    } else {
      ++report.traces_dropped[reason];
    }
  }
};

// Groups traces by problem id, preserving first-seen problem order and
// per-problem trace order.
std::map<std::string, std::vector<ReasoningTrace>> group_by_problem(
    std::vector<ReasoningTrace> traces) {
  std::map<std::string, std::vector<ReasoningTrace>> out;
  for (ReasoningTrace& t : traces) out[t.problem_id].push_back(std::move(t));
  return out;
}

std::size_t count_problems(const std::vector<ReasoningTrace>& traces) {
  std::set<std::string> ids;
  for (const ReasoningTrace& t : traces) ids.insert(t.problem_id);
  return ids.size();
}

// ingest: raw traces -> parsed traces. Problems are counted by the ids that
// appear in the problems file.
void stage_ingest(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  report.problems_in = index.size();
  std::vector<json> raw = read_json_rows(st.config.traces_file);
  report.traces_in = raw.size();

  std::vector<json> rows;
  std::set<std::string> with_traces;
  std::set<std::pair<std::string, std::string>> seen;
  for (const json& j : raw) {
    ReasoningTrace t;
    try {
      t = trace_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorKind::kData, std::string("traces file: ") + e.what());
    }
    auto it = index.find(t.problem_id);
    if (it == index.end()) {
      st.drop(report, t.problem_id, t.trace_id, "unknown_problem");
      continue;
    }
    if (!seen.insert({t.problem_id, t.trace_id}).second) {
      st.drop(report, t.problem_id, t.trace_id, "duplicate_trace_id");
      continue;
    }
    const std::string raw_text = t.raw_text;
    ReasoningTrace parsed;
    try {
      parsed = parse_trace(raw_text, it->second->domain);
    } catch (const Error&) {
      st.drop(report, t.problem_id, t.trace_id, "empty_trace");
      continue;
    }
    parsed.problem_id = t.problem_id;
    parsed.trace_id = t.trace_id;
    parsed.raw_text = raw_text;
    rows.push_back(to_json(parsed));
    with_traces.insert(t.problem_id);
  }
  for (const auto& [id, p] : index) {
    if (!with_traces.count(id)) st.drop(report, id, "", "no_traces");
  }
  report.traces_out = rows.size();
  report.problems_out = with_traces.size();
  write_file_atomic(st.paths.traces, jsonl(rows));
}

// validate: answer pools, then filtering and subsampling into the working set.
void stage_validate(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  auto grouped = group_by_problem(read_traces(st.paths.traces));
  report.problems_in = grouped.size();
  for (const auto& [id, ts] : grouped) report.traces_in += ts.size();

  std::set<Domain> allowed(st.config.domains.begin(), st.config.domains.end());
  std::vector<Problem> problems;
  for (auto it = grouped.begin(); it != grouped.end();) {
    auto p = index.find(it->first);
    if (p == index.end()) {
      throw Error(ErrorKind::kData, "trace references unknown problem " + it->first);
    }
    if (!allowed.empty() && !allowed.count(p->second->domain)) {
      st.drop(report, it->first, "", "domain_excluded");
      it = grouped.erase(it);
      continue;
    }
    problems.push_back(*p->second);
    ++it;
  }

  set_external_concurrency(st.config.external_concurrency);
  if (!st.config.sandbox_dir.empty()) set_sandbox_root(st.config.sandbox_dir);
  std::vector<AnswerPool> pools(problems.size());
  const Validator validator = spec_validator();
  parallel_for(problems.size(), st.config.concurrency_limit, [&](std::size_t i) {
    auto& ts = grouped.at(problems[i].id);
    pools[i] = build_answer_pool(problems[i], ts, validator);
  });

  std::vector<json> validated_rows;
  std::vector<json> pool_rows;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    for (const ReasoningTrace& t : grouped.at(problems[i].id)) validated_rows.push_back(to_json(t));
    pool_rows.push_back(to_json(pools[i]));
    flagged += pools[i].flagged.size();
  }

  WorkingSet ws = filter_and_subsample(problems, grouped, st.config.k_subsample, st.config.seed);
  for (const DropRecord& d : ws.dropped) st.drop(report, d.problem_id, d.trace_id, d.reason);

  std::vector<json> working_rows;
  for (const ProblemTraces& item : ws.items) {
    for (const ReasoningTrace& t : item.traces) working_rows.push_back(to_json(t));
    report.traces_out += item.traces.size();
  }
  report.problems_out = ws.items.size();
  // Traces parsed fine but left out by subsampling are not errors.
  std::size_t dropped_traces = 0;
  for (const auto& [reason, n] : report.traces_dropped) dropped_traces += n;
  report.details["subsampled_out"] = report.traces_in - report.traces_out - dropped_traces;
  report.details["validator_errors"] = flagged;

  write_file_atomic(st.paths.validated, jsonl(validated_rows));
  write_file_atomic(st.paths.pools, jsonl(pool_rows));
  write_file_atomic(st.paths.working, jsonl(working_rows));
}

std::map<std::string, AnswerPool> read_pools(const fs::path& path) {
  std::map<std::string, AnswerPool> out;
  for (const json& j : read_json_rows(path)) {
    AnswerPool p = pool_from_json(j);
    out.emplace(p.problem_id, std::move(p));
  }
  return out;
}

// score: one information profile per working trace.
void stage_score(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  const auto pools = read_pools(st.paths.pools);
  const std::vector<ReasoningTrace> traces = read_traces(st.paths.working);
  report.traces_in = traces.size();
  report.problems_in = count_problems(traces);

  Scorer& scorer = st.get_scorer();
  const ScorerStats before = scorer.stats();
  std::vector<json> rows(traces.size());
  // Parallel across traces; each profile scores its cells sequentially so the
  // total number of in-flight requests stays at concurrency_limit.
  parallel_for(traces.size(), st.config.concurrency_limit, [&](std::size_t i) {
    const ReasoningTrace& t = traces[i];
    const Problem& problem = *index.at(t.problem_id);
    const std::vector<std::string> answers = profile_answers(problem, pools.at(t.problem_id));
    rows[i] = to_json(information_profile(problem, t, answers, scorer, 1));
  });
  const ScorerStats after = scorer.stats();
  const std::uint64_t requests = after.requests - before.requests;
  const std::uint64_t hits = after.cache_hits - before.cache_hits;
  report.details["requests"] = requests;
  report.details["cache_hits"] = hits;
  report.details["cache_hit_rate"] = requests == 0 ? 1.0 : static_cast<double>(hits) / requests;
  report.traces_out = traces.size();
  report.problems_out = report.problems_in;
  write_file_atomic(st.paths.profiles, jsonl(rows));
}

struct SignalSet {
  std::vector<StepSignal> signals;  // profile order
  std::vector<Domain> domains;
  std::vector<int> truths;
};

// Signals for every profile; problems whose signal is undefined (no correct
// or no wrong answer in the pool under MCNIG) are dropped with a reason.
SignalSet compute_signals(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  const auto pools = read_pools(st.paths.pools);
  std::map<std::string, bool> truth_of;
  for (const ReasoningTrace& t : read_traces(st.paths.working)) {
    truth_of[trace_key(t.problem_id, t.trace_id)] = t.correct.value_or(false);
  }
  SignalSet out;
  std::set<std::string> in_ids;
  std::set<std::string> out_ids;
  std::set<std::string> undefined;
  for (const json& j : read_json_rows(st.paths.profiles)) {
    InformationProfile profile = profile_from_json(j);
    ++report.traces_in;
    in_ids.insert(profile.problem_id);
    const Problem& problem = *index.at(profile.problem_id);
    StepSignal signal;
    try {
      if (st.config.method == Method::kIG) {
        signal = ig_signal(profile, problem.gold_answer);
      } else {
        signal = mcnig_signal(profile, pools.at(profile.problem_id), st.config.aggregation,
                              st.config.reference);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUndefined) throw;
      if (undefined.insert(profile.problem_id).second) {
        st.drop(report, profile.problem_id, "", "signal_undefined");
      }
      continue;
    }
    out_ids.insert(profile.problem_id);
    out.truths.push_back(truth_of.at(trace_key(profile.problem_id, profile.trace_id)) ? 1 : 0);
    out.domains.push_back(problem.domain);
    out.signals.push_back(std::move(signal));
  }
  report.problems_in = in_ids.size();
  report.problems_out = out_ids.size();
  report.traces_out = out.signals.size();
  // Traces leave with their problem; they carry no reason of their own.
  report.details["traces_of_dropped_problems"] = report.traces_in - report.traces_out;
  return out;
}

// sweep: per-domain threshold calibration on the working set.
void stage_sweep(RunState& st, StageReport& report) {
  SignalSet set = compute_signals(st, report);
  std::map<Domain, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < set.signals.size(); ++i) by_domain[set.domains[i]].push_back(i);

  json sweeps = json::array();
  json thresholds = json::object();
  for (const auto& [domain, idx] : by_domain) {
    std::vector<StepSignal> signals;
    std::vector<int> truths;
    for (std::size_t i : idx) {
      signals.push_back(set.signals[i]);
      truths.push_back(set.truths[i]);
    }
    const std::vector<double> grid = default_grid(signals, st.config.grid_points);
    try {
      ThresholdSweep sweep = sweep_threshold(signals, truths, grid, domain);
      sweeps.push_back(to_json(sweep));
      thresholds[to_string(domain)] = sweep.best_threshold;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUndefined) throw;
      // One class only: balanced accuracy is undefined at every threshold.
      std::clog << "sweep domain=" << to_string(domain)
                << " status=undefined fallback_threshold=0\n";
      sweeps.push_back({{"domain", to_string(domain)},
                        {"grid", grid},
                        {"table", json::array()},
                        {"best_threshold", 0.0},
                        {"undefined", true}});
      thresholds[to_string(domain)] = 0.0;
    }
  }
  report.details["domains"] = by_domain.size();
  write_file_atomic(st.paths.sweep, sweeps.dump(2) + "\n");
  write_file_atomic(st.paths.thresholds, thresholds.dump(2) + "\n");
}

// label: signals plus binary labels at the per-domain thresholds.
void stage_label(RunState& st, StageReport& report) {
  const fs::path tau_path = st.config.thresholds_file.value_or(st.paths.thresholds);
  const json tau = read_json_file(tau_path);
  SignalSet set = compute_signals(st, report);
  std::vector<json> rows;
  for (std::size_t i = 0; i < set.signals.size(); ++i) {
    const std::string domain = to_string(set.domains[i]);
    if (!tau.contains(domain) || !tau[domain].is_number()) {
      throw Error(ErrorKind::kConfig,
                  tau_path.string() + " has no threshold for domain " + domain);
    }
    const StepLabels labels = assign_labels(set.signals[i], tau[domain].get<double>());
    rows.push_back(to_json(set.signals[i], &labels));
  }
  write_file_atomic(st.paths.labels, jsonl(rows));
}

std::map<std::string, StepLabels> read_labels(const fs::path& path) {
  std::map<std::string, StepLabels> out;
  for (const json& j : read_json_rows(path)) {
    StepLabels l = labels_from_json(j);
    out.emplace(trace_key(l.problem_id, l.trace_id), std::move(l));
  }
  return out;
}

// Replaces the shard directory contents with freshly written shards.
std::vector<std::string> write_shards(const fs::path& dir, std::size_t per_shard,
                                      const std::vector<std::string>& lines) {
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  {
    ShardWriter writer(tmp, "train", per_shard);
    for (const std::string& line : lines) writer.write(line);
    writer.close();
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  return names;
}

void stage_emit_prm(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  const auto labels = read_labels(st.paths.labels);
  std::vector<std::string> lines;
  std::vector<PRMRecord> records;
  std::set<std::string> in_ids;
  std::set<std::string> out_ids;
  for (const ReasoningTrace& t : read_traces(st.paths.working)) {
    auto it = labels.find(trace_key(t.problem_id, t.trace_id));
    if (it == labels.end()) continue;  // problem dropped upstream
    ++report.traces_in;
    in_ids.insert(t.problem_id);
    const Problem& problem = *index.at(t.problem_id);
    if (auto reason = reserved_symbol_violation(problem, t)) {
      st.drop(report, t.problem_id, t.trace_id, *reason);
      continue;
    }
    PRMRecord record = emit_prm_record(problem, t, it->second);
    lines.push_back(serialize(record));
    records.push_back(std::move(record));
    out_ids.insert(t.problem_id);
  }
  for (const std::string& id : in_ids) {
    if (!out_ids.count(id)) st.drop(report, id, "", "no_emittable_traces");
  }
  report.problems_in = in_ids.size();
  report.problems_out = out_ids.size();
  report.traces_out = records.size();
  const LabelBalance balance = label_balance(records);
  report.details["positive_targets"] = balance.positive;
  report.details["negative_targets"] = balance.negative;
  report.details["shards"] = write_shards(st.paths.prm_dir, st.config.records_per_shard, lines);
}

void stage_emit_orm(RunState& st, StageReport& report) {
  const auto index = st.problem_index();
  std::vector<std::string> lines;
  std::set<std::string> in_ids;
  std::set<std::string> out_ids;
  std::size_t positive = 0;
  for (const ReasoningTrace& t : read_traces(st.paths.working)) {
    ++report.traces_in;
    in_ids.insert(t.problem_id);
    const Problem& problem = *index.at(t.problem_id);
    if (auto reason = reserved_symbol_violation(problem, t)) {
      st.drop(report, t.problem_id, t.trace_id, *reason);
      continue;
    }
    const ORMRecord record = emit_orm_record(problem, t);
    positive += record.target == Target::kPos ? 1 : 0;
    lines.push_back(serialize(record));
    out_ids.insert(t.problem_id);
  }
  for (const std::string& id : in_ids) {
    if (!out_ids.count(id)) st.drop(report, id, "", "no_emittable_traces");
  }
  report.problems_in = in_ids.size();
  report.problems_out = out_ids.size();
  report.traces_out = lines.size();
  report.details["positive_targets"] = positive;
  report.details["negative_targets"] = lines.size() - positive;
  report.details["shards"] = write_shards(st.paths.orm_dir, st.config.records_per_shard, lines);
}

// Validator that reuses the outcomes recorded by the validate stage, so
// external commands are not executed twice.
Validator recorded_validator(const std::vector<ReasoningTrace>& traces,
                             const std::map<std::string, const Problem*>& index) {
  auto known = std::make_shared<std::map<std::string, bool>>();
  for (const ReasoningTrace& t : traces) {
    if (!t.final_answer || !t.correct) continue;
    const Problem& p = *index.at(t.problem_id);
    (*known)[trace_key(t.problem_id, normalize_answer(*t.final_answer, p.domain))] = *t.correct;
  }
  Validator fallback = spec_validator();
  return [known, fallback](const Problem& p, std::string_view candidate) -> Validation {
    auto it = known->find(trace_key(p.id, normalize_answer(candidate, p.domain)));
    if (it != known->end()) {
      return Validation{it->second ? Verdict::kCorrect : Verdict::kWrong, false, "recorded"};
    }
    return fallback(p, candidate);
  };
}

struct BokInputs {
  std::vector<ProblemTraces> items;
  std::size_t traces = 0;
};

BokInputs bok_inputs(RunState& st) {
  const auto index = st.problem_index();
  BokInputs in;
  std::map<std::string, std::size_t> slot;
  for (const ReasoningTrace& t : read_traces(st.paths.working)) {
    auto [it, inserted] = slot.emplace(t.problem_id, in.items.size());
    if (inserted) in.items.push_back({*index.at(t.problem_id), {}});
    in.items[it->second].traces.push_back(t);
    ++in.traces;
  }
  return in;
}

BestOfKReport run_bok(RunState& st, const std::vector<ProblemTraces>& items,
                      const std::string& name, std::size_t k,
                      const std::optional<fs::path>& scores_file) {
  std::vector<ReasoningTrace> all;
  for (const ProblemTraces& item : items) all.insert(all.end(), item.traces.begin(), item.traces.end());
  const Validator validator = recorded_validator(all, st.problem_index());
  if (name == "majority") return majority_baseline(items, k, validator);
  TraceScorer scorer;
  if (name == "oracle") {
    scorer = oracle_scorer(validator);
  } else if (name == "random") {
    scorer = random_scorer(st.config.seed);
  } else if (name == "label-product") {
    scorer = label_product_scorer(read_labels(st.paths.labels));
  } else if (name == "step-product" || name == "orm") {
    if (!scores_file) throw Error(ErrorKind::kConfig, name + " scorer needs a scores file");
    scorer = name == "orm" ? orm_scorer(load_orm_scores(*scores_file))
                           : step_product_scorer(load_step_scores(*scores_file));
  } else {
    throw Error(ErrorKind::kConfig, "unknown scorer: " + name);
  }
  return best_of_k(items, scorer, name, k, validator);
}

void stage_eval_bok(RunState& st, StageReport& report) {
  const BokInputs in = bok_inputs(st);
  report.problems_in = in.items.size();
  report.traces_in = in.traces;
  const BestOfKReport result =
      run_bok(st, in.items, st.config.eval_scorer, st.config.eval_k, std::nullopt);
  report.problems_out = result.per_problem.size();
  report.traces_out = in.traces;
  report.details["accuracy"] = result.accuracy;
  write_file_atomic(st.paths.bok, to_json(result).dump(2) + "\n");
}

// ---------------------------------------------------------------- stamps

// Upstream files each stage reads (beyond the config).
std::vector<fs::path> stage_inputs(const RunState& st, Stage stage) {
  const Artifacts& a = st.paths;
  const fs::path& problems = st.config.problems_file;
  switch (stage) {
    case Stage::kIngest: return {problems, st.config.traces_file};
    case Stage::kValidate: return {problems, a.traces};
    case Stage::kScore: return {problems, a.pools, a.working};
    case Stage::kSweep: return {problems, a.pools, a.working, a.profiles};
    case Stage::kLabel: {
      std::vector<fs::path> in = {problems, a.pools, a.working, a.profiles};
      in.push_back(st.config.thresholds_file.value_or(a.thresholds));
      return in;
    }
    case Stage::kEmitPrm: return {problems, a.working, a.labels};
    case Stage::kEmitOrm: return {problems, a.working};
    case Stage::kEvalBok: {
      std::vector<fs::path> in = {problems, a.working};
      if (st.config.eval_scorer == "label-product") in.push_back(a.labels);
      return in;
    }
  }
  return {};
}

std::vector<fs::path> stage_outputs(const RunState& st, Stage stage) {
  const Artifacts& a = st.paths;
  switch (stage) {
    case Stage::kIngest: return {a.traces};
    case Stage::kValidate: return {a.validated, a.pools, a.working};
    case Stage::kScore: return {a.profiles};
    case Stage::kSweep: return {a.sweep, a.thresholds};
    case Stage::kLabel: return {a.labels};
    case Stage::kEmitPrm: return {a.prm_dir};
    case Stage::kEmitOrm: return {a.orm_dir};
    case Stage::kEvalBok: return {a.bok};
  }
  return {};
}

// Digest of a file or of every regular file under a directory.
std::string digest_path(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_file(p);
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const fs::path& f : files) {
      acc += fs::relative(f, p).string() + '\0' + sha256_file(f) + '\n';
    }
    return sha256_hex(acc);
  }
  return "";
}

std::string stage_input_digest(const RunState& st, Stage stage) {
  std::string acc = std::string(to_string(stage)) + '\n' + std::string(kToolkitVersion) + '\n' +
                    st.config.fingerprint().dump() + '\n';
  for (const fs::path& p : stage_inputs(st, stage)) {
    acc += p.filename().string() + '\0' + digest_path(p) + '\n';
  }
  return sha256_hex(acc);
}

json stage_output_digests(const RunState& st, Stage stage) {
  json out = json::object();
  for (const fs::path& p : stage_outputs(st, stage)) out[p.filename().string()] = digest_path(p);
  return out;
}

fs::path stamp_path(const RunState& st, Stage stage) {
  return st.paths.stamps_dir / (std::string(to_string(stage)) + ".json");
}

// A stage is up to date when its stamp matches the current inputs and its
// outputs are unchanged since they were written.
std::optional<json> up_to_date(const RunState& st, Stage stage, const std::string& input_digest) {
  const fs::path path = stamp_path(st, stage);
  if (!fs::exists(path)) return std::nullopt;
  try {
    json stamp = json::parse(read_file(path));
    if (stamp.at("inputs") != input_digest) return std::nullopt;
    if (stamp.at("outputs") != stage_output_digests(st, stage)) return std::nullopt;
    return stamp;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

json drop_to_json(const DropRecord& d) {
  json j{{"stage", d.stage}, {"problem_id", d.problem_id}, {"reason", d.reason}};
  if (!d.trace_id.empty()) j["trace_id"] = d.trace_id;
  return j;
}

DropRecord drop_from_json(const json& j) {
  return {j.at("stage").get<std::string>(), j.at("problem_id").get<std::string>(),
          j.value("trace_id", std::string()), j.at("reason").get<std::string>()};
}

void write_drops(const RunState& st) {
  std::vector<json> rows;
  for (const DropRecord& d : st.drops) rows.push_back(drop_to_json(d));
  write_file_atomic(st.paths.drops, jsonl(rows));
}

void run_stage(RunState& st, Stage stage, StageReport& report) {
  switch (stage) {
    case Stage::kIngest: return stage_ingest(st, report);
    case Stage::kValidate: return stage_validate(st, report);
    case Stage::kScore: return stage_score(st, report);
    case Stage::kSweep: return stage_sweep(st, report);
    case Stage::kLabel: return stage_label(st, report);
    case Stage::kEmitPrm: return stage_emit_prm(st, report);
    case Stage::kEmitOrm: return stage_emit_orm(st, report);
    case Stage::kEvalBok: return stage_eval_bok(st, report);
  }
}

}  // namespace

BestOfKReport evaluate_best_of_k(const RunConfig& config, const std::string& scorer,
                                 std::size_t k,
                                 const std::optional<fs::path>& scores_file) {
  if (k < 1) throw Error(ErrorKind::kConfig, "K must be >= 1");
  RunState st{config, Artifacts(config.out_dir), {}, nullptr, std::nullopt};
  const BokInputs in = bok_inputs(st);
  return run_bok(st, in.items, scorer, k, scores_file);
}

RunManifest run_pipeline(const RunConfig& config, const std::vector<Stage>& stages) {
  config.check();
  RunState st{config, Artifacts(config.out_dir), {}, nullptr, std::nullopt};
  fs::create_directories(config.out_dir);
  fs::create_directories(st.paths.stamps_dir);

  RunManifest manifest;
  manifest.config = config.fingerprint();
  manifest.config["out_dir"] = config.out_dir.string();
  manifest.config["cache_dir"] = config.cache_dir.string();
  manifest.config["concurrency_limit"] = config.concurrency_limit;
  manifest.started_at = utc_now();
  for (const fs::path& p : {config.problems_file, config.traces_file}) {
    if (!fs::exists(p)) throw Error(ErrorKind::kConfig, "input file not found: " + p.string());
    manifest.input_digests[p.filename().string()] = sha256_file(p);
  }

  // Pipeline order regardless of how the caller listed them.
  std::vector<Stage> ordered;
  for (Stage s : all_stages()) {
    if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);
  }

  auto finish = [&](bool ok) {
    manifest.ok = ok;
    if (st.scorer) manifest.scoring = st.scorer->stats();
    manifest.finished_at = utc_now();
    write_drops(st);
    write_file_atomic(st.paths.manifest, manifest.to_json().dump(2) + "\n");
  };

  for (Stage stage : ordered) {
    StageReport report;
    report.stage = stage;
    try {
      const std::string inputs = stage_input_digest(st, stage);
      if (!config.force) {
        if (auto stamp = up_to_date(st, stage, inputs)) {
          // Counts and drops come from the stamp; they were logged when it ran.
          for (const json& d : stamp->at("drops")) st.drops.push_back(drop_from_json(d));
          report.stage = stage;
          const json& r = stamp->at("report");
          report.problems_in = r.at("problems_in").get<std::size_t>();
          report.problems_out = r.at("problems_out").get<std::size_t>();
          report.problems_dropped = r.at("problems_dropped").get<std::map<std::string, std::size_t>>();
          report.traces_in = r.at("traces_in").get<std::size_t>();
          report.traces_out = r.at("traces_out").get<std::size_t>();
          report.traces_dropped = r.at("traces_dropped").get<std::map<std::string, std::size_t>>();
          report.details = r.at("details");
          report.status = "skipped";
          manifest.stages.push_back(std::move(report));
          std::clog << "stage " << to_string(stage) << " up to date, skipped\n";
          continue;
        }
      }
      // A stale stamp must not survive a failed re-run.
      fs::remove(stamp_path(st, stage));
      std::clog << "stage " << to_string(stage) << " running\n";
      const std::size_t drops_before = st.drops.size();
      run_stage(st, stage, report);
      report.status = "ok";
      json stage_drops = json::array();
      for (std::size_t i = drops_before; i < st.drops.size(); ++i) {
        stage_drops.push_back(drop_to_json(st.drops[i]));
      }
      json stamp{{"inputs", inputs},
                 {"outputs", stage_output_digests(st, stage)},
                 {"report", report.to_json()},
                 {"drops", std::move(stage_drops)}};
      write_file_atomic(stamp_path(st, stage), stamp.dump(2) + "\n");
      manifest.stages.push_back(std::move(report));
    } catch (const Error& e) {
      report.status = "failed";
      report.error = e.what();
      manifest.stages.push_back(std::move(report));
      finish(false);
      throw;
    } catch (const std::exception& e) {
      report.status = "failed";
      report.error = e.what();
      manifest.stages.push_back(std::move(report));
      finish(false);
      throw Error(ErrorKind::kInternal, std::string(to_string(stage)) + ": " + e.what());
    }
  }
  finish(true);
  return manifest;
}

}  // namespace infolabel

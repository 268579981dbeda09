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


#include "infolabel/trace.hpp"

#include <algorithm>
#include <array>
#include <iostream>
#include <set>
#include <unordered_map>

#include "infolabel/error.hpp"
#include "infolabel/util.hpp"

namespace infolabel {

const char* to_string(Domain domain) {
  switch (domain) {
    case Domain::kMath: return "math";
    case Domain::kPython: return "python";
    case Domain::kSql: return "sql";
    case Domain::kQa: return "qa";
    case Domain::kOther: return "other";
  }
  return "other";
}

Domain parse_domain(std::string_view name) {
  if (name == "math") return Domain::kMath;
  if (name == "python") return Domain::kPython;
  if (name == "sql") return Domain::kSql;
  if (name == "qa") return Domain::kQa;
  if (name == "other") return Domain::kOther;
  throw Error(ErrorKind::kData, "unknown domain '" + std::string(name) + "'");
}

void GenerationConfig::check() const {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::kConfig, "temperature must be > 0");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw Error(ErrorKind::kConfig, "top_p must be in (0, 1]");
  }
  if (samples_per_problem < 1) {
    throw Error(ErrorKind::kConfig, "samples_per_problem must be >= 1");
  }
}

namespace {

std::optional<std::string> last_dollar_span(std::string_view text) {
  // Delimiters are single '$' or "$$"; escaped "\$" is literal.
  std::vector<std::pair<std::size_t, std::size_t>> delims;  // (begin, end)
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '$') continue;
    if (i > 0 && text[i - 1] == '\\') continue;
    std::size_t len = (i + 1 < text.size() && text[i + 1] == '$') ? 2 : 1;
    delims.emplace_back(i, i + len);
    i += len - 1;
  }
  std::optional<std::string> last;
  for (std::size_t p = 0; p + 1 < delims.size(); p += 2) {
    std::size_t b = delims[p].second;
    std::size_t e = delims[p + 1].first;
    std::string content = trim(text.substr(b, e - b));
    if (!content.empty()) last = std::move(content);
  }
  return last;
}

bool is_language_tag(std::string_view line) {
  static constexpr std::array<std::string_view, 22> kTags = {
      "python", "python3", "py",   "sql",        "sqlite", "mysql",
      "postgresql", "bash", "sh",  "shell",      "c",      "cpp",
      "c++",    "java",   "javascript", "js",    "typescript", "ts",
      "json",   "text",   "plaintext",  "txt"};
  std::string tag = to_lower(trim(line));
  return std::find(kTags.begin(), kTags.end(), tag) != kTags.end();
}

std::optional<std::string> last_fence(std::string_view text) {
  static constexpr std::string_view kFence = "```";
  std::vector<std::size_t> marks;
  for (std::size_t pos = text.find(kFence); pos != std::string_view::npos;
       pos = text.find(kFence, pos + kFence.size())) {
    marks.push_back(pos);
  }
  std::optional<std::string> last;
  for (std::size_t p = 0; p + 1 < marks.size(); p += 2) {
    std::size_t b = marks[p] + kFence.size();
    std::string_view body = text.substr(b, marks[p + 1] - b);
    std::size_t nl = body.find('\n');
    if (nl != std::string_view::npos) {
      std::string_view first = body.substr(0, nl);
      if (trim(first).empty() || is_language_tag(first)) {
        body.remove_prefix(nl + 1);
      }
    }
    // Leading blank lines and trailing whitespace only; indentation of the
    // first code line is significant.
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ' ||
                             body.back() == '\t' || body.back() == '\r')) {
      body.remove_suffix(1);
    }
    while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) {
      body.remove_prefix(1);
    }
    if (!trim(body).empty()) last = std::string(body);
  }
  return last;
}

}  // namespace

std::optional<std::string> extract_answer(std::string_view step_text,
                                          Domain domain) {
  if (uses_dollar_wrapper(domain)) return last_dollar_span(step_text);
  return last_fence(step_text);
}

ReasoningTrace parse_trace(std::string_view raw, Domain domain) {
  ReasoningTrace trace;
  trace.raw_text = std::string(raw);
  std::size_t begin = 0;
  while (true) {
    std::size_t pos = raw.find(kStepDelimiter, begin);
    std::string_view segment = raw.substr(
        begin, pos == std::string_view::npos ? std::string_view::npos
                                             : pos - begin);
    std::string step = trim(segment);
    if (!step.empty()) trace.steps.push_back(std::move(step));
    if (pos == std::string_view::npos) break;
    begin = pos + kStepDelimiter.size();
  }
  if (trace.steps.empty()) {
    throw Error(ErrorKind::kData, "empty trace text");
  }
  trace.final_answer = extract_answer(trace.steps.back(), domain);
  trace.parse_ok = trace.final_answer.has_value();
  return trace;
}

std::string render_steps(const std::vector<std::string>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += " [STEP] ";
    out += steps[i];
  }
  return out;
}

std::string normalize_answer(std::string_view answer, Domain domain) {
  std::string collapsed = collapse_whitespace(trim(answer));
  if (domain == Domain::kMath) {
    if (auto canon = canonical_number(collapsed)) return *canon;
  }
  return collapsed;
}

Validator spec_validator() {
  return [](const Problem& problem, std::string_view candidate) {
    return validate(problem.validator, candidate, problem);
  };
}

AnswerPool build_answer_pool(const Problem& problem,
                             std::span<ReasoningTrace> traces,
                             const Validator& validator) {
  AnswerPool pool;
  pool.problem_id = problem.id;
  struct Entry {
    bool correct;
    std::size_t index;  // into pool.correct or pool.wrong
    bool error;
  };
  std::unordered_map<std::string, Entry> seen;
  for (ReasoningTrace& trace : traces) {
    if (!trace.parse_ok || !trace.final_answer) continue;
    const std::string key = normalize_answer(*trace.final_answer, problem.domain);
    auto it = seen.find(key);
    if (it == seen.end()) {
      Validation v = validator(problem, *trace.final_answer);
      Entry entry{v.correct(), 0, v.is_error()};
      if (entry.correct) {
        entry.index = pool.correct.size();
        pool.correct.push_back(*trace.final_answer);
        pool.correct_counts.push_back(0);
      } else {
        entry.index = pool.wrong.size();
        pool.wrong.push_back(*trace.final_answer);
        pool.wrong_counts.push_back(0);
        if (entry.error) {
          pool.flagged.push_back(*trace.final_answer);
          std::clog << "validator_error problem=" << problem.id
                    << " trace=" << trace.trace_id << " diagnostic=\""
                    << v.diagnostic << "\"\n";
        }
      }
      it = seen.emplace(key, entry).first;
    }
    const Entry& entry = it->second;
    if (entry.correct) {
      ++pool.correct_counts[entry.index];
    } else {
      ++pool.wrong_counts[entry.index];
    }
    trace.correct = entry.correct;
    trace.validator_error = entry.error;
  }
  return pool;
}

WorkingSet filter_and_subsample(
    const std::vector<Problem>& problems,
    const std::map<std::string, std::vector<ReasoningTrace>>& traces_by_problem,
    std::size_t k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorKind::kPrecondition, "k must be >= 1");
  WorkingSet out;
  for (const Problem& problem : problems) {
    auto found = traces_by_problem.find(problem.id);
    std::vector<ReasoningTrace> parsed;
    if (found != traces_by_problem.end()) {
      for (const ReasoningTrace& trace : found->second) {
        if (!trace.parse_ok) {
          out.dropped.push_back({"filter", problem.id, trace.trace_id,
                                 "parse_failed"});
          continue;
        }
        if (!trace.correct.has_value()) {
          throw Error(ErrorKind::kPrecondition,
                      "trace " + trace.trace_id + " was not validated");
        }
        parsed.push_back(trace);
      }
    }
    if (parsed.empty()) {
      out.dropped.push_back({"filter", problem.id, "", "no_parsed_traces"});
      continue;
    }
    std::vector<std::size_t> correct_idx;
    std::vector<std::size_t> wrong_idx;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      (*parsed[i].correct ? correct_idx : wrong_idx).push_back(i);
    }
    if (wrong_idx.empty()) {
      out.dropped.push_back({"filter", problem.id, "", "all_correct"});
      continue;
    }

    Rng rng(derive_seed(seed, problem.id));
    rng.shuffle(correct_idx);
    rng.shuffle(wrong_idx);
    const std::size_t target = std::min(k, parsed.size());
    std::vector<std::size_t> keep;
    keep.reserve(target);
    std::size_t next_correct = 0;
    if (!correct_idx.empty()) keep.push_back(correct_idx[next_correct++]);
    for (std::size_t w = 0; w < wrong_idx.size() && keep.size() < target; ++w) {
      keep.push_back(wrong_idx[w]);
    }
    // Not enough wrong traces: top up with further correct ones.
    while (keep.size() < target && next_correct < correct_idx.size()) {
      keep.push_back(correct_idx[next_correct++]);
    }
    std::sort(keep.begin(), keep.end());

    ProblemTraces item;
    item.problem = problem;
    for (std::size_t i : keep) item.traces.push_back(std::move(parsed[i]));
    out.items.push_back(std::move(item));
  }
  return out;
}

nlohmann::json to_json(const Problem& problem) {
  return nlohmann::json{{"id", problem.id},
                        {"domain", to_string(problem.domain)},
                        {"question", problem.question},
                        {"gold_answer", problem.gold_answer},
                        {"validator", to_json(problem.validator)}};
}

Problem problem_from_json(const nlohmann::json& j,
                          const std::filesystem::path& base_dir) {
  Problem p;
  try {
    p.id = j.at("id").get<std::string>();
    p.domain = parse_domain(j.at("domain").get<std::string>());
    p.question = j.at("question").get<std::string>();
    p.gold_answer = j.at("gold_answer").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad problem record: ") + e.what());
  }
  if (p.id.empty()) throw Error(ErrorKind::kData, "problem id is empty");
  if (p.gold_answer.empty()) {
    throw Error(ErrorKind::kData, "problem " + p.id + " has empty gold_answer");
  }
  p.validator = j.contains("validator")
                    ? validator_spec_from_json(j.at("validator"), base_dir)
                    : default_validator_for(p.domain);
  return p;
}

nlohmann::json to_json(const ReasoningTrace& trace) {
  nlohmann::json j{{"problem_id", trace.problem_id},
                   {"trace_id", trace.trace_id},
                   {"steps", trace.steps},
                   {"final_answer", nullptr},
                   {"parse_ok", trace.parse_ok},
                   {"correct", nullptr}};
  if (trace.final_answer) j["final_answer"] = *trace.final_answer;
  if (trace.correct) j["correct"] = *trace.correct;
  if (trace.validator_error) j["validator_error"] = true;
  return j;
}

ReasoningTrace trace_from_json(const nlohmann::json& j) {
  ReasoningTrace t;
  try {
    t.problem_id = j.at("problem_id").get<std::string>();
    t.trace_id = j.at("trace_id").get<std::string>();
    if (j.contains("raw_text")) t.raw_text = j.at("raw_text").get<std::string>();
    if (j.contains("steps")) {
      t.steps = j.at("steps").get<std::vector<std::string>>();
      if (j.contains("final_answer") && !j.at("final_answer").is_null()) {
        t.final_answer = j.at("final_answer").get<std::string>();
      }
      t.parse_ok = j.value("parse_ok", t.final_answer.has_value());
      if (j.contains("correct") && !j.at("correct").is_null()) {
        t.correct = j.at("correct").get<bool>();
      }
      t.validator_error = j.value("validator_error", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad trace record: ") + e.what());
  }
  if (t.parse_ok != t.final_answer.has_value()) {
    throw Error(ErrorKind::kData,
                "trace " + t.trace_id + ": parse_ok disagrees with final_answer");
  }
  return t;
}

nlohmann::json to_json(const AnswerPool& pool) {
  return nlohmann::json{{"problem_id", pool.problem_id},
                        {"correct", pool.correct},
                        {"wrong", pool.wrong},
                        {"correct_counts", pool.correct_counts},
                        {"wrong_counts", pool.wrong_counts},
                        {"flagged", pool.flagged}};
}

AnswerPool pool_from_json(const nlohmann::json& j) {
  AnswerPool pool;
  try {
    pool.problem_id = j.at("problem_id").get<std::string>();
    pool.correct = j.at("correct").get<std::vector<std::string>>();
    pool.wrong = j.at("wrong").get<std::vector<std::string>>();
    pool.correct_counts = j.value("correct_counts",
                                  std::vector<std::size_t>(pool.correct.size(), 1));
    pool.wrong_counts =
        j.value("wrong_counts", std::vector<std::size_t>(pool.wrong.size(), 1));
    pool.flagged = j.value("flagged", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad pool record: ") + e.what());
  }
  return pool;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::vector<Problem> problems;
  std::set<std::string> ids;
  const auto base = path.parent_path();
  for (const JsonlLine& line : read_jsonl_lines(path)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line.text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kData, path.string() + ":" +
                                        std::to_string(line.line_no) + ": " +
                                        e.what());
    }
    Problem p = problem_from_json(j, base);
    if (!ids.insert(p.id).second) {
      throw Error(ErrorKind::kData, "duplicate problem id " + p.id);
    }
    problems.push_back(std::move(p));
  }
  return problems;
}

std::vector<ReasoningTrace> load_traces(const std::filesystem::path& path) {
  std::vector<ReasoningTrace> traces;
  for (const JsonlLine& line : read_jsonl_lines(path)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line.text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kData, path.string() + ":" +
                                        std::to_string(line.line_no) + ": " +
                                        e.what());
    }
    traces.push_back(trace_from_json(j));
  }
  return traces;
}

}  // namespace infolabel

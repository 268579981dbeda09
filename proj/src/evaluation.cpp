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


#include "infolabel/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "infolabel/error.hpp"
#include "infolabel/util.hpp"

namespace infolabel {

double step_product_score(std::span<const double> step_probs) {
  double product = 1.0;
  for (double p : step_probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::kData, "step probability outside [0, 1]");
    }
    product *= p;
  }
  return product;
}

namespace {

int validate_selected(const Problem& problem, const ReasoningTrace& trace,
                      const Validator& validator) {
  if (!trace.parse_ok || !trace.final_answer) return 0;
  Validation v = validator(problem, *trace.final_answer);
  return v.correct() ? 1 : 0;
}

BestOfKReport finish(std::vector<ProblemOutcome> outcomes, std::size_t k,
                     const std::string& scorer_id) {
  std::sort(outcomes.begin(), outcomes.end(),
            [](const ProblemOutcome& a, const ProblemOutcome& b) {
              return a.problem_id < b.problem_id;
            });
  BestOfKReport report;
  report.k = k;
  report.scorer_id = scorer_id;
  std::size_t successes = 0;
  for (const ProblemOutcome& o : outcomes) successes += static_cast<std::size_t>(o.success);
  report.accuracy = outcomes.empty()
                        ? 0.0
                        : static_cast<double>(successes) / static_cast<double>(outcomes.size());
  report.per_problem = std::move(outcomes);
  return report;
}

}  // namespace

BestOfKReport best_of_k(std::span<const ProblemTraces> problems,
                        const TraceScorer& scorer, const std::string& scorer_id,
                        std::size_t k, const Validator& validator) {
  if (k < 1) throw Error(ErrorKind::kPrecondition, "K must be >= 1");
  std::vector<ProblemOutcome> outcomes;
  outcomes.reserve(problems.size());
  for (const ProblemTraces& item : problems) {
    if (item.traces.empty()) {
      throw Error(ErrorKind::kPrecondition,
                  "problem " + item.problem.id + " has no candidates");
    }
    const std::size_t limit = std::min(k, item.traces.size());
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t c = 0; c < limit; ++c) {
      double score;
      try {
        score = scorer(item.problem, item.traces[c]);
        if (std::isnan(score)) score = std::numeric_limits<double>::lowest();
      } catch (const std::exception&) {
        score = std::numeric_limits<double>::lowest();
      }
      if (c == 0 || score > best_score) {
        best = c;
        best_score = score;
      }
    }
    const ReasoningTrace& chosen = item.traces[best];
    outcomes.push_back({item.problem.id, chosen.trace_id,
                        validate_selected(item.problem, chosen, validator)});
  }
  return finish(std::move(outcomes), k, scorer_id);
}

std::optional<MajorityChoice> majority_vote(std::span<const ReasoningTrace> candidates,
                                            Domain domain) {
  struct Group {
    std::size_t first;
    std::size_t votes;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ReasoningTrace& t = candidates[i];
    if (!t.parse_ok || !t.final_answer) continue;
    const std::string key = normalize_answer(*t.final_answer, domain);
    auto [it, inserted] = by_key.emplace(key, groups.size());
    if (inserted) groups.push_back({i, 0});
    ++groups[it->second].votes;
  }
  if (groups.empty()) return std::nullopt;
  // Groups are already in order of first appearance, so the first maximum
  // wins ties.
  const Group* winner = &groups.front();
  for (const Group& g : groups) {
    if (g.votes > winner->votes) winner = &g;
  }
  return MajorityChoice{*candidates[winner->first].final_answer, winner->first,
                        winner->votes};
}

BestOfKReport majority_baseline(std::span<const ProblemTraces> problems,
                                std::size_t k, const Validator& validator) {
  if (k < 1) throw Error(ErrorKind::kPrecondition, "K must be >= 1");
  std::vector<ProblemOutcome> outcomes;
  for (const ProblemTraces& item : problems) {
    const std::size_t limit = std::min(k, item.traces.size());
    auto choice = majority_vote(
        std::span<const ReasoningTrace>(item.traces.data(), limit), item.problem.domain);
    if (!choice) {
      outcomes.push_back({item.problem.id, "", 0});
      continue;
    }
    const ReasoningTrace& chosen = item.traces[choice->trace_index];
    outcomes.push_back({item.problem.id, chosen.trace_id,
                        validate_selected(item.problem, chosen, validator)});
  }
  return finish(std::move(outcomes), k, "majority");
}

std::string trace_key(std::string_view problem_id, std::string_view trace_id) {
  std::string key(problem_id);
  key.push_back('\x1f');
  key += trace_id;
  return key;
}

TraceScorer oracle_scorer(const Validator& validator) {
  return [validator](const Problem& p, const ReasoningTrace& t) -> double {
    return validate_selected(p, t, validator);
  };
}

TraceScorer random_scorer(std::uint64_t seed) {
  return [seed](const Problem& p, const ReasoningTrace& t) -> double {
    Rng rng(derive_seed(seed, trace_key(p.id, t.trace_id)));
    return rng.uniform();
  };
}

TraceScorer label_product_scorer(std::map<std::string, StepLabels> labels) {
  return [labels = std::move(labels)](const Problem& p, const ReasoningTrace& t) {
    auto it = labels.find(trace_key(p.id, t.trace_id));
    if (it == labels.end()) {
      throw Error(ErrorKind::kData, "no labels for trace " + t.trace_id);
    }
    std::vector<double> probs(it->second.labels.begin(), it->second.labels.end());
    return step_product_score(probs);
  };
}

TraceScorer step_product_scorer(std::map<std::string, std::vector<double>> step_probs) {
  return [step_probs = std::move(step_probs)](const Problem& p, const ReasoningTrace& t) {
    auto it = step_probs.find(trace_key(p.id, t.trace_id));
    if (it == step_probs.end()) {
      throw Error(ErrorKind::kData, "no step scores for trace " + t.trace_id);
    }
    return step_product_score(it->second);
  };
}

TraceScorer orm_scorer(std::map<std::string, double> scores) {
  return [scores = std::move(scores)](const Problem& p, const ReasoningTrace& t) {
    auto it = scores.find(trace_key(p.id, t.trace_id));
    if (it == scores.end()) {
      throw Error(ErrorKind::kData, "no ORM score for trace " + t.trace_id);
    }
    return it->second;
  };
}

std::map<std::string, std::vector<double>> load_step_scores(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<double>> out;
  for (const JsonlLine& line : read_jsonl_lines(path)) {
    try {
      auto j = nlohmann::json::parse(line.text);
      out[trace_key(j.at("problem_id").get<std::string>(),
                    j.at("trace_id").get<std::string>())] =
          j.at("step_probs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kData, path.string() + ":" + std::to_string(line.line_no) +
                                        ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, double> load_orm_scores(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  for (const JsonlLine& line : read_jsonl_lines(path)) {
    try {
      auto j = nlohmann::json::parse(line.text);
      out[trace_key(j.at("problem_id").get<std::string>(),
                    j.at("trace_id").get<std::string>())] = j.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kData, path.string() + ":" + std::to_string(line.line_no) +
                                        ": " + e.what());
    }
  }
  return out;
}

nlohmann::json to_json(const BestOfKReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const ProblemOutcome& o : report.per_problem) {
    per.push_back({{"problem_id", o.problem_id},
                   {"selected_trace_id", o.selected_trace_id},
                   {"success", o.success}});
  }
  return nlohmann::json{{"K", report.k},
                        {"scorer_id", report.scorer_id},
                        {"accuracy", report.accuracy},
                        {"per_problem", std::move(per)}};
}

}  // namespace infolabel

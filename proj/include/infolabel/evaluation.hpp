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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "infolabel/infogain.hpp"
#include "infolabel/trace.hpp"

namespace infolabel {

struct TraceScore {
  std::string trace_id;
  double score = 0.0;
  std::string scorer_id;
};

struct ProblemOutcome {
  std::string problem_id;
  std::string selected_trace_id;  // empty when the problem abstained
  int success = 0;
};

struct BestOfKReport {
  std::size_t k = 0;
  std::string scorer_id;
  std::vector<ProblemOutcome> per_problem;  // sorted by problem id
  double accuracy = 0.0;
};

// Product of step probabilities over the whole trace; 1 for no steps.
// Throws Error(kData) for a value outside [0, 1].
double step_product_score(std::span<const double> step_probs);

// Higher is better. A scorer may throw; the candidate then gets the lowest
// possible score and is only picked if every candidate failed.
using TraceScorer = std::function<double(const Problem&, const ReasoningTrace&)>;

// Per problem: score the first K candidates in generation order, pick the
// maximum (ties to the lowest index) and validate its answer.
BestOfKReport best_of_k(std::span<const ProblemTraces> problems,
                        const TraceScorer& scorer, const std::string& scorer_id,
                        std::size_t k, const Validator& validator);

struct MajorityChoice {
  std::string answer;
  std::size_t trace_index = 0;  // first trace of the winning group
  std::size_t votes = 0;
};

// Plurality over normalize_answer groups of the parsed candidates; ties go to
// the group whose first member appears earliest. nullopt = abstain.
std::optional<MajorityChoice> majority_vote(std::span<const ReasoningTrace> candidates,
                                            Domain domain);

// Majority voting over the first K candidates, reported like best_of_k.
BestOfKReport majority_baseline(std::span<const ProblemTraces> problems,
                                std::size_t k, const Validator& validator);

// Key used by the score-file maps below.
std::string trace_key(std::string_view problem_id, std::string_view trace_id);

TraceScorer oracle_scorer(const Validator& validator);
TraceScorer random_scorer(std::uint64_t seed);
TraceScorer label_product_scorer(std::map<std::string, StepLabels> labels);
TraceScorer step_product_scorer(std::map<std::string, std::vector<double>> step_probs);
TraceScorer orm_scorer(std::map<std::string, double> scores);

// {problem_id, trace_id, step_probs} lines.
std::map<std::string, std::vector<double>> load_step_scores(
    const std::filesystem::path& path);
// {problem_id, trace_id, score} lines.
std::map<std::string, double> load_orm_scores(const std::filesystem::path& path);

nlohmann::json to_json(const BestOfKReport& report);

}  // namespace infolabel

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
#include <string_view>
#include <vector>

#include <json.hpp>

#include "infolabel/domain.hpp"
#include "infolabel/validators.hpp"

namespace infolabel {

inline constexpr std::string_view kStepDelimiter = "[STEP]";

struct Problem {
  std::string id;
  Domain domain = Domain::kMath;
  std::string question;
  std::string gold_answer;
  ValidatorSpec validator;
};

struct ReasoningTrace {
  std::string problem_id;
  std::string trace_id;
  std::vector<std::string> steps;
  std::string raw_text;
  std::optional<std::string> final_answer;
  bool parse_ok = false;
  // Validator outcome; set only on parsed traces after validation.
  std::optional<bool> correct;
  // The validator failed for infrastructure reasons; `correct` is false.
  bool validator_error = false;

  std::size_t num_steps() const { return steps.size(); }
};

// The full partition of one problem's sampled answers. Entries are
// deduplicated under normalize_answer; the first-seen spelling is kept and
// its multiplicity recorded alongside.
struct AnswerPool {
  std::string problem_id;
  std::vector<std::string> correct;
  std::vector<std::string> wrong;
  std::vector<std::size_t> correct_counts;
  std::vector<std::size_t> wrong_counts;
  // Answers recorded as wrong because validation itself failed.
  std::vector<std::string> flagged;
};

struct GenerationConfig {
  double temperature = 1.0;
  double top_p = 0.95;
  int samples_per_problem = 1;

  // Throws Error(kConfig) on temperature <= 0, top_p outside (0, 1] or
  // samples_per_problem < 1.
  void check() const;
};

// Content of the last $...$ span (math, qa, other) or the last ``` fence
// with its language-tag line removed (python, sql).
std::optional<std::string> extract_answer(std::string_view step_text,
                                          Domain domain);

// Splits on the literal "[STEP]", trims each segment and drops empty ones.
// Throws Error(kData) when no non-empty step remains.
ReasoningTrace parse_trace(std::string_view raw, Domain domain);

// Inverse of the step split: steps joined by " [STEP] ".
std::string render_steps(const std::vector<std::string>& steps);

// Dedup key for answers: trim + collapse whitespace, and numeric
// canonicalization for math.
std::string normalize_answer(std::string_view answer, Domain domain);

using Validator =
    std::function<Validation(const Problem&, std::string_view candidate)>;

// Validator that dispatches on problem.validator.
Validator spec_validator();

// Validates every distinct (normalized) parsed answer exactly once, records
// the outcome on each trace carrying that answer and returns the partition.
// Traces with parse_ok = false are left untouched and contribute nothing.
AnswerPool build_answer_pool(const Problem& problem,
                             std::span<ReasoningTrace> traces,
                             const Validator& validator);

struct ProblemTraces {
  Problem problem;
  std::vector<ReasoningTrace> traces;
};

struct DropRecord {
  std::string stage;
  std::string problem_id;
  std::string trace_id;  // empty when a whole problem is dropped
  std::string reason;
};

struct WorkingSet {
  std::vector<ProblemTraces> items;
  std::vector<DropRecord> dropped;
};

// Removes unparsed traces and all-correct problems, then keeps a seeded
// subsample of min(k, parsed) traces per problem that contains a correct
// trace whenever one exists. Kept traces stay in generation order.
WorkingSet filter_and_subsample(
    const std::vector<Problem>& problems,
    const std::map<std::string, std::vector<ReasoningTrace>>& traces_by_problem,
    std::size_t k, std::uint64_t seed);

// JSON / JSONL forms.
nlohmann::json to_json(const Problem& problem);
Problem problem_from_json(const nlohmann::json& j,
                          const std::filesystem::path& base_dir);
nlohmann::json to_json(const ReasoningTrace& trace);
ReasoningTrace trace_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnswerPool& pool);
AnswerPool pool_from_json(const nlohmann::json& j);

// Loads a problems file, checking ids are non-empty and unique and gold
// answers non-empty. Validator fixture paths resolve against the file's
// directory.
std::vector<Problem> load_problems(const std::filesystem::path& path);
std::vector<ReasoningTrace> load_traces(const std::filesystem::path& path);

}  // namespace infolabel

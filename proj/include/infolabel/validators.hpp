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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "infolabel/domain.hpp"

namespace infolabel {

struct Problem;

// Payloads, one per validator kind.
struct NumericEquivalence {
  std::string gold;  // empty: use the problem's gold answer
  double rel_tol = 1e-9;
};

struct NormalizedExact {
  std::string gold;  // empty: use the problem's gold answer
};

struct SqlExecution {
  std::filesystem::path fixture;  // .sql script or sqlite database file
  std::string gold_query;
  double timeout_s = 10.0;
};

struct ExternalCommand {
  // Shell command run inside a fresh sandbox directory. `{candidate}` is
  // replaced by the candidate file path, `{dir}` by the sandbox directory.
  std::string command;
  double timeout_s = 10.0;
  std::string candidate_file = "candidate.txt";
  // Support files (e.g. unit tests) written next to the candidate.
  std::map<std::string, std::string> files;
};

struct ValidatorSpec {
  std::variant<NumericEquivalence, SqlExecution, ExternalCommand,
               NormalizedExact>
      payload;

  const char* kind_name() const;
};

// Relative fixture paths are resolved against `base_dir`.
ValidatorSpec validator_spec_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir);
nlohmann::json to_json(const ValidatorSpec& spec);
ValidatorSpec default_validator_for(Domain domain);

// Outcome of one validation. kError is an infrastructure failure (missing
// fixture, command not found) and is never conflated with a wrong answer.
enum class Verdict { kWrong, kCorrect, kError };

struct Validation {
  Verdict verdict = Verdict::kWrong;
  bool timed_out = false;
  std::string diagnostic;

  bool correct() const { return verdict == Verdict::kCorrect; }
  bool is_error() const { return verdict == Verdict::kError; }
};

Validation validate(const ValidatorSpec& spec, std::string_view candidate,
                    const Problem& problem);

// Numbers: integers, decimals, p/q, \frac{p}{q}; surrounding $ stripped.
struct ParsedNumber {
  double value = 0.0;
  // Reduced numerator/denominator when the text is an exact rational that
  // fits in 64 bits.
  std::optional<std::pair<long long, long long>> exact;
};
std::optional<ParsedNumber> parse_number(std::string_view text);

// Canonical spelling of a number ("1/2" and "0.5" both give "1/2").
std::optional<std::string> canonical_number(std::string_view text);

bool numeric_equivalent(std::string_view a, std::string_view b,
                        double rel_tol = 1e-9);

// Lowercase, ASCII punctuation removed, whitespace collapsed.
std::string normalize_text_answer(std::string_view text);

Validation sql_equivalent(std::string_view candidate_query,
                          std::string_view gold_query,
                          const std::filesystem::path& fixture,
                          double timeout_s = 10.0);

// True when the query's outermost statement carries an ORDER BY clause.
bool has_top_level_order_by(std::string_view query);

Validation run_external(const ExternalCommand& command,
                        std::string_view candidate);
Validation run_external(std::string_view command_template,
                        std::string_view candidate, double timeout_s);

// Process-wide knobs for run_external.
void set_external_concurrency(std::size_t max_children);
void set_sandbox_root(const std::filesystem::path& root);

}  // namespace infolabel

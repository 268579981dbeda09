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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "infolabel/scoring.hpp"
#include "infolabel/trace.hpp"

namespace infolabel {

enum class Method { kIG, kMCNIG };
enum class Aggregation { kMax, kMean };
enum class Reference { kStep0, kPrevious };

const char* to_string(Method m);
const char* to_string(Aggregation a);
const char* to_string(Reference r);
Method parse_method(std::string_view s);
Aggregation parse_aggregation(std::string_view s);
Reference parse_reference(std::string_view s);

// Per-step signal for steps 1..N (values[0] is step 1).
struct StepSignal {
  std::string problem_id;
  std::string trace_id;
  Method method = Method::kMCNIG;
  Aggregation aggregation = Aggregation::kMax;
  Reference reference = Reference::kStep0;
  std::vector<double> values;
};

struct StepLabels {
  std::string problem_id;
  std::string trace_id;
  std::vector<int> labels;  // each 0 or 1
  double threshold = 0.0;
};

// IG_i = I_i(gold) - I_0(gold). Throws Error(kConfig) if gold was not scored.
StepSignal ig_signal(const InformationProfile& profile,
                     std::string_view gold_answer);

// max (or mean) over a non-empty set of values.
double aggregate(std::span<const double> values, Aggregation aggregation);

// NetInfo_i for i = 0..N: aggregate over the correct answers' columns minus
// aggregate over the wrong answers' columns. Throws Error(kUndefined) when
// either side of the pool is empty and Error(kConfig) when a pool answer has
// no profile column.
std::vector<double> net_info(const InformationProfile& profile,
                             const AnswerPool& pool, Aggregation aggregation);

// MCNIG over the full 0..N range; element 0 is 0 under the step0 reference.
std::vector<double> mcnig_extended(const std::vector<double>& net,
                                   Reference reference);

StepSignal mcnig_signal(const InformationProfile& profile,
                        const AnswerPool& pool,
                        Aggregation aggregation = Aggregation::kMax,
                        Reference reference = Reference::kStep0);

// labels[i] = 1 iff values[i] > threshold (strict).
StepLabels assign_labels(const StepSignal& signal, double threshold);

// Profile columns for a problem: pool answers first (correct, then wrong),
// then the gold answer if it is not already present verbatim.
std::vector<std::string> profile_answers(const Problem& problem,
                                         const AnswerPool& pool);

nlohmann::json to_json(const StepSignal& signal, const StepLabels* labels);
StepSignal signal_from_json(const nlohmann::json& j);
StepLabels labels_from_json(const nlohmann::json& j);

}  // namespace infolabel

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


#include "infolabel/infogain.hpp"

#include <algorithm>
#include <cmath>

#include "infolabel/error.hpp"

namespace infolabel {

const char* to_string(Method m) { return m == Method::kIG ? "IG" : "MCNIG"; }
const char* to_string(Aggregation a) {
  return a == Aggregation::kMax ? "max" : "mean";
}
const char* to_string(Reference r) {
  return r == Reference::kStep0 ? "step0" : "previous";
}

Method parse_method(std::string_view s) {
  if (s == "ig" || s == "IG") return Method::kIG;
  if (s == "mcnig" || s == "MCNIG") return Method::kMCNIG;
  throw Error(ErrorKind::kConfig, "unknown method '" + std::string(s) + "'");
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  throw Error(ErrorKind::kConfig, "unknown aggregation '" + std::string(s) + "'");
}

Reference parse_reference(std::string_view s) {
  if (s == "step0") return Reference::kStep0;
  if (s == "previous") return Reference::kPrevious;
  throw Error(ErrorKind::kConfig, "unknown reference '" + std::string(s) + "'");
}

StepSignal ig_signal(const InformationProfile& profile,
                     std::string_view gold_answer) {
  auto col = profile.column(gold_answer);
  if (!col) {
    throw Error(ErrorKind::kConfig, "gold answer was not scored in profile for " +
                                        profile.trace_id);
  }
  StepSignal s;
  s.problem_id = profile.problem_id;
  s.trace_id = profile.trace_id;
  s.method = Method::kIG;
  const double base = profile.values.at(0)[*col];
  for (std::size_t i = 1; i < profile.values.size(); ++i) {
    s.values.push_back(profile.values[i][*col] - base);
  }
  return s;
}

double aggregate(std::span<const double> values, Aggregation aggregation) {
  if (values.empty()) {
    throw Error(ErrorKind::kUndefined, "aggregate over an empty set");
  }
  if (aggregation == Aggregation::kMax) {
    return *std::max_element(values.begin(), values.end());
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

namespace {

std::vector<std::size_t> columns_of(const InformationProfile& profile,
                                    const std::vector<std::string>& answers) {
  std::vector<std::size_t> cols;
  for (const std::string& a : answers) {
    auto c = profile.column(a);
    if (!c) {
      throw Error(ErrorKind::kConfig, "pool answer '" + a +
                                          "' missing from profile of " +
                                          profile.trace_id);
    }
    cols.push_back(*c);
  }
  return cols;
}

}  // namespace

std::vector<double> net_info(const InformationProfile& profile,
                             const AnswerPool& pool, Aggregation aggregation) {
  if (pool.correct.empty() || pool.wrong.empty()) {
    throw Error(ErrorKind::kUndefined,
                "net information needs non-empty correct and wrong sets (problem " +
                    pool.problem_id + ")");
  }
  const auto correct_cols = columns_of(profile, pool.correct);
  const auto wrong_cols = columns_of(profile, pool.wrong);
  std::vector<double> out;
  out.reserve(profile.values.size());
  std::vector<double> buf;
  for (const auto& row : profile.values) {
    buf.clear();
    for (std::size_t c : correct_cols) buf.push_back(row[c]);
    const double good = aggregate(buf, aggregation);
    buf.clear();
    for (std::size_t c : wrong_cols) buf.push_back(row[c]);
    const double bad = aggregate(buf, aggregation);
    out.push_back(good - bad);
  }
  return out;
}

std::vector<double> mcnig_extended(const std::vector<double>& net,
                                   Reference reference) {
  std::vector<double> out(net.size(), 0.0);
  for (std::size_t i = 1; i < net.size(); ++i) {
    out[i] = reference == Reference::kStep0 ? net[i] - net[0] : net[i] - net[i - 1];
  }
  if (!net.empty()) out[0] = net[0] - net[0];
  return out;
}

StepSignal mcnig_signal(const InformationProfile& profile,
                        const AnswerPool& pool, Aggregation aggregation,
                        Reference reference) {
  const auto extended = mcnig_extended(net_info(profile, pool, aggregation), reference);
  StepSignal s;
  s.problem_id = profile.problem_id;
  s.trace_id = profile.trace_id;
  s.method = Method::kMCNIG;
  s.aggregation = aggregation;
  s.reference = reference;
  s.values.assign(extended.begin() + 1, extended.end());
  return s;
}

StepLabels assign_labels(const StepSignal& signal, double threshold) {
  StepLabels out;
  out.problem_id = signal.problem_id;
  out.trace_id = signal.trace_id;
  out.threshold = threshold;
  out.labels.reserve(signal.values.size());
  for (double v : signal.values) out.labels.push_back(v > threshold ? 1 : 0);
  return out;
}

std::vector<std::string> profile_answers(const Problem& problem,
                                         const AnswerPool& pool) {
  std::vector<std::string> answers = pool.correct;
  answers.insert(answers.end(), pool.wrong.begin(), pool.wrong.end());
  if (std::find(answers.begin(), answers.end(), problem.gold_answer) ==
      answers.end()) {
    answers.push_back(problem.gold_answer);
  }
  return answers;
}

nlohmann::json to_json(const StepSignal& signal, const StepLabels* labels) {
  nlohmann::json j{{"problem_id", signal.problem_id},
                   {"trace_id", signal.trace_id},
                   {"method", to_string(signal.method)},
                   {"aggregation", to_string(signal.aggregation)},
                   {"reference", to_string(signal.reference)},
                   {"values", signal.values}};
  if (labels) {
    j["labels"] = labels->labels;
    j["threshold"] = labels->threshold;
  }
  return j;
}

StepSignal signal_from_json(const nlohmann::json& j) {
  StepSignal s;
  try {
    s.problem_id = j.at("problem_id").get<std::string>();
    s.trace_id = j.at("trace_id").get<std::string>();
    s.method = parse_method(j.at("method").get<std::string>());
    s.aggregation = parse_aggregation(j.value("aggregation", std::string("max")));
    s.reference = parse_reference(j.value("reference", std::string("step0")));
    s.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad signal record: ") + e.what());
  }
  return s;
}

StepLabels labels_from_json(const nlohmann::json& j) {
  StepLabels l;
  try {
    l.problem_id = j.at("problem_id").get<std::string>();
    l.trace_id = j.at("trace_id").get<std::string>();
    l.labels = j.at("labels").get<std::vector<int>>();
    l.threshold = j.at("threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("bad labels record: ") + e.what());
  }
  for (int v : l.labels) {
    if (v != 0 && v != 1) throw Error(ErrorKind::kData, "label outside {0,1}");
  }
  return l;
}

}  // namespace infolabel

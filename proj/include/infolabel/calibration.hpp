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

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "infolabel/domain.hpp"
#include "infolabel/infogain.hpp"

namespace infolabel {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t total() const { return tp + fn + tn + fp; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Trace-level prediction: product of the step labels, leaving out the final
// step when exclude_final is set. A one-step trace under exclusion is the
// empty product, 1. Throws Error(kPrecondition) for empty labels.
int cot_predicted_label(const StepLabels& labels, bool exclude_final = true);

// (TPR + TNR) / 2. Throws Error(kUndefined) when a class is absent.
double balanced_accuracy(const ConfusionCounts& c);

struct SweepRow {
  double threshold = 0.0;
  ConfusionCounts counts;
  std::optional<double> balanced_accuracy;  // empty: metric undefined, skipped
};

struct ThresholdSweep {
  Domain domain = Domain::kOther;
  std::vector<double> grid;
  std::vector<SweepRow> table;
  double best_threshold = 0.0;
  double best_balanced_accuracy = 0.0;
  // Traces that were labelled through the empty-product rule.
  std::size_t single_step_traces = 0;
};

// For each threshold: label steps, take the trace-level product with
// final-step exclusion, compare to the validator truths. The best row is
// the highest balanced accuracy, ties going to the smallest threshold.
// Throws Error(kUndefined) if no threshold yields a defined metric.
ThresholdSweep sweep_threshold(std::span<const StepSignal> signals,
                               std::span<const int> truths,
                               std::span<const double> grid,
                               Domain domain = Domain::kOther);

// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

// `points` evenly spaced thresholds between the 1st and 99th percentiles of
// the step values that take part in trace-level predictions (all but the
// final step; every value if no trace has two steps).
std::vector<double> default_grid(std::span<const StepSignal> signals,
                                 std::size_t points = 256);

nlohmann::json to_json(const ThresholdSweep& sweep);

}  // namespace infolabel

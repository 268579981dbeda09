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


#include "infolabel/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "infolabel/error.hpp"

namespace infolabel {

int cot_predicted_label(const StepLabels& labels, bool exclude_final) {
  if (labels.labels.empty()) {
    throw Error(ErrorKind::kPrecondition, "cot_predicted_label needs labels");
  }
  std::size_t n = labels.labels.size();
  if (exclude_final) --n;
  int product = 1;
  for (std::size_t i = 0; i < n; ++i) product *= labels.labels[i];
  return product;
}

double balanced_accuracy(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw Error(ErrorKind::kUndefined,
                "balanced accuracy needs both positive and negative truths");
  }
  const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (tpr + tnr);
}

ThresholdSweep sweep_threshold(std::span<const StepSignal> signals,
                               std::span<const int> truths,
                               std::span<const double> grid, Domain domain) {
  if (signals.size() != truths.size()) {
    throw Error(ErrorKind::kPrecondition, "signals and truths are not aligned");
  }
  if (grid.empty()) throw Error(ErrorKind::kPrecondition, "empty threshold grid");

  ThresholdSweep sweep;
  sweep.domain = domain;
  sweep.grid.assign(grid.begin(), grid.end());
  for (const StepSignal& s : signals) {
    if (s.values.size() == 1) ++sweep.single_step_traces;
  }

  bool have_best = false;
  for (double tau : grid) {
    SweepRow row;
    row.threshold = tau;
    for (std::size_t t = 0; t < signals.size(); ++t) {
      const int predicted = cot_predicted_label(assign_labels(signals[t], tau), true);
      const bool truth = truths[t] != 0;
      if (truth) {
        (predicted ? row.counts.tp : row.counts.fn)++;
      } else {
        (predicted ? row.counts.fp : row.counts.tn)++;
      }
    }
    try {
      row.balanced_accuracy = balanced_accuracy(row.counts);
    } catch (const Error&) {
      row.balanced_accuracy.reset();
    }
    if (row.balanced_accuracy) {
      const double ba = *row.balanced_accuracy;
      if (!have_best || ba > sweep.best_balanced_accuracy ||
          (ba == sweep.best_balanced_accuracy && tau < sweep.best_threshold)) {
        sweep.best_balanced_accuracy = ba;
        sweep.best_threshold = tau;
        have_best = true;
      }
    }
    sweep.table.push_back(row);
  }
  if (!have_best) {
    throw Error(ErrorKind::kUndefined,
                std::string("balanced accuracy undefined at every threshold for domain ") +
                    to_string(domain));
  }
  return sweep;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kUndefined, "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 *
                     static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> default_grid(std::span<const StepSignal> signals,
                                 std::size_t points) {
  std::vector<double> pooled;
  for (const StepSignal& s : signals) {
    if (s.values.size() >= 2) pooled.insert(pooled.end(), s.values.begin(), s.values.end() - 1);
  }
  if (pooled.empty()) {
    for (const StepSignal& s : signals) {
      pooled.insert(pooled.end(), s.values.begin(), s.values.end());
    }
  }
  if (pooled.empty()) throw Error(ErrorKind::kUndefined, "no signal values to grid");
  const double lo = percentile(pooled, 1.0);
  const double hi = percentile(pooled, 99.0);
  if (points <= 1 || hi <= lo) return {lo};
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return grid;
}

nlohmann::json to_json(const ThresholdSweep& sweep) {
  nlohmann::json table = nlohmann::json::array();
  for (const SweepRow& row : sweep.table) {
    nlohmann::json r{{"threshold", row.threshold},
                     {"tp", row.counts.tp},
                     {"fn", row.counts.fn},
                     {"tn", row.counts.tn},
                     {"fp", row.counts.fp},
                     {"balanced_accuracy", nullptr}};
    if (row.balanced_accuracy) {
      r["balanced_accuracy"] = *row.balanced_accuracy;
    } else {
      r["skipped"] = true;
    }
    table.push_back(std::move(r));
  }
  return nlohmann::json{{"domain", to_string(sweep.domain)},
                        {"grid", sweep.grid},
                        {"table", std::move(table)},
                        {"best_threshold", sweep.best_threshold},
                        {"best_balanced_accuracy", sweep.best_balanced_accuracy},
                        {"single_step_traces", sweep.single_step_traces}};
}

}  // namespace infolabel

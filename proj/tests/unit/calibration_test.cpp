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


#include <gtest/gtest.h>

#include "infolabel/calibration.hpp"
#include "infolabel/error.hpp"
#include "infolabel/util.hpp"
#include "test_support.hpp"

namespace infolabel {
namespace {

StepLabels labels_of(std::vector<int> l) {
  StepLabels s;
  s.labels = std::move(l);
  return s;
}

StepSignal signal_of(std::vector<double> v, std::string id = "t") {
  StepSignal s;
  s.problem_id = "p";
  s.trace_id = std::move(id);
  s.values = std::move(v);
  return s;
}

TEST(CotPrediction, ProductWithFinalExcluded) {
  EXPECT_EQ(cot_predicted_label(labels_of({1, 1, 0})), 1);
  EXPECT_EQ(cot_predicted_label(labels_of({1, 0, 1})), 0);
  EXPECT_EQ(cot_predicted_label(labels_of({0})), 1);
  EXPECT_EQ(cot_predicted_label(labels_of({1, 1, 0}), false), 0);
  EXPECT_THROW(cot_predicted_label(labels_of({})), Error);
}

TEST(BalancedAccuracy, Formula) {
  EXPECT_DOUBLE_EQ(balanced_accuracy({3, 1, 2, 2}), 0.625);
  EXPECT_EQ(balanced_accuracy({4, 0, 3, 0}), 1.0);
  EXPECT_EQ(balanced_accuracy({4, 0, 0, 4}), 0.5);
  EXPECT_THROW(balanced_accuracy({0, 0, 3, 1}), Error);
}

TEST(Sweep, TwoTraceFixture) {
  // The final step's value never enters a prediction.
  const std::vector<StepSignal> signals = {signal_of({0.5, 0.9, -9.0}, "A"),
                                           signal_of({0.2, -0.1, 9.0}, "B")};
  const std::vector<int> truths = {1, 0};
  const std::vector<double> grid = {0.3, 0.7};
  const auto sweep = sweep_threshold(signals, truths, grid);
  ASSERT_EQ(sweep.table.size(), 2u);
  EXPECT_EQ(*sweep.table[0].balanced_accuracy, 1.0);
  EXPECT_EQ(*sweep.table[1].balanced_accuracy, 0.5);
  EXPECT_EQ(sweep.best_threshold, 0.3);
  EXPECT_EQ(sweep.best_balanced_accuracy, 1.0);
}

TEST(Sweep, SingletonGrid) {
  const std::vector<StepSignal> signals = {signal_of({0.5, 1.0}), signal_of({0.1, 1.0})};
  const std::vector<int> truths = {1, 0};
  const std::vector<double> grid = {0.42};
  EXPECT_EQ(sweep_threshold(signals, truths, grid).best_threshold, 0.42);
}

TEST(Sweep, IdenticalSignalsGiveHalfAndSmallestThreshold) {
  const std::vector<StepSignal> signals = {signal_of({0.5, 0.0}), signal_of({0.5, 0.0}),
                                           signal_of({0.5, 0.0})};
  const std::vector<int> truths = {1, 0, 1};
  const std::vector<double> grid = {0.1, 0.4, 0.6, 0.9};
  const auto sweep = sweep_threshold(signals, truths, grid);
  for (const auto& row : sweep.table) EXPECT_EQ(*row.balanced_accuracy, 0.5);
  EXPECT_EQ(sweep.best_threshold, 0.1);
}

TEST(Sweep, OneClassIsUndefined) {
  const std::vector<StepSignal> signals = {signal_of({0.5, 0.0})};
  const std::vector<int> truths = {1};
  const std::vector<double> grid = {0.1};
  EXPECT_THROW(sweep_threshold(signals, truths, grid), Error);
}

TEST(Sweep, SingleStepTracesAreCounted) {
  const std::vector<StepSignal> signals = {signal_of({0.5}), signal_of({0.2, 0.1})};
  const std::vector<int> truths = {1, 0};
  const std::vector<double> grid = {0.0};
  EXPECT_EQ(sweep_threshold(signals, truths, grid).single_step_traces, 1u);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(percentile({1, 2, 3, 4, 5}, 50), 3.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 25), 2.5);
  EXPECT_EQ(percentile({7}, 99), 7.0);
}

TEST(DefaultGrid, SpansNonFinalValues) {
  std::vector<StepSignal> signals;
  for (int i = 0; i <= 100; ++i) signals.push_back(signal_of({i * 1.0, 1000.0}));
  const auto grid = default_grid(signals, 256);
  ASSERT_EQ(grid.size(), 256u);
  EXPECT_DOUBLE_EQ(grid.front(), 1.0);
  EXPECT_DOUBLE_EQ(grid.back(), 99.0);
  for (std::size_t i = 1; i < grid.size(); ++i) ASSERT_GT(grid[i], grid[i - 1]);
}

// Independent oracle: evaluates every threshold from scratch.
struct Exhaustive {
  double best_tau;
  double best_ba;
};

Exhaustive exhaustive_sweep(const std::vector<StepSignal>& signals, const std::vector<int>& truths,
                            const std::vector<double>& grid) {
  Exhaustive out{0.0, -1.0};
  for (double tau : grid) {
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t k = 0; k < signals.size(); ++k) {
      int pred = 1;
      const auto& v = signals[k].values;
      for (std::size_t i = 0; i + 1 < v.size(); ++i) pred &= v[i] > tau ? 1 : 0;
      if (truths[k]) {
        (pred ? tp : fn) += 1;
      } else {
        (pred ? fp : tn) += 1;
      }
    }
    if (tp + fn == 0 || tn + fp == 0) continue;
    const double ba = 0.5 * (tp / (tp + fn) + tn / (tn + fp));
    if (ba > out.best_ba) out = {tau, ba};
  }
  return out;
}

struct Instance {
  std::vector<StepSignal> signals;
  std::vector<int> truths;
  std::vector<double> grid;
};

Instance random_instance(Rng& rng) {
  Instance in;
  const std::size_t n = 2 + rng.below(30);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(1 + rng.below(6));
    for (double& x : v) x = std::round((rng.uniform() * 2 - 1) * 20) / 10;  // ties likely
    in.signals.push_back(signal_of(v, std::to_string(k)));
    in.truths.push_back(static_cast<int>(rng.below(2)));
  }
  in.truths[0] = 1;
  in.truths[1] = 0;
  for (std::size_t g = 0; g < 1 + rng.below(20); ++g) in.grid.push_back(rng.uniform() * 4 - 2);
  std::sort(in.grid.begin(), in.grid.end());
  return in;
}

TEST(SweepProperty, ArgmaxMatchesExhaustiveOracle) {
  Rng rng(41);
  for (int n = 0; n < 300; ++n) {
    const auto in = random_instance(rng);
    const auto sweep = sweep_threshold(in.signals, in.truths, in.grid);
    const auto oracle = exhaustive_sweep(in.signals, in.truths, in.grid);
    ASSERT_EQ(sweep.best_threshold, oracle.best_tau);
    ASSERT_EQ(sweep.best_balanced_accuracy, oracle.best_ba);
    double table_max = -1;
    for (const auto& row : sweep.table) {
      if (row.balanced_accuracy) table_max = std::max(table_max, *row.balanced_accuracy);
    }
    ASSERT_EQ(sweep.best_balanced_accuracy, table_max);
  }
}

// Property: predicted-positive traces nest as tau grows, so tp and fp never
// increase along the grid.
TEST(SweepProperty, PredictionsNestInThreshold) {
  Rng rng(43);
  for (int n = 0; n < 200; ++n) {
    const auto in = random_instance(rng);
    const auto sweep = sweep_threshold(in.signals, in.truths, in.grid);
    for (std::size_t i = 1; i < sweep.table.size(); ++i) {
      ASSERT_LE(sweep.table[i].counts.tp, sweep.table[i - 1].counts.tp);
      ASSERT_LE(sweep.table[i].counts.fp, sweep.table[i - 1].counts.fp);
    }
  }
}

TEST(SweepProperty, Deterministic) {
  Rng rng(47);
  const auto in = random_instance(rng);
  const auto a = to_json(sweep_threshold(in.signals, in.truths, in.grid)).dump();
  const auto b = to_json(sweep_threshold(in.signals, in.truths, in.grid)).dump();
  EXPECT_EQ(a, b);
}

TEST(BalancedAccuracyProperty, ConstantPredictorIsHalf) {
  Rng rng(53);
  for (int n = 0; n < 500; ++n) {
    const std::size_t pos = 1 + rng.below(50), neg = 1 + rng.below(50);
    ASSERT_EQ(balanced_accuracy({pos, 0, 0, neg}), 0.5);
    ASSERT_EQ(balanced_accuracy({0, pos, neg, 0}), 0.5);
  }
}

}  // namespace
}  // namespace infolabel

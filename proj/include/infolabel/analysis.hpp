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
#include <span>
#include <vector>

#include <json.hpp>

namespace infolabel {

// Token-cost model for labeling one chain of thought.
struct ComplexityParams {
  double n = 1;        // CoT steps
  double s_bar = 1;    // average tokens per step
  double m = 1;        // rollouts per prefix (rollout-based labelers)
  double s = 1;        // sampled candidate answers
  double t = 1;        // average answer tokens
  double q_len = 0;    // question tokens

  // Throws Error(kDomain) for n < 1 or negative sizes.
  void check() const;
};

enum class LogBase { kTwo, kNatural };

// M * s_bar * N(N-1)/2: rollouts from every prefix to the end.
double tokens_mathshepherd(const ComplexityParams& p);
// M * s_bar * (N/2) * log N, binary search over first-error positions.
// Throws Error(kDomain) for N < 2.
double tokens_omegaprm(const ComplexityParams& p, LogBase base = LogBase::kTwo);
// |q| + N * s_bar + (N + 1) * S * T: one prefix pass plus answer rescoring.
double tokens_mcnig(const ComplexityParams& p);

struct SubsampleStudy {
  std::vector<double> pool;
  std::size_t s = 1;
  std::size_t replicates = 0;
  double bias = 0.0;
  double variance = 0.0;
  bool exact = false;

  // Standard error of the bias estimate, sqrt(variance / replicates).
  double standard_error() const;
};

// Monte Carlo estimate: `replicates` seeded draws of s values without
// replacement; bias = mean(max) - max(pool), variance with 1/K
// normalization. Throws Error(kDomain) unless 1 <= s <= |pool|.
SubsampleStudy subsample_bias_variance(std::span<const double> pool,
                                       std::size_t s, std::size_t replicates,
                                       std::uint64_t seed);

struct ExactBias {
  double bias = 0.0;
  double variance = 0.0;
};

// Exact moments by enumerating every size-s subset. Throws Error(kDomain)
// when C(|pool|, s) exceeds 1e6.
ExactBias exhaustive_bias(std::span<const double> pool, std::size_t s);

// C(n, k) as a double (saturates rather than overflowing).
double binomial(std::size_t n, std::size_t k);

nlohmann::json to_json(const ComplexityParams& p);
nlohmann::json to_json(const SubsampleStudy& study);

}  // namespace infolabel

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


#include "infolabel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "infolabel/error.hpp"
#include "infolabel/util.hpp"

namespace infolabel {

void ComplexityParams::check() const {
  if (!(n >= 1)) throw Error(ErrorKind::kDomain, "N must be >= 1");
  if (s_bar < 0 || m < 0 || s < 0 || t < 0 || q_len < 0) {
    throw Error(ErrorKind::kDomain, "complexity parameters must be non-negative");
  }
}

double tokens_mathshepherd(const ComplexityParams& p) {
  p.check();
  return p.m * p.s_bar * (p.n * (p.n - 1.0) / 2.0);
}

double tokens_omegaprm(const ComplexityParams& p, LogBase base) {
  p.check();
  if (p.n < 2) throw Error(ErrorKind::kDomain, "OmegaPRM cost needs N >= 2");
  const double log_n = base == LogBase::kTwo ? std::log2(p.n) : std::log(p.n);
  return p.m * p.s_bar * (p.n / 2.0) * log_n;
}

double tokens_mcnig(const ComplexityParams& p) {
  p.check();
  return p.q_len + p.n * p.s_bar + (p.n + 1.0) * p.s * p.t;
}

double SubsampleStudy::standard_error() const {
  if (replicates == 0) return 0.0;
  return std::sqrt(variance / static_cast<double>(replicates));
}

namespace {

void check_subsample(std::span<const double> pool, std::size_t s) {
  if (pool.empty() || s < 1 || s > pool.size()) {
    throw Error(ErrorKind::kDomain, "subsample size must satisfy 1 <= s <= |pool|");
  }
}

struct Moments {
  double bias;
  double variance;
};

// Bias against the pool maximum and 1/K variance of the subsample maxima.
// Accumulates in long double so small rational cases round to the nearest
// double (e.g. exactly -1/3 and 2/9 for {1,2,3}, s = 2).
Moments max_moments(const std::vector<double>& maxima, double full_max) {
  const auto k = static_cast<long double>(maxima.size());
  long double mean_gap = 0.0L;
  for (double m : maxima) mean_gap += static_cast<long double>(m) - full_max;
  mean_gap /= k;
  long double var = 0.0L;
  for (double m : maxima) {
    const long double d = static_cast<long double>(m) - full_max - mean_gap;
    var += d * d;
  }
  var /= k;
  return {static_cast<double>(mean_gap), static_cast<double>(var)};
}

}  // namespace

SubsampleStudy subsample_bias_variance(std::span<const double> pool,
                                       std::size_t s, std::size_t replicates,
                                       std::uint64_t seed) {
  check_subsample(pool, s);
  if (replicates < 1) throw Error(ErrorKind::kDomain, "replicates must be >= 1");
  const double full_max = *std::max_element(pool.begin(), pool.end());
  std::vector<double> maxima(replicates);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t k = 0; k < replicates; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first s slots are a uniform s-subset.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(idx[i], idx[j]);
      best = std::max(best, pool[idx[i]]);
    }
    maxima[k] = best;
  }
  const Moments mom = max_moments(maxima, full_max);

  SubsampleStudy study;
  study.pool.assign(pool.begin(), pool.end());
  study.s = s;
  study.replicates = replicates;
  study.bias = mom.bias;
  study.variance = mom.variance;
  study.exact = false;
  return study;
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(r);
}

ExactBias exhaustive_bias(std::span<const double> pool, std::size_t s) {
  check_subsample(pool, s);
  const double count = binomial(pool.size(), s);
  if (count > 1e6) {
    throw Error(ErrorKind::kDomain, "too many subsets to enumerate (" +
                                        std::to_string(count) + ")");
  }
  const double full_max = *std::max_element(pool.begin(), pool.end());
  // Lexicographic walk over index combinations.
  std::vector<std::size_t> comb(s);
  std::iota(comb.begin(), comb.end(), 0);
  std::vector<double> maxima;
  maxima.reserve(static_cast<std::size_t>(count));
  const std::size_t n = pool.size();
  while (true) {
    double m = pool[comb[0]];
    for (std::size_t i = 1; i < s; ++i) m = std::max(m, pool[comb[i]]);
    maxima.push_back(m);
    std::size_t i = s;
    while (i > 0 && comb[i - 1] == n - s + (i - 1)) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < s; ++j) comb[j] = comb[j - 1] + 1;
  }
  const Moments mom = max_moments(maxima, full_max);
  return {mom.bias, mom.variance};
}

nlohmann::json to_json(const ComplexityParams& p) {
  return nlohmann::json{{"n", p.n}, {"s_bar", p.s_bar}, {"m", p.m},
                        {"big_s", p.s}, {"t", p.t}, {"q_len", p.q_len}};
}

nlohmann::json to_json(const SubsampleStudy& study) {
  const auto [lo, hi] = std::minmax_element(study.pool.begin(), study.pool.end());
  return nlohmann::json{
      {"pool_summary",
       {{"size", study.pool.size()},
        {"min", study.pool.empty() ? 0.0 : *lo},
        {"max", study.pool.empty() ? 0.0 : *hi}}},
      {"s", study.s},
      {"replicates", study.replicates},
      {"bias", study.bias},
      {"variance", study.variance},
      {"exact", study.exact}};
}

}  // namespace infolabel

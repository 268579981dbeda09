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


// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Expected values come from independent oracles written here, not
// from the library under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "infolabel/analysis.hpp"
#include "infolabel/calibration.hpp"
#include "infolabel/dataset.hpp"
#include "infolabel/error.hpp"
#include "infolabel/evaluation.hpp"
#include "infolabel/infogain.hpp"
#include "infolabel/pipeline.hpp"
#include "infolabel/scoring.hpp"
#include "infolabel/trace.hpp"
#include "infolabel/util.hpp"
#include "infolabel/validators.hpp"
#include "test_support.hpp"

namespace {

using namespace infolabel;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records the first failure only; later checks keep their side effects.
  void expect(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

StepSignal signal_of(std::vector<double> values, std::string id = "t") {
  StepSignal s;
  s.problem_id = "p";
  s.trace_id = std::move(id);
  s.values = std::move(values);
  return s;
}

AnswerPool pool_of(std::vector<std::string> c, std::vector<std::string> w) {
  AnswerPool p;
  p.problem_id = "p";
  p.correct = std::move(c);
  p.wrong = std::move(w);
  p.correct_counts.assign(p.correct.size(), 1);
  p.wrong_counts.assign(p.wrong.size(), 1);
  return p;
}

// ---------------------------------------------------------------------------
// 1. Information equals hand-summed log-probabilities.

using Table = std::map<std::string, std::map<std::string, double>>;

// Oracle tokenizer: at each position take the longest table token that
// matches, else one character at the fallback probability.
double oracle_information(const Table& table, double fallback, const std::string& context,
                          const std::string& answer) {
  double total = 0.0;
  std::size_t pos = 0;
  while (pos < answer.size()) {
    const std::string key = context + answer.substr(0, pos);
    std::string best;
    double p = fallback;
    auto row = table.find(key);
    if (row != table.end()) {
      for (const auto& [tok, prob] : row->second) {
        if (tok.size() > best.size() && answer.compare(pos, tok.size(), tok) == 0) {
          best = tok;
          p = prob;
        }
      }
    }
    if (best.empty()) best = answer.substr(pos, 1);
    total += std::max(std::log(p), -100.0);
    pos += best.size();
  }
  return total;
}

Outcome criterion_information() {
  Outcome out;
  const auto t0 = Clock::now();
  Rng rng(1001);
  const std::vector<std::string> vocab = {"a", "b", "c", "ab", "bc", "abc", "ca"};
  struct Case {
    Problem problem;
    std::vector<std::string> steps;
    std::string answer;
  };
  std::vector<Case> cases;
  Table table;
  const double fallback = 1e-3;
  for (int n = 0; n < 50; ++n) {
    Case c;
    c.problem = testing::make_problem("p" + std::to_string(n), "Q" + std::to_string(n), "x",
                                      Domain::kQa);
    for (std::size_t i = 0; i < rng.below(4); ++i) {
      c.steps.push_back("s" + std::to_string(rng.below(100)));
    }
    for (std::size_t i = 0; i < 1 + rng.below(8); ++i) c.answer += "abc"[rng.below(3)];
    std::string context = c.problem.question;
    for (const auto& s : c.steps) context += "\n" + s;
    // Populate rows along (and off) the answer path; probabilities sum to
    // at most 0.95 per row.
    for (std::size_t pos = 0; pos <= c.answer.size(); ++pos) {
      if (rng.uniform() < 0.25) continue;
      auto& row = table[context + c.answer.substr(0, pos)];
      if (!row.empty()) continue;
      std::vector<double> w;
      const std::size_t k = 1 + rng.below(vocab.size());
      for (std::size_t j = 0; j < k; ++j) w.push_back(0.05 + rng.uniform());
      const double scale = 0.95 * rng.uniform() / std::accumulate(w.begin(), w.end(), 0.0);
      for (std::size_t j = 0; j < k; ++j) row[vocab[rng.below(vocab.size())]] += w[j] * scale;
      for (auto& [tok, p] : row) p = std::max(p, 1e-12);
    }
    cases.push_back(std::move(c));
  }
  auto model = std::make_shared<ReferenceModel>(table, fallback);
  Scorer scorer(model);
  double worst = 0.0;
  for (const auto& c : cases) {
    std::string context = c.problem.question;
    for (const auto& s : c.steps) context += "\n" + s;
    const double expected = oracle_information(table, fallback, context, c.answer);
    const double got = information(c.problem, c.steps, c.answer, scorer);
    worst = std::max(worst, std::abs(got - expected));
  }
  const double elapsed = seconds_since(t0);
  out.expect(worst < 1e-9, "max |error| = " + fmt(worst));
  out.expect(elapsed < 5.0, "runtime " + fmt(elapsed) + " s");
  if (out.pass) out.detail = "50 pairs, max |error| = " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 2. Step-0 identity and telescoping.

InformationProfile random_profile(Rng& rng, std::size_t steps, std::size_t answers) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < answers; ++j) names.push_back("a" + std::to_string(j));
  std::vector<std::vector<double>> values(steps + 1, std::vector<double>(answers));
  for (auto& row : values) {
    for (double& v : row) v = -40.0 * rng.uniform();
  }
  return testing::make_profile(names, values);
}

Outcome criterion_identities() {
  Outcome out;
  Rng rng(2002);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t steps = 1 + rng.below(10);
    const std::size_t answers = 2 + rng.below(6);
    const auto prof = random_profile(rng, steps, answers);
    const std::size_t nc = 1 + rng.below(answers - 1);
    const auto pool = pool_of({prof.answers.begin(), prof.answers.begin() + nc},
                              {prof.answers.begin() + nc, prof.answers.end()});
    const Aggregation agg = n % 2 ? Aggregation::kMax : Aggregation::kMean;
    const auto net = net_info(prof, pool, agg);
    const auto ext = mcnig_extended(net, Reference::kStep0);
    out.expect(ext.at(0) == 0.0, "step-0 value " + fmt(ext.at(0)) + " on profile " +
                                     std::to_string(n));
    // Oracle: step-0 values are net[i] - net[0]; previous-step values sum
    // to the same.
    const auto step0 = mcnig_signal(prof, pool, agg, Reference::kStep0);
    const auto prev = mcnig_signal(prof, pool, agg, Reference::kPrevious);
    double sum = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
      sum += prev.values[i];
      worst = std::max(worst, std::abs(sum - step0.values[i]));
      worst = std::max(worst, std::abs(step0.values[i] - (net[i + 1] - net[0])));
    }
  }
  out.expect(worst <= 1e-12, "telescoping error " + fmt(worst));
  if (out.pass) out.detail = "1000 profiles, max telescoping error = " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Worked two-answer fixture, scored end to end through the reference model.

Outcome criterion_worked_fixture() {
  Outcome out;
  testing::TwoAnswerFixture f;
  Scorer scorer(f.model);
  const auto prof = information_profile(f.problem, f.trace, {"a", "b"}, scorer);
  const auto net = net_info(prof, f.pool, Aggregation::kMax);
  const auto mcnig = mcnig_signal(prof, f.pool, Aggregation::kMax, Reference::kStep0);
  // Oracle: ln(0.5/0.4), ln(0.8/0.1) and their difference.
  const double n0 = std::log(0.5 / 0.4), n1 = std::log(0.8 / 0.1);
  out.expect(std::abs(net.at(0) - 0.2231) <= 1e-4 && std::abs(net.at(0) - n0) < 1e-12,
             "NetInfo_0 = " + fmt(net.at(0)));
  out.expect(std::abs(net.at(1) - 2.0794) <= 1e-4 && std::abs(net.at(1) - n1) < 1e-12,
             "NetInfo_1 = " + fmt(net.at(1)));
  out.expect(std::abs(mcnig.values.at(0) - 1.8563) <= 1e-4, "MCNIG_1 = " + fmt(mcnig.values.at(0)));
  if (out.pass) {
    out.detail = "NetInfo_0 = " + fmt(net[0]) + ", NetInfo_1 = " + fmt(net[1]) +
                 ", MCNIG_1 = " + fmt(mcnig.values[0]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// 4. max >= mean, strictly on non-constant sets.

Outcome criterion_dominance() {
  Outcome out;
  Rng rng(4004);
  std::size_t strict = 0;
  for (int n = 0; n < 10000; ++n) {
    std::vector<double> v(1 + rng.below(10));
    // Some sets are constant on purpose.
    const bool constant = rng.below(10) == 0;
    for (double& x : v) x = constant ? -3.25 : -50.0 * rng.uniform();
    const double mx = aggregate(v, Aggregation::kMax);
    const double mean = aggregate(v, Aggregation::kMean);
    out.expect(mx >= mean, "max < mean on set " + std::to_string(n));
    const bool non_constant = *std::min_element(v.begin(), v.end()) != *std::max_element(v.begin(), v.end());
    if (non_constant) {
      out.expect(mx > mean, "max == mean on non-constant set " + std::to_string(n));
      ++strict;
    }
  }
  if (out.pass) out.detail = "10000 sets, " + std::to_string(strict) + " non-constant";
  return out;
}

// ---------------------------------------------------------------------------
// 5. Threshold sweep.

struct Best {
  double tau;
  double ba;
};

Best exhaustive_sweep(const std::vector<StepSignal>& signals, const std::vector<int>& truths,
                      const std::vector<double>& grid) {
  Best best{0.0, -1.0};
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  for (double tau : sorted) {
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t k = 0; k < signals.size(); ++k) {
      bool pred = true;
      const auto& v = signals[k].values;
      for (std::size_t i = 0; i + 1 < v.size(); ++i) pred = pred && v[i] > tau;
      if (truths[k]) {
        (pred ? tp : fn) += 1;
      } else {
        (pred ? fp : tn) += 1;
      }
    }
    const double ba = 0.5 * (tp / (tp + fn) + tn / (tn + fp));
    if (ba > best.ba) best = {tau, ba};
  }
  return best;
}

Outcome criterion_sweep() {
  Outcome out;
  {
    const std::vector<StepSignal> signals = {signal_of({0.5, 0.9, -9.0}, "A"),
                                             signal_of({0.2, -0.1, 9.0}, "B")};
    const std::vector<int> truths = {1, 0};
    const std::vector<double> grid = {0.3, 0.7};
    const auto sweep = sweep_threshold(signals, truths, grid);
    out.expect(sweep.best_threshold == 0.3 && sweep.best_balanced_accuracy == 1.0,
               "fixture: tau = " + fmt(sweep.best_threshold) +
                   ", BA = " + fmt(sweep.best_balanced_accuracy));
  }
  Rng rng(5005);
  for (int n = 0; n < 100; ++n) {
    std::vector<StepSignal> signals;
    std::vector<int> truths;
    const std::size_t count = 2 + rng.below(40);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> v(1 + rng.below(7));
      for (double& x : v) x = std::round((rng.uniform() * 2 - 1) * 30) / 10;
      signals.push_back(signal_of(v, std::to_string(k)));
      truths.push_back(k == 0 ? 1 : k == 1 ? 0 : static_cast<int>(rng.below(2)));
    }
    std::vector<double> grid;
    for (std::size_t g = 0; g < 1 + rng.below(40); ++g) grid.push_back(rng.uniform() * 6 - 3);
    std::sort(grid.begin(), grid.end());
    const auto sweep = sweep_threshold(signals, truths, grid);
    const auto oracle = exhaustive_sweep(signals, truths, grid);
    out.expect(sweep.best_threshold == oracle.tau && sweep.best_balanced_accuracy == oracle.ba,
               "instance " + std::to_string(n) + ": got (" + fmt(sweep.best_threshold) + ", " +
                   fmt(sweep.best_balanced_accuracy) + "), oracle (" + fmt(oracle.tau) + ", " +
                   fmt(oracle.ba) + ")");
  }
  for (int n = 0; n < 200; ++n) {
    const std::size_t pos = 1 + rng.below(100), neg = 1 + rng.below(100);
    out.expect(balanced_accuracy({pos, 0, 0, neg}) == 0.5 &&
                   balanced_accuracy({0, pos, neg, 0}) == 0.5,
               "constant predictor BA != 0.5");
  }
  if (out.pass) out.detail = "fixture tau = 0.3 BA = 1, 100 random sweeps match oracle";
  return out;
}

// ---------------------------------------------------------------------------
// 6. Token-cost formulas.

Outcome criterion_complexity() {
  Outcome out;
  ComplexityParams p;
  p.n = 100;
  p.s_bar = 30;
  p.m = 8;
  p.s = 16;
  p.t = 20;
  p.q_len = 60;
  const double ms = tokens_mathshepherd(p), om = tokens_omegaprm(p), mc = tokens_mcnig(p);
  // Oracles: 8*30*100*99/2, 60 + 100*30 + 101*16*20, 8*30*50*log2(100).
  out.expect(ms == 8.0 * 30 * 100 * 99 / 2 && ms == 1188000.0, "MathShepherd = " + fmt(ms));
  out.expect(mc == 60.0 + 100 * 30 + 101 * 16 * 20 && mc == 35380.0, "MCNIG = " + fmt(mc));
  out.expect(std::abs(om - 79726.3) <= 0.1, "OmegaPRM = " + fmt(om));
  for (double n : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    p.n = n;
    const double a = tokens_mcnig(p), b = tokens_omegaprm(p), c = tokens_mathshepherd(p);
    out.expect(a < b && b < c, "ordering fails at N = " + fmt(n));
  }
  if (out.pass) {
    out.detail = "MathShepherd " + fmt(ms) + ", MCNIG " + fmt(mc) + ", OmegaPRM " + fmt(om);
  }
  return out;
}

// ---------------------------------------------------------------------------
// 7. Subsampling bias and variance.

// Oracle: enumerate subsets by bitmask.
std::pair<double, double> brute_bias(const std::vector<double>& pool, std::size_t s) {
  const double mx = *std::max_element(pool.begin(), pool.end());
  std::vector<double> maxima;
  for (unsigned mask = 0; mask < (1u << pool.size()); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != s) continue;
    double m = -INFINITY;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (mask & (1u << i)) m = std::max(m, pool[i]);
    }
    maxima.push_back(m);
  }
  double mean = 0.0;
  for (double m : maxima) mean += m;
  mean /= maxima.size();
  double var = 0.0;
  for (double m : maxima) var += (m - mean) * (m - mean);
  return {mean - mx, var / maxima.size()};
}

Outcome criterion_bias() {
  Outcome out;
  const std::vector<double> worked = {1, 2, 3};
  const auto e = exhaustive_bias(worked, 2);
  out.expect(e.bias == -1.0 / 3.0 && e.variance == 2.0 / 9.0,
             "exhaustive {1,2,3}, 2 = (" + fmt(e.bias) + ", " + fmt(e.variance) + ")");
  const auto mc = subsample_bias_variance(worked, 2, 10000, 7007);
  out.expect(std::abs(mc.bias - e.bias) <= 3 * mc.standard_error(),
             "MC bias " + fmt(mc.bias) + " outside 3 SE (" + fmt(mc.standard_error()) + ")");
  Rng rng(7007);
  for (int n = 0; n < 500; ++n) {
    std::vector<double> pool(1 + rng.below(10));
    for (double& x : pool) x = std::round(rng.uniform() * 16) / 4;
    double prev = -INFINITY;
    for (std::size_t s = 1; s <= pool.size(); ++s) {
      const auto ex = exhaustive_bias(pool, s);
      const auto [ob, ov] = brute_bias(pool, s);
      out.expect(std::abs(ex.bias - ob) < 1e-12 && std::abs(ex.variance - ov) < 1e-12,
                 "case " + std::to_string(n) + " disagrees with enumeration");
      out.expect(ex.bias <= 0.0, "positive bias in case " + std::to_string(n));
      out.expect(ex.bias >= prev, "bias decreases in s in case " + std::to_string(n));
      prev = ex.bias;
    }
    const auto full = exhaustive_bias(pool, pool.size());
    out.expect(full.bias == 0.0 && full.variance == 0.0,
               "s = |pool| not exact zero in case " + std::to_string(n));
  }
  if (out.pass) {
    out.detail = "exact (-1/3, 2/9); MC " + fmt(mc.bias) + " +- " + fmt(mc.standard_error()) +
                 "; 500 cases";
  }
  return out;
}

// ---------------------------------------------------------------------------
// 8. Filtering and subsampling invariants.

std::string dump_working_set(const WorkingSet& ws) {
  std::string out;
  for (const auto& item : ws.items) {
    for (const auto& t : item.traces) out += to_json(t).dump() + "\n";
  }
  return out;
}

Outcome criterion_filtering() {
  Outcome out;
  Rng rng(8008);
  std::vector<Problem> problems;
  std::map<std::string, std::vector<ReasoningTrace>> traces;
  for (int n = 0; n < 200; ++n) {
    const std::string id = "p" + std::to_string(n);
    problems.push_back(testing::make_problem(id, "q", "1"));
    const int style = static_cast<int>(rng.below(5));  // 0 all correct, 1 all wrong, else mixed
    const std::size_t count = 1 + rng.below(16);
    for (std::size_t k = 0; k < count; ++k) {
      const bool parsed = rng.below(8) != 0;
      const bool correct = style == 0 ? true : style == 1 ? false : rng.below(3) == 0;
      auto t = testing::make_trace(id, id + "-" + std::to_string(k), {"s"},
                                   parsed ? std::optional<std::string>(correct ? "1" : "2")
                                          : std::nullopt);
      if (parsed) t.correct = correct;
      traces[id].push_back(t);
    }
  }
  const auto a = filter_and_subsample(problems, traces, 8, 42);
  const auto b = filter_and_subsample(problems, traces, 8, 42);
  out.expect(dump_working_set(a) == dump_working_set(b), "working sets differ across runs");
  std::set<std::string> survivors;
  for (const auto& item : a.items) {
    const auto& all = traces.at(item.problem.id);
    std::size_t parsed = 0, parsed_correct = 0;
    for (const auto& t : all) {
      if (t.parse_ok) {
        ++parsed;
        parsed_correct += *t.correct ? 1 : 0;
      }
    }
    survivors.insert(item.problem.id);
    out.expect(parsed_correct < parsed, item.problem.id + " is all-correct but survived");
    out.expect(item.traces.size() == std::min<std::size_t>(8, parsed),
               item.problem.id + " subsample size " + std::to_string(item.traces.size()));
    bool has_correct = false;
    for (const auto& t : item.traces) {
      out.expect(t.parse_ok, item.problem.id + " kept an unparsed trace");
      has_correct = has_correct || t.correct.value_or(false);
    }
    if (parsed_correct > 0) out.expect(has_correct, item.problem.id + " lost every correct trace");
  }
  // Oracle for which problems must survive: some parsed trace, not all correct.
  std::size_t expected = 0;
  for (const auto& [id, ts] : traces) {
    std::size_t parsed = 0, good = 0;
    for (const auto& t : ts) {
      parsed += t.parse_ok ? 1 : 0;
      good += t.parse_ok && *t.correct ? 1 : 0;
    }
    const bool keep = parsed > 0 && good < parsed;
    out.expect(keep == static_cast<bool>(survivors.count(id)), id + " survival mismatch");
    expected += keep ? 1 : 0;
  }
  if (out.pass) {
    out.detail = "200 problems, " + std::to_string(expected) + " survive, identical reruns";
  }
  return out;
}

// ---------------------------------------------------------------------------
// 9. Best-of-K.

Validator gold_validator() {
  return [](const Problem& p, std::string_view c) {
    return Validation{c == p.gold_answer ? Verdict::kCorrect : Verdict::kWrong, false, ""};
  };
}

std::vector<ProblemTraces> random_items(Rng& rng, std::size_t n) {
  std::vector<ProblemTraces> items;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    ProblemTraces item{testing::make_problem(id, "q", "1"), {}};
    const std::size_t count = 1 + rng.below(16);
    for (std::size_t k = 0; k < count; ++k) {
      const std::string ans = rng.uniform() < 0.25 ? "1" : std::to_string(2 + rng.below(4));
      item.traces.push_back(testing::make_trace(id, id + "-" + std::to_string(k), {"s"}, ans));
    }
    items.push_back(std::move(item));
  }
  return items;
}

Outcome criterion_best_of_k() {
  Outcome out;
  Rng rng(9009);
  for (int n = 0; n < 100; ++n) {
    const auto items = random_items(rng, 1 + rng.below(20));
    const std::uint64_t seed = rng.below(1u << 30);
    // K = 1 against first-candidate validation.
    const auto one = best_of_k(items, random_scorer(seed), "random", 1, gold_validator());
    double first = 0.0;
    for (const auto& it : items) first += *it.traces[0].final_answer == "1" ? 1.0 : 0.0;
    out.expect(one.accuracy == first / items.size(), "K=1 mismatch on instance " + std::to_string(n));
    // Oracle scorer against brute force, and monotone in K.
    double prev = -1.0;
    for (std::size_t k = 1; k <= 16; ++k) {
      const auto r = best_of_k(items, oracle_scorer(gold_validator()), "oracle", k, gold_validator());
      double any = 0.0;
      for (const auto& it : items) {
        bool ok = false;
        for (std::size_t c = 0; c < std::min(k, it.traces.size()); ++c) {
          ok = ok || *it.traces[c].final_answer == "1";
        }
        any += ok ? 1.0 : 0.0;
      }
      out.expect(r.accuracy == any / items.size(),
                 "oracle accuracy mismatch at K=" + std::to_string(k));
      out.expect(r.accuracy >= prev, "oracle accuracy fell at K=" + std::to_string(k));
      prev = r.accuracy;
    }
    // Strictly increasing transform.
    const auto base = random_scorer(seed);
    const auto a = best_of_k(items, base, "s", 8, gold_validator());
    const auto b = best_of_k(
        items,
        [&](const Problem& p, const ReasoningTrace& t) { return 5 * std::atan(base(p, t)) + 2; },
        "s", 8, gold_validator());
    for (std::size_t i = 0; i < a.per_problem.size(); ++i) {
      out.expect(a.per_problem[i].selected_trace_id == b.per_problem[i].selected_trace_id,
                 "transform changed a selection on instance " + std::to_string(n));
    }
  }
  if (out.pass) out.detail = "100 instances";
  return out;
}

// ---------------------------------------------------------------------------
// 10. Dataset emission.

std::size_t count_markers(const std::vector<Segment>& segments) {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.is_target && s.text == "<|s_req|>" ? 1 : 0;
  return n;
}

Outcome criterion_datasets() {
  Outcome out;
  Rng rng(10010);
  const std::vector<std::string> pieces = {"x = 1", "\"quoted\"", "back\\slash", "tab\t",
                                           "ünï", "$7$", "{\"j\": 1}", "line\nbreak"};
  for (int n = 0; n < 1000; ++n) {
    const auto p = testing::make_problem("p" + std::to_string(n), pieces[rng.below(pieces.size())], "7");
    std::vector<std::string> steps(1 + rng.below(9));
    for (auto& s : steps) s = pieces[rng.below(pieces.size())] + std::to_string(rng.below(1000));
    const auto t = testing::make_trace(p.id, "t" + std::to_string(n), steps, "7", rng.below(2) == 0);
    StepLabels labels;
    labels.problem_id = p.id;
    labels.trace_id = t.trace_id;
    for (std::size_t i = 0; i < steps.size(); ++i) labels.labels.push_back(static_cast<int>(rng.below(2)));
    const auto rec = emit_prm_record(p, t, labels);
    out.expect(count_markers(rec.segments) == steps.size() && rec.targets.size() == steps.size(),
               "target count != step count in record " + std::to_string(n));
    for (std::size_t i = 0; i < steps.size(); ++i) {
      out.expect((rec.targets[i] == Target::kPos) == (labels.labels[i] == 1),
                 "target does not follow label in record " + std::to_string(n));
    }
    const auto line = serialize(rec);
    const auto back = parse_record(line);
    out.expect(std::holds_alternative<PRMRecord>(back) &&
                   serialize(std::get<PRMRecord>(back)) == line,
               "PRM record " + std::to_string(n) + " does not round-trip");
    const auto orm = emit_orm_record(p, t);
    out.expect(count_markers(orm.segments) == 1, "ORM record without exactly one target");
    out.expect((orm.target == Target::kPos) == *t.correct, "ORM target disagrees with validator");
  }
  const auto clean = testing::make_problem("p", "q", "7");
  for (const std::string sym : {"<|s_req|>", "<|s_pos|>", "<|s_neg|>"}) {
    const auto bad = testing::make_trace("p", "t", {"a " + sym, "$7$"}, "7", true);
    const auto reason = reserved_symbol_violation(clean, bad);
    out.expect(reason.has_value() && !reason->empty(), "no reason code for " + sym);
    bool rejected = false;
    try {
      emit_prm_record(clean, bad, StepLabels{"p", "t", {1, 1}, 0.0});
    } catch (const Error&) {
      rejected = true;
    }
    out.expect(rejected, "PRM emission accepted " + sym);
  }
  if (out.pass) out.detail = "1000 PRM records round-trip; reserved symbols rejected";
  return out;
}

// ---------------------------------------------------------------------------
// 11. SQL validator.

Outcome criterion_sql() {
  Outcome out;
  const auto t0 = Clock::now();
  const fs::path fixture = testing::corpus_dir() / "shop.sql";
  const std::string gold =
      "SELECT c.name, SUM(o.amount) FROM customers c JOIN orders o ON o.customer_id = c.id "
      "WHERE o.status = 'paid' GROUP BY c.name";
  const std::string equivalent =
      "select name, total from (select customer_id, sum(amount) as total from orders "
      "where status in ('paid') group by customer_id) t join customers on customers.id = "
      "t.customer_id order by total desc";
  const std::string mutated =
      "SELECT c.name, SUM(o.amount) FROM customers c JOIN orders o ON o.customer_id = c.id "
      "WHERE o.status = 'open' GROUP BY c.name";
  const std::string broken = "SELEC name FROM customers WHERE";
  const auto v1 = sql_equivalent(equivalent, gold, fixture);
  const auto v2 = sql_equivalent(mutated, gold, fixture);
  const auto v3 = sql_equivalent(broken, gold, fixture);
  out.expect(v1.correct(), "equivalent query rejected: " + v1.diagnostic);
  out.expect(!v2.correct(), "mutated query accepted");
  out.expect(!v3.correct() && !v3.diagnostic.empty(), "broken query without diagnostic");
  const double elapsed = seconds_since(t0);
  out.expect(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  if (out.pass) out.detail = "1/0/0, broken: \"" + v3.diagnostic + "\", " + fmt(elapsed) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 12. End-to-end determinism and cache reuse.

std::map<std::string, std::string> snapshot(const Artifacts& a) {
  std::map<std::string, std::string> files;
  for (const fs::path& p : {a.labels, a.sweep, a.thresholds}) files[p.filename()] = read_file(p);
  for (const fs::path& dir : {a.prm_dir, a.orm_dir}) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      files[(dir.filename() / entry.path().filename()).string()] = read_file(entry.path());
    }
  }
  return files;
}

Outcome criterion_pipeline() {
  Outcome out;
  testing::TempDir dir;
  auto config = load_config(testing::corpus_dir() / "corpus.toml");
  config.out_dir = dir / "out";
  config.cache_dir = dir / "cache";

  std::map<std::string, std::size_t> per_problem;
  for (const auto& line : read_jsonl_lines(config.traces_file)) {
    ++per_problem[nlohmann::json::parse(line.text).at("problem_id").get<std::string>()];
  }
  std::size_t full = 0;
  for (const auto& [id, n] : per_problem) full += n >= 8 ? 1 : 0;
  out.expect(full >= 20, "corpus has only " + std::to_string(full) + " problems with 8 traces");

  const auto t0 = Clock::now();
  const auto first = run_pipeline(config, all_stages());
  const double elapsed = seconds_since(t0);
  out.expect(first.ok, "first run failed");
  out.expect(elapsed < 60.0, "first run took " + fmt(elapsed) + " s");
  const Artifacts artifacts(config.out_dir);
  const auto before = snapshot(artifacts);

  auto again = config;
  again.force = true;  // re-execute every stage rather than skip it
  const auto second = run_pipeline(again, all_stages());
  out.expect(second.ok, "re-run failed");
  const auto* score = second.find(Stage::kScore);
  out.expect(score != nullptr && score->status == "ok", "re-run did not execute scoring");
  const double rate = second.scoring.hit_rate();
  out.expect(second.scoring.requests > 0 && rate == 1.0 && second.scoring.backend_calls == 0,
             "re-run cache hit rate " + fmt(rate));
  const auto after = snapshot(artifacts);
  out.expect(before == after, "label, sweep or dataset files changed on re-run");
  out.expect(!before.empty() && !before.at("labels.jsonl").empty(), "no labels produced");
  if (out.pass) {
    out.detail = std::to_string(per_problem.size()) + " problems, first run " + fmt(elapsed) +
                 " s, re-run hit rate " + fmt(rate) + " over " +
                 std::to_string(second.scoring.requests) + " requests, " +
                 std::to_string(before.size()) + " files identical";
  }
  return out;
}

}  // namespace

int main() {
  // Pipeline progress goes to clog; keep the gate output to the verdicts.
  std::clog.setstate(std::ios::failbit);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"information oracle equivalence", criterion_information},
      {"definition identities", criterion_identities},
      {"worked MCNIG fixture", criterion_worked_fixture},
      {"aggregation dominance", criterion_dominance},
      {"calibration sweep", criterion_sweep},
      {"complexity formulas", criterion_complexity},
      {"bias-variance oracle", criterion_bias},
      {"filtering invariants", criterion_filtering},
      {"best-of-K properties", criterion_best_of_k},
      {"dataset emission", criterion_datasets},
      {"SQL validator", criterion_sql},
      {"pipeline determinism and cache", criterion_pipeline},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    failures += result.pass ? 0 : 1;
    std::cout << (result.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first
              << ": " << result.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}

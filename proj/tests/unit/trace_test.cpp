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

#include <set>

#include "infolabel/error.hpp"
#include "infolabel/trace.hpp"
#include "infolabel/util.hpp"
#include "test_support.hpp"

namespace infolabel {
namespace {

using testing::make_problem;
using testing::make_trace;

TEST(ParseTrace, SplitsStepsAndExtractsDollarAnswer) {
  const auto t = parse_trace("A [STEP] B [STEP] The answer is $42$", Domain::kMath);
  EXPECT_EQ(t.steps, (std::vector<std::string>{"A", "B", "The answer is $42$"}));
  ASSERT_TRUE(t.final_answer);
  EXPECT_EQ(*t.final_answer, "42");
  EXPECT_TRUE(t.parse_ok);
}

TEST(ParseTrace, NoAnswerMeansParseFailure) {
  const auto t = parse_trace("only text, no delimiter, no answer", Domain::kMath);
  EXPECT_EQ(t.steps, (std::vector<std::string>{"only text, no delimiter, no answer"}));
  EXPECT_FALSE(t.final_answer);
  EXPECT_FALSE(t.parse_ok);
}

TEST(ParseTrace, SqlFenceIsStripped) {
  const auto t = parse_trace("plan [STEP] write ```sql\nSELECT 1\n```", Domain::kSql);
  EXPECT_EQ(t.steps, (std::vector<std::string>{"plan", "write ```sql\nSELECT 1\n```"}));
  ASSERT_TRUE(t.final_answer);
  EXPECT_EQ(*t.final_answer, "SELECT 1");
}

TEST(ParseTrace, DelimiterOnlyIsAnError) {
  EXPECT_THROW(parse_trace(" [STEP]  [STEP] ", Domain::kMath), Error);
  EXPECT_THROW(parse_trace("", Domain::kMath), Error);
}

TEST(ExtractAnswer, LastSpanWins) {
  EXPECT_EQ(extract_answer("so $x=3$, thus $7$", Domain::kMath), "7");
  EXPECT_EQ(extract_answer("```python\nreturn 1\n```", Domain::kPython), "return 1");
  EXPECT_FALSE(extract_answer("no spans here", Domain::kMath));
}

TEST(ExtractAnswer, EscapedDollarIsNotADelimiter) {
  EXPECT_EQ(extract_answer("costs \\$5, so $5$", Domain::kMath), "5");
}

// Rendering and reparsing gives back the steps for any step text without a
// literal delimiter.
TEST(ParseTraceProperty, RenderRoundTrip) {
  Rng rng(3);
  const std::vector<std::string> words = {"alpha", "b", "x=1", "$3$", "so", "(ok)", "12.5"};
  for (int n = 0; n < 300; ++n) {
    std::vector<std::string> steps(1 + rng.below(5));
    for (auto& s : steps) {
      const std::size_t len = 1 + rng.below(4);
      for (std::size_t w = 0; w < len; ++w) {
        if (w) s += ' ';
        s += words[rng.below(words.size())];
      }
    }
    const auto t = parse_trace(render_steps(steps), Domain::kMath);
    ASSERT_EQ(t.steps, steps);
  }
}

Validator always(bool ok) {
  return [ok](const Problem&, std::string_view) {
    return Validation{ok ? Verdict::kCorrect : Verdict::kWrong, false, ""};
  };
}

// Oracle validator that counts calls: correct iff the answer equals `gold`.
struct CountingValidator {
  std::string gold;
  int* calls;
  Validation operator()(const Problem&, std::string_view c) const {
    ++*calls;
    return {c == gold ? Verdict::kCorrect : Verdict::kWrong, false, ""};
  }
};

TEST(AnswerPool, PartitionsByValidator) {
  const auto p = make_problem("p", "q", "1");
  std::vector<ReasoningTrace> ts = {make_trace("p", "0", {"s"}, "1"),
                                    make_trace("p", "1", {"s"}, "2"),
                                    make_trace("p", "2", {"s"}, "3")};
  int calls = 0;
  const auto pool = build_answer_pool(p, ts, CountingValidator{"1", &calls});
  EXPECT_EQ(pool.correct.size(), 1u);
  EXPECT_EQ(pool.wrong.size(), 2u);
  EXPECT_EQ(ts[0].correct, true);
  EXPECT_EQ(ts[1].correct, false);
}

TEST(AnswerPool, AllCorrectHasNoWrong) {
  const auto p = make_problem("p", "q", "1");
  std::vector<ReasoningTrace> ts;
  for (int i = 0; i < 8; ++i) ts.push_back(make_trace("p", std::to_string(i), {"s"}, "1"));
  const auto pool = build_answer_pool(p, ts, always(true));
  EXPECT_LE(pool.correct.size(), 8u);
  EXPECT_TRUE(pool.wrong.empty());
}

TEST(AnswerPool, NormalizationEqualAnswersDeduplicate) {
  const auto p = make_problem("p", "q", "1/2");
  std::vector<ReasoningTrace> ts = {make_trace("p", "0", {"s"}, "0.5"),
                                    make_trace("p", "1", {"s"}, "1/2")};
  int calls = 0;
  const auto pool = build_answer_pool(p, ts, [&](const Problem& pr, std::string_view c) {
    ++calls;
    return validate(pr.validator, c, pr);
  });
  ASSERT_EQ(pool.correct.size(), 1u);
  EXPECT_EQ(pool.correct[0], "0.5");
  EXPECT_EQ(pool.correct_counts[0], 2u);
  EXPECT_EQ(calls, 1);  // each distinct answer validated once
}

TEST(AnswerPool, ValidatorErrorIsFlaggedAsWrong) {
  const auto p = make_problem("p", "q", "1");
  std::vector<ReasoningTrace> ts = {make_trace("p", "0", {"s"}, "9")};
  const auto pool = build_answer_pool(p, ts, [](const Problem&, std::string_view) {
    return Validation{Verdict::kError, false, "fixture missing"};
  });
  EXPECT_EQ(pool.wrong, std::vector<std::string>{"9"});
  EXPECT_EQ(pool.flagged, std::vector<std::string>{"9"});
  EXPECT_TRUE(ts[0].validator_error);
}

// Property: every pooled answer is in `correct` exactly when the validator
// accepts it, and the two sides never share a normalized answer.
TEST(AnswerPoolProperty, PartitionMatchesValidator) {
  Rng rng(11);
  for (int n = 0; n < 200; ++n) {
    const auto p = make_problem("p", "q", "0");
    std::vector<ReasoningTrace> ts;
    const std::size_t count = 1 + rng.below(10);
    for (std::size_t i = 0; i < count; ++i) {
      ts.push_back(make_trace("p", std::to_string(i), {"s"}, std::to_string(rng.below(6))));
    }
    auto oracle = [](std::string_view a) { return std::stoi(std::string(a)) % 2 == 0; };
    const auto pool = build_answer_pool(p, ts, [&](const Problem&, std::string_view c) {
      return Validation{oracle(c) ? Verdict::kCorrect : Verdict::kWrong, false, ""};
    });
    std::set<std::string> seen;
    for (const auto& a : pool.correct) {
      ASSERT_TRUE(oracle(a));
      ASSERT_TRUE(seen.insert(a).second);
    }
    for (const auto& a : pool.wrong) {
      ASSERT_FALSE(oracle(a));
      ASSERT_TRUE(seen.insert(a).second);
    }
  }
}

std::map<std::string, std::vector<ReasoningTrace>> traces_for(const std::string& pid,
                                                              std::size_t n,
                                                              std::size_t n_correct) {
  std::vector<ReasoningTrace> ts;
  for (std::size_t i = 0; i < n; ++i) {
    ts.push_back(make_trace(pid, pid + "-" + std::to_string(i), {"s"},
                            std::to_string(i < n_correct ? 1 : 2), i < n_correct));
  }
  return {{pid, ts}};
}

TEST(FilterAndSubsample, KeepsACorrectTrace) {
  const std::vector<Problem> ps = {make_problem("p", "q", "1")};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ws = filter_and_subsample(ps, traces_for("p", 10, 2), 8, seed);
    ASSERT_EQ(ws.items.size(), 1u);
    const auto& kept = ws.items[0].traces;
    ASSERT_EQ(kept.size(), 8u);
    ASSERT_TRUE(std::any_of(kept.begin(), kept.end(), [](const auto& t) { return *t.correct; }));
  }
}

TEST(FilterAndSubsample, DropsAllCorrectProblem) {
  const std::vector<Problem> ps = {make_problem("p", "q", "1")};
  const auto ws = filter_and_subsample(ps, traces_for("p", 8, 8), 8, 1);
  EXPECT_TRUE(ws.items.empty());
  ASSERT_EQ(ws.dropped.size(), 1u);
  EXPECT_EQ(ws.dropped[0].reason, "all_correct");
}

TEST(FilterAndSubsample, FewerThanKKeepsEverything) {
  const std::vector<Problem> ps = {make_problem("p", "q", "1")};
  const auto ws = filter_and_subsample(ps, traces_for("p", 3, 0), 8, 1);
  ASSERT_EQ(ws.items.size(), 1u);
  EXPECT_EQ(ws.items[0].traces.size(), 3u);
  for (const auto& t : ws.items[0].traces) EXPECT_FALSE(*t.correct);
}

TEST(FilterAndSubsample, UnparsedTracesAreDroppedWithReason) {
  const std::vector<Problem> ps = {make_problem("p", "q", "1")};
  auto by = traces_for("p", 4, 1);
  by["p"].push_back(make_trace("p", "p-x", {"s"}, std::nullopt));
  const auto ws = filter_and_subsample(ps, by, 8, 1);
  ASSERT_EQ(ws.items.size(), 1u);
  EXPECT_EQ(ws.items[0].traces.size(), 4u);
  ASSERT_EQ(ws.dropped.size(), 1u);
  EXPECT_EQ(ws.dropped[0].trace_id, "p-x");
  EXPECT_EQ(ws.dropped[0].reason, "parse_failed");
}

TEST(FilterAndSubsample, KeptTracesStayInGenerationOrder) {
  const std::vector<Problem> ps = {make_problem("p", "q", "1")};
  const auto ws = filter_and_subsample(ps, traces_for("p", 16, 3), 8, 5);
  const auto& kept = ws.items.at(0).traces;
  for (std::size_t i = 1; i < kept.size(); ++i) {
    const auto idx = [](const ReasoningTrace& t) {
      return std::stoi(t.trace_id.substr(t.trace_id.find('-') + 1));
    };
    ASSERT_LT(idx(kept[i - 1]), idx(kept[i]));
  }
}

TEST(LoadProblems, RejectsDuplicateIds) {
  testing::TempDir dir;
  write_file_atomic(dir / "p.jsonl",
                    R"({"id":"a","domain":"math","question":"q","gold_answer":"1"})"
                    "\n"
                    R"({"id":"a","domain":"math","question":"q","gold_answer":"2"})"
                    "\n");
  EXPECT_THROW(load_problems(dir / "p.jsonl"), Error);
}

TEST(LoadProblems, RejectsEmptyGold) {
  testing::TempDir dir;
  write_file_atomic(dir / "p.jsonl",
                    R"({"id":"a","domain":"math","question":"q","gold_answer":""})"
                    "\n");
  EXPECT_THROW(load_problems(dir / "p.jsonl"), Error);
}

TEST(TraceJson, RoundTrip) {
  auto t = make_trace("p", "t", {"a", "b $1$"}, "1", true);
  const auto back = trace_from_json(to_json(t));
  EXPECT_EQ(back.steps, t.steps);
  EXPECT_EQ(back.final_answer, t.final_answer);
  EXPECT_EQ(back.correct, t.correct);
  EXPECT_EQ(back.parse_ok, t.parse_ok);
}

}  // namespace
}  // namespace infolabel

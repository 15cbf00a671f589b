// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include <doctest.h>

#include "pedtutor/dataset.hpp"
#include "pedtutor/error.hpp"
#include "pedtutor/grading.hpp"
#include "support.hpp"

using namespace pedtutor;

namespace {

ProblemSet rated(const std::vector<double>& rates) {
  ProblemSet s;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    s.problems.push_back(testing::problem("p" + std::to_string(i), "Q" + std::to_string(i), "1",
                                          rates[i]));
  }
  return s;
}

// Student answering correctly on the seeds listed for each statement.
std::string attempts_playbook(const std::string& statement, const std::vector<bool>& correct) {
  std::string replies;
  for (bool c : correct) replies += std::string(replies.empty() ? "" : ", ") + (c ? "\"ANSWER: 5\"" : "\"ANSWER: 4\"");
  return "{\"model\": \"student\", \"contains\": \"" + statement + "\", \"replies\": [" + replies + "]}";
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("ingest valid, duplicate and empty files") {
  testing::TempDir dir("ingest");
  {
    std::ofstream(dir / "ok.jsonl") << R"({"id": "a", "problem": "1+1", "answer": "2"}
{"id": "b", "problem": "2+2", "answer": 4, "baseline_solve_rate": 0.5}
{"id": "c", "problem": "3+3", "answer": "6", "tags": ["easy"]}
)";
    std::ofstream(dir / "dup.jsonl") << R"({"id": "p1", "problem": "x", "answer": "1"}
{"id": "p1", "problem": "y", "answer": "2"}
)";
    std::ofstream(dir / "empty.jsonl") << "";
    std::ofstream(dir / "bad.jsonl") << "{\"id\": \"a\"}\n";
  }
  auto s = ingest_problems(dir / "ok.jsonl");
  CHECK(s.size() == 3);
  CHECK(s.problems[1].reference_answer == "4");
  CHECK(s.problems[1].baseline_solve_rate == doctest::Approx(0.5));
  CHECK(s.problems[2].tags == std::vector<std::string>{"easy"});
  CHECK(s.provenance.content_hash.size() == 16);
  try {
    ingest_problems(dir / "dup.jsonl");
    FAIL("expected DuplicateId");
  } catch (const DuplicateId& e) {
    CHECK(std::string(e.what()) == "p1");
  }
  auto e = ingest_problems(dir / "empty.jsonl");
  CHECK(e.empty());
  CHECK_FALSE(e.warnings.empty());
  CHECK_THROWS_AS(ingest_problems(dir / "bad.jsonl"), ParseError);
  CHECK_THROWS_AS(ingest_problems(dir / "missing.jsonl"), IoError);
}

TEST_CASE("write and re-read preserves records") {
  testing::TempDir dir("roundtrip");
  auto s = rated({0.25, 0.5});
  write_problems(s, dir / "out.jsonl");
  auto back = ingest_problems(dir / "out.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back.problems[1].baseline_solve_rate == doctest::Approx(0.5));
}

TEST_CASE("baseline solve rate counts scripted successes") {
  auto b = testing::backend(attempts_playbook("Q-three",
                                              {true, false, true, false, true, false, false, false}));
  auto student = testing::mock_client("student", b);
  auto p = testing::problem("q", "Q-three", "5");
  CHECK(measure_baseline_solve_rate(p, *student, testing::prompts(), 8, 0) == 0.375);
  CHECK(measure_baseline_solve_rate(p, *student, testing::prompts(), 8, 0, 4) == 0.375);
  CHECK_THROWS_AS(measure_baseline_solve_rate(p, *student, testing::prompts(), 0, 0),
                  PreconditionError);
  auto always = testing::mock_client("student", testing::backend(R"({"reply": "ANSWER: 5"})"));
  CHECK(measure_baseline_solve_rate(p, *always, testing::prompts(), 8, 3) == 1.0);
}

TEST_CASE("solve rate lies on the 1/K grid") {
  auto b = testing::backend(attempts_playbook("Q", {true, false, false, true, true}));
  auto student = testing::mock_client("student", b);
  auto p = testing::problem("q", "Q", "5");
  for (int K = 1; K <= 9; ++K) {
    for (std::int64_t seed = 0; seed < 5; ++seed) {
      double r = measure_baseline_solve_rate(p, *student, testing::prompts(), K, seed);
      double scaled = r * K;
      CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-12));
    }
  }
}

TEST_CASE("filter bounds are inclusive") {
  auto s = rated({0.0, 0.01, 0.30, 0.60, 0.75, 1.0});
  auto f = filter_by_solve_rate(s, 0.01, 0.60);
  std::set<std::string> ids;
  for (const auto& p : f.problems) ids.insert(p.id);
  CHECK(ids == std::set<std::string>{"p1", "p2", "p3"});
  REQUIRE(f.filter_bounds);
  CHECK(f.filter_bounds->lo == 0.01);
  CHECK_THROWS_AS(filter_by_solve_rate(s, 0.7, 0.6), RangeError);
  auto missing = s;
  missing.problems[0].baseline_solve_rate.reset();
  CHECK_THROWS_AS(filter_by_solve_rate(missing, 0.0, 1.0), MissingBaseline);
}

TEST_CASE("filter is idempotent") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rates;
    for (int i = 0; i < 30; ++i) rates.push_back(static_cast<double>(rng() % 9) / 8.0);
    auto once = filter_by_solve_rate(rated(rates), 0.125, 0.625);
    auto twice = filter_by_solve_rate(once, 0.125, 0.625);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once.problems[i].id == twice.problems[i].id);
  }
}

TEST_CASE("split is a deterministic disjoint partition") {
  auto s = rated(std::vector<double>(10, 0.5));
  auto [train, eval] = split(s, 7, 3, 1);
  CHECK(train.size() == 7);
  CHECK(eval.size() == 3);
  auto [train2, eval2] = split(s, 7, 3, 1);
  for (std::size_t i = 0; i < 7; ++i) CHECK(train.problems[i].id == train2.problems[i].id);
  CHECK_THROWS_AS(split(s, 9, 3, 1), InsufficientProblems);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto [a, b] = split(s, 4, 5, seed);
    std::set<std::string> ids;
    for (const auto& p : a.problems) ids.insert(p.id);
    for (const auto& p : b.problems) CHECK(ids.insert(p.id).second);
    CHECK(ids.size() == 9);
  }
}

}

TEST_SUITE("grading") {

TEST_CASE("answer equivalence") {
  CHECK(answers_equivalent("1/2", "0.5"));
  CHECK(answers_equivalent("42", "42"));
  CHECK(answers_equivalent("\\boxed{7}", "7"));
  CHECK(answers_equivalent("\\frac{3}{4}", "0.75"));
  CHECK(answers_equivalent("x = 3", "3"));
  CHECK(answers_equivalent("$12$.", "12"));
  CHECK(answers_equivalent("1,000", "1000"));
  CHECK(answers_equivalent("The answer is 9", "9"));
  CHECK(answers_equivalent("\\sqrt{2}", "\\sqrt{2}"));
  CHECK_FALSE(answers_equivalent("41", "42"));
  CHECK_FALSE(answers_equivalent("", "42"));
}

TEST_CASE("answer equivalence is symmetric") {
  const std::vector<std::string> pool = {"1/2", "0.5", "\\frac{1}{2}", "\\boxed{0.5}", "2",
                                         "x = 2", "$2$", "3", "-2", "\\dfrac{4}{2}", "abc", "ABC"};
  for (const auto& a : pool) {
    for (const auto& b : pool) CHECK(answers_equivalent(a, b) == answers_equivalent(b, a));
  }
}

TEST_CASE("final answer extraction") {
  CHECK(extract_final_answer("work\nANSWER: 12\n") == "12");
  CHECK(extract_final_answer("so \\boxed{3} done") == "3");
  CHECK(extract_final_answer("first\n\nlast line 7\n") == "last line 7");
}

TEST_CASE("numeric parsing") {
  CHECK(*parse_numeric_answer("-\\frac{1}{4}") == doctest::Approx(-0.25));
  CHECK(*parse_numeric_answer("3/8") == doctest::Approx(0.375));
  CHECK(*parse_numeric_answer("25%") == doctest::Approx(25.0));
  CHECK_FALSE(parse_numeric_answer("x+1"));
}

}

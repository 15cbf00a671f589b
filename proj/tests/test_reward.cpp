// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include <doctest.h>

#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/reward.hpp"
#include "pedtutor/rollout.hpp"
#include "support.hpp"

using namespace pedtutor;

namespace {

// Direct substitution, written independently of the library.
double oracle_reward(double sol, double ped, double think, bool with_think) {
  double r = sol + (ped - 1.0) * 0.75;
  if (with_think) r += (think - 0.6) * 0.3;
  return r;
}

Dialogue two_turn_dialogue(const std::string& think_a = "thinkA", const std::string& think_b = "thinkB") {
  Dialogue d;
  d.problem_id = "p";
  d.condition_id = "think-reward";
  d.seed = 3;
  d.turns.push_back(make_tutor_turn(parse_tutor_output("<think>" + think_a + "</think>Hint one.", true), 0));
  d.turns.push_back(make_student_turn("Maybe?", 1));
  auto last = think_b.empty() ? std::string("Good. <end_of_conversation>")
                              : "<think>" + think_b + "</think>Good. <end_of_conversation>";
  d.turns.push_back(make_tutor_turn(parse_tutor_output(last, true), 2));
  d.termination = Termination::EndMarker;
  return d;
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("composite reward spot values") {
  RewardWeights w;
  CHECK(composite_reward(1.0, 1.0, 0.6, w) == 1.0);
  CHECK(composite_reward(0.0, 0.0, 0.0, w) == doctest::Approx(-0.93).epsilon(1e-15));
  CHECK(composite_reward(0.5, 1.0, 0.6, w) == 0.5);
  CHECK(composite_reward(0.0, 0.0, 0.0, w, false) == -0.75);
  CHECK_THROWS_AS(composite_reward(1.5, 0.0, 0.0, w), PreconditionError);
}

TEST_CASE("composite reward matches the oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RewardWeights w;
  for (int i = 0; i < 500; ++i) {
    double s = u(rng), p = (rng() % 2) ? 1.0 : 0.0, t = u(rng);
    CHECK(std::abs(composite_reward(s, p, t, w) - oracle_reward(s, p, t, true)) <= 1e-12);
    CHECK(std::abs(composite_reward(s, p, t, w, false) - oracle_reward(s, p, t, false)) <= 1e-12);
  }
}

TEST_CASE("reward is monotone in each component") {
  RewardWeights w;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double a = u(rng), b = u(rng), t = u(rng), p = u(rng);
    double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(composite_reward(lo, p, t, w) <= composite_reward(hi, p, t, w));
    CHECK(composite_reward(t, lo, p, w) <= composite_reward(t, hi, p, w));
    CHECK(composite_reward(p, t, lo, w) <= composite_reward(p, t, hi, w));
  }
}

TEST_CASE("weights validation") {
  RewardWeights w;
  w.lambda_ped = -1;
  CHECK_THROWS_AS(w.validate(), RangeError);
}

TEST_CASE("group advantages") {
  auto z = grpo_advantages(std::vector<double>(8, 1.0));
  for (double a : z) CHECK(a == 0.0);
  auto two = grpo_advantages(std::vector<double>{0.0, 1.0});
  CHECK(two[0] == -1.0);
  CHECK(two[1] == 1.0);
  CHECK_THROWS_AS(grpo_advantages(std::vector<double>{}), EmptyGroup);
  std::vector<double> near = {1.0, 1.0 + 1e-12};
  for (double a : grpo_advantages(near)) CHECK(a == 0.0);
}

TEST_CASE("judge output shapes") {
  auto a = parse_decision_reply(R"({"reasoning":"guided","decision":"accept"})");
  REQUIRE(a);
  CHECK(a->decision == Decision::Accept);
  CHECK(a->reasoning == "guided");
  CHECK(parse_decision_reply(R"(prose {"decision": "ACCEPT", "extra": [1, {"x": "}"}]} tail)")->decision ==
        Decision::Accept);
  CHECK(parse_decision_reply(R"({"Decision": "reject"})")->decision == Decision::Reject);
  CHECK_FALSE(parse_decision_reply("not json"));
  CHECK_FALSE(parse_decision_reply(R"({"decision": "maybe"})"));
  CHECK(parse_score_reply(R"({"score": 0.85})")->score == 0.85);
  CHECK(parse_score_reply(R"({"reasoning": "r", "score": "0.5"})")->score == 0.5);
  CHECK_FALSE(parse_score_reply(R"({"score": "high"})"));
}

TEST_CASE("judge verdicts through the mock") {
  const auto& lib = testing::prompts();
  auto d = two_turn_dialogue();
  auto accept = Judge(lib, testing::mock_client("judge", testing::backend(
                                R"({"reply": "{\"reasoning\":\"guided\",\"decision\":\"accept\",\"x\":1}"})")));
  auto v = accept.leak(d);
  CHECK(v.accepted());
  CHECK(v.attempts == 1);
  auto reject = Judge(lib, testing::mock_client("judge", testing::backend(R"({"reply": "{\"decision\":\"reject\"}"})")));
  CHECK_FALSE(reject.help(d).accepted());
  auto upper = Judge(lib, testing::mock_client("judge", testing::backend(R"({"reply": "{\"decision\":\"ACCEPT\"}"})")));
  CHECK(upper.help(d).accepted());

  auto b = testing::backend(R"({"reply": "not json"})");
  Judge broken(lib, testing::mock_client("judge", b));
  CHECK_THROWS_AS(broken.leak(d), MalformedJudgeOutput);
  CHECK(b->calls() == 6);

  auto late = testing::backend(R"({"seed": 0, "reply": "nope"}
{"reply": "{\"decision\": \"accept\"}"})");
  CHECK(Judge(lib, testing::mock_client("judge", late)).leak(d).attempts == 2);
}

TEST_CASE("thinking score is the mean over tutor turns") {
  const auto& lib = testing::prompts();
  auto b = testing::backend(R"(
{"contains": "thinkB", "reply": "{\"score\": 0.6}"}
{"contains": "thinkA", "reply": "{\"score\": 0.8}"}
)");
  Judge j(lib, testing::mock_client("judge", b));
  auto s = j.thinking(two_turn_dialogue());
  REQUIRE(s.per_turn.size() == 2);
  CHECK(s.r_think == doctest::Approx(0.7).epsilon(1e-15));

  auto empty = two_turn_dialogue("", "");
  empty.turns[0].think_text.clear();
  auto calls = b->calls();
  CHECK(j.thinking(empty).r_think == 0.0);
  CHECK(b->calls() == calls);

  Judge high(lib, testing::mock_client("judge", testing::backend(R"({"reply": "{\"score\": 1.4}"})")));
  auto h = high.thinking(two_turn_dialogue());
  CHECK(h.r_think == 1.0);
  CHECK(h.clamped == 2);
}

TEST_CASE("solution reward counts post-dialogue attempts") {
  const auto& lib = testing::prompts();
  auto p = testing::problem("p", "Q", "5");
  auto d = two_turn_dialogue();
  auto half = testing::mock_client("student", testing::backend(
      R"({"replies": ["ANSWER: 5", "ANSWER: 4", "ANSWER: 5", "ANSWER: 4", "ANSWER: 5", "ANSWER: 4", "ANSWER: 5", "ANSWER: 4"]})"));
  CHECK(compute_r_sol(p, d, *half, lib, 8, 0) == 0.5);
  auto wrong = testing::mock_client("student", testing::backend(R"({"reply": "ANSWER: 1"})"));
  CHECK(compute_r_sol(p, d, *wrong, lib, 8, 0) == 0.0);
  auto right = testing::mock_client("student", testing::backend(R"({"reply": "\\boxed{5}"})"));
  CHECK(compute_r_sol(p, d, *right, lib, 8, 0) == 1.0);
}

TEST_CASE("scoring, advantages and batch emission") {
  const auto& lib = testing::prompts();
  auto p = testing::problem("p", "Q", "5");
  auto judge_backend = testing::backend(R"(
{"contains": "internal thinking", "scope": "system", "reply": "{\"score\": 0.9}"}
{"contains": "Good.", "reply": "{\"decision\": \"accept\"}"}
{"reply": "{\"decision\": \"reject\"}"}
)");
  Judge judge(lib, testing::mock_client("judge", judge_backend));
  auto student = testing::mock_client("student", testing::backend(R"({"reply": "ANSWER: 5"})"));
  ScoringContext ctx{&lib, Condition::think_reward(), RewardWeights{}, 4, 2, student, &judge};

  RolloutGroup g;
  g.problem_id = "p";
  auto d1 = two_turn_dialogue();
  auto d2 = two_turn_dialogue();
  d2.seed = 4;
  d2.turns.resize(1);
  d2.termination = Termination::MaxTurns;
  auto d3 = d2;
  d3.seed = 5;
  d3.termination = Termination::Error;
  d3.error = "tutor: TransportError: down";
  g.dialogues = {d1, d2, d3};
  std::vector<RolloutGroup> groups = {g};
  std::map<std::string, Problem> problems = {{"p", p}};
  score_groups(groups, problems, ctx);
  const auto& r = groups[0].rewards;
  CHECK(r[0].r_ped == 1.0);
  CHECK(r[0].reward == doctest::Approx(oracle_reward(1.0, 1.0, 0.9, true)).epsilon(1e-15));
  CHECK(r[1].r_ped == 0.0);
  CHECK(r[2].errored);
  CHECK(r[2].reward == doctest::Approx(oracle_reward(0, 0, 0, true)).epsilon(1e-15));
  double mean = 0;
  for (double a : groups[0].advantages) mean += a;
  CHECK(std::abs(mean) < 1e-12);

  testing::TempDir dir("batch");
  auto n = emit_training_batch(groups, problems, lib, ctx.condition, dir / "batch.jsonl");
  CHECK(n == 2 + 1 + 1);
  auto recs = read_jsonl(dir / "batch.jsonl");
  REQUIRE(recs.size() == 4);
  CHECK(recs[1]["turn_index"] == 2);
  CHECK(recs[1]["prompt_messages"].size() == 3);
  CHECK(recs[1]["advantage"] == groups[0].advantages[0]);
  CHECK(emit_training_batch({}, problems, lib, ctx.condition, dir / "empty.jsonl") == 0);
  auto missing = groups;
  missing[0].advantages.clear();
  CHECK_THROWS_AS(emit_training_batch(missing, problems, lib, ctx.condition, dir / "x.jsonl"),
                  PreconditionError);

  std::vector<nlohmann::json> records;
  for (std::size_t j = 0; j < 3; ++j) records.push_back(reward_record(groups[0], j));
  auto reloaded = std::vector<RolloutGroup>{g};
  attach_reward_records(reloaded, records);
  CHECK(reloaded[0].advantages == groups[0].advantages);
  CHECK(reloaded[0].rewards[0].leak->accepted());
}

TEST_CASE("one record per tutor turn") {
  const auto& lib = testing::prompts();
  RolloutGroup g;
  g.problem_id = "p";
  auto a = two_turn_dialogue();
  a.turns.push_back(make_student_turn("?", 3));
  a.turns.push_back(make_tutor_turn(parse_tutor_output("Third.", true), 4));
  g.dialogues = {a, two_turn_dialogue()};
  g.rewards.resize(2);
  g.advantages = {1.0, -1.0};
  testing::TempDir dir("five");
  std::map<std::string, Problem> problems = {{"p", testing::problem("p", "Q", "1")}};
  CHECK(emit_training_batch({g}, problems, lib, Condition::think_reward(), dir / "b.jsonl") == 5);
}

}

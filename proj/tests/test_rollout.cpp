// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <doctest.h>

#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/rollout.hpp"
#include "support.hpp"

using namespace pedtutor;

namespace {

RolloutConfig small(int G, int parallelism = 2) {
  RolloutConfig c;
  c.group_size = G;
  c.parallelism = parallelism;
  c.condition = Condition::think_no_reward();
  return c;
}

Agents agents(std::shared_ptr<MockBackend> b) {
  return {testing::mock_client("tutor", b), testing::mock_client("student", b)};
}

const char* kEndOnThird = R"(
{"model": "tutor", "turn": 2, "reply": "<think>done</think>Well done. <end_of_conversation>"}
{"model": "tutor", "reply": "<think>hint</think>What next?"}
{"model": "student", "reply": "Hmm."}
)";

std::vector<Problem> problems(int n) {
  std::vector<Problem> ps;
  for (int i = 0; i < n; ++i) ps.push_back(testing::problem("p" + std::to_string(i), "Q" + std::to_string(i), "1"));
  return ps;
}

}  // namespace

TEST_SUITE("rollout") {

TEST_CASE("dialogue ends on the third tutor turn") {
  auto d = run_dialogue(problems(1)[0], small(1), agents(testing::backend(kEndOnThird)),
                        testing::prompts(), 5);
  CHECK(d.tutor_turn_count() == 3);
  CHECK(d.turns.size() == 5);
  CHECK(d.termination == Termination::EndMarker);
  CHECK(d.seed == 5);
  CHECK_NOTHROW(validate_dialogue(d, 16));
}

TEST_CASE("never-ending tutor stops at the turn cap") {
  auto b = testing::backend(R"({"model": "tutor", "reply": "Keep going."}
{"model": "student", "reply": "Ok."})");
  auto d = run_dialogue(problems(1)[0], small(1), agents(b), testing::prompts(), 0);
  CHECK(d.tutor_turn_count() == 16);
  CHECK(d.termination == Termination::MaxTurns);
  CHECK(d.turns.back().speaker == Speaker::Tutor);
}

TEST_CASE("student hard failure keeps the partial dialogue") {
  auto b = testing::backend(R"({"model": "tutor", "reply": "Hint."}
{"model": "student", "fail_count": -1, "fail_status": 500})");
  auto d = run_dialogue(problems(1)[0], small(1), agents(b), testing::prompts(), 0);
  CHECK(d.termination == Termination::Error);
  CHECK(d.turns.size() == 1);
  CHECK(d.error.find("student") == 0);
}

TEST_CASE("tutor never sees its own earlier thinking") {
  auto b = testing::backend(R"(
{"model": "tutor", "contains": "SECRET", "scope": "any", "reply": "leaked <end_of_conversation>"}
{"model": "tutor", "turn": 1, "reply": "Fine. <end_of_conversation>"}
{"model": "tutor", "reply": "<think>SECRET</think>Hint."}
{"model": "student", "contains": "SECRET", "scope": "any", "reply": "I saw it"}
{"model": "student", "reply": "Ok."}
)");
  auto d = run_dialogue(problems(1)[0], small(1), agents(b), testing::prompts(), 0);
  REQUIRE(d.turns.size() == 3);
  CHECK(d.turns[1].visible_text == "Ok.");
  CHECK(d.turns[2].visible_text == "Fine.");
}

TEST_CASE("groups are deterministic per seed") {
  auto b = testing::backend(R"(
{"model": "tutor", "turn": 1, "replies": ["Done. <end_of_conversation>", "More?"]}
{"model": "tutor", "replies": ["A", "B", "C"]}
{"model": "student", "replies": ["x", "y"]}
)");
  auto g1 = run_group(problems(1)[0], small(8), agents(b), testing::prompts(), 100);
  auto g2 = run_group(problems(1)[0], small(8, 1), agents(b), testing::prompts(), 100);
  REQUIRE(g1.dialogues.size() == 8);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(g1.dialogues[j].seed == 100 + static_cast<std::int64_t>(j));
    CHECK(dialogue_to_json(g1.dialogues[j]) == dialogue_to_json(g2.dialogues[j]));
  }
  auto one = run_group(problems(1)[0], small(1), agents(b), testing::prompts(), 0);
  CHECK(one.dialogues.size() == 1);
}

TEST_CASE("all-failing endpoint aborts the group") {
  auto b = testing::backend(R"({"model": "tutor", "fail_count": -1})");
  CHECK_THROWS_AS(run_group(problems(1)[0], small(2), agents(b), testing::prompts(), 0), GroupAborted);
}

TEST_CASE("batch sizes") {
  auto b = testing::backend(kEndOnThird);
  auto r = run_batch(problems(16), small(8, 4), agents(b), testing::prompts());
  CHECK(r.dialogue_count() == 128);
  CHECK(r.groups.size() == 16);
  auto r1 = run_batch(problems(1), small(2), agents(b), testing::prompts());
  CHECK(r1.dialogue_count() == 2);
}

TEST_CASE("resume executes only the missing groups") {
  testing::TempDir dir("resume");
  auto log = dir / "rollouts.jsonl";
  auto b = testing::backend(kEndOnThird);
  auto ps = problems(16);
  auto cfg = small(2, 4);
  auto full = run_batch(ps, cfg, agents(b), testing::prompts(), {log, false});
  auto all = read_jsonl(log);
  REQUIRE(all.size() == 32);

  // Keep 10 complete groups plus a truncated partial line.
  std::string partial;
  for (const auto& rec : all) {
    auto id = rec["problem_id"].get<std::string>();
    int n = std::stoi(id.substr(1));
    if (n < 10) partial += rec.dump() + "\n";
  }
  partial += all[25].dump().substr(0, 20);
  write_file_atomic(log, partial);

  auto resumed = run_batch(ps, cfg, agents(b), testing::prompts(), {log, true});
  CHECK(resumed.resumed_groups == 10);
  CHECK(resumed.executed_groups == 6);
  auto after = read_jsonl(log);
  REQUIRE(after.size() == 32);
  CHECK(after == all);

  auto again = run_batch(ps, cfg, agents(b), testing::prompts(), {log, true});
  CHECK(again.executed_groups == 0);
  CHECK(read_jsonl(log).size() == 32);
}

TEST_CASE("dialogue JSON round trip") {
  auto d = run_dialogue(problems(1)[0], small(1), agents(testing::backend(kEndOnThird)),
                        testing::prompts(), 2);
  auto back = dialogue_from_json(dialogue_to_json(d));
  CHECK(dialogue_to_json(back) == dialogue_to_json(d));
  CHECK(back.turns.size() == d.turns.size());
  CHECK(back.termination == d.termination);
}

TEST_CASE("rollout config validation") {
  auto c = small(0);
  CHECK_THROWS_AS(c.validate(), RangeError);
  c = small(2);
  c.max_turns = 0;
  CHECK_THROWS_AS(c.validate(), RangeError);
}

}

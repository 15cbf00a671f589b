// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/rollout.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/parallel.hpp"

namespace pedtutor {

using nlohmann::json;

void RolloutConfig::validate() const {
  condition.validate();
  if (max_turns < 1) throw RangeError("max_turns must be >= 1");
  if (group_size < 1) throw RangeError("group_size must be >= 1");
  if (batch_problems < 1) throw RangeError("batch_problems must be >= 1");
  if (K < 1) throw RangeError("K must be >= 1");
  if (parallelism < 1) throw RangeError("parallelism must be >= 1");
}

json dialogue_to_json(const Dialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) {
    json jt = {{"speaker", to_string(t.speaker)},
               {"think", t.think_text},
               {"visible", t.visible_text},
               {"end_flag", t.end_flag},
               {"turn_index", t.turn_index}};
    if (t.malformed_think) jt["malformed_think"] = true;
    if (t.extra_think_spans) jt["extra_think_spans"] = t.extra_think_spans;
    turns.push_back(std::move(jt));
  }
  json j = {{"problem_id", d.problem_id},
            {"condition", d.condition_id},
            {"seed", d.seed},
            {"termination", to_string(d.termination)},
            {"turns", std::move(turns)},
            {"raw", d.raw}};
  if (!d.error.empty()) j["error"] = d.error;
  return j;
}

Dialogue dialogue_from_json(const json& j) {
  Dialogue d;
  try {
    d.problem_id = j.at("problem_id").get<std::string>();
    d.condition_id = j.at("condition").get<std::string>();
    d.seed = j.at("seed").get<std::int64_t>();
    d.termination = termination_from_string(j.at("termination").get<std::string>());
    for (const auto& jt : j.at("turns")) {
      DialogueTurn t;
      t.speaker = speaker_from_string(jt.at("speaker").get<std::string>());
      t.think_text = jt.value("think", "");
      t.visible_text = jt.at("visible").get<std::string>();
      t.end_flag = jt.value("end_flag", false);
      t.turn_index = jt.at("turn_index").get<int>();
      t.malformed_think = jt.value("malformed_think", false);
      t.extra_think_spans = jt.value("extra_think_spans", 0);
      d.turns.push_back(std::move(t));
    }
    d.raw = j.value("raw", std::vector<std::string>{});
    d.error = j.value("error", "");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed dialogue record: ") + e.what());
  }
  return d;
}

std::vector<Dialogue> load_rollout_log(const std::filesystem::path& path) {
  std::vector<Dialogue> out;
  for (const auto& j : read_jsonl(path, /*tolerate_truncated_tail=*/true)) {
    out.push_back(dialogue_from_json(j));
  }
  return out;
}

std::int64_t rollout_seed(const RolloutConfig& cfg, std::size_t problem_index, int member) {
  return cfg.seed + static_cast<std::int64_t>(problem_index) * cfg.group_size + member;
}

Dialogue run_dialogue(const Problem& p, const RolloutConfig& cfg, const Agents& agents,
                      const PromptLibrary& lib, std::int64_t seed) {
  Dialogue d;
  d.problem_id = p.id;
  d.condition_id = cfg.condition.name;
  d.seed = seed;
  d.termination = Termination::MaxTurns;

  auto fail = [&](std::string_view who, const Error& e) {
    d.termination = Termination::Error;
    d.error = std::string(who) + ": " + e.kind() + ": " + e.what();
    spdlog::warn("dialogue {}#{} aborted: {}", p.id, seed, d.error);
  };

  int tutor_turns = 0;
  while (true) {
    const int idx = static_cast<int>(d.turns.size());
    ChatResult reply;
    try {
      reply = agents.tutor->chat(tutor_messages(lib, cfg.condition, p, d, idx), seed);
    } catch (const Error& e) {
      fail("tutor", e);
      return d;
    }
    auto parsed = parse_tutor_output(reply.content, cfg.condition.thinking_enabled);
    d.turns.push_back(make_tutor_turn(parsed, idx));
    d.raw.push_back(std::move(reply.content));
    ++tutor_turns;
    if (parsed.end_flag) {
      d.termination = Termination::EndMarker;
      return d;
    }
    if (tutor_turns >= cfg.max_turns) {
      d.termination = Termination::MaxTurns;
      return d;
    }

    try {
      reply = agents.student->chat(student_messages(lib, p, d, idx + 1), seed);
    } catch (const Error& e) {
      fail("student", e);
      return d;
    }
    d.turns.push_back(make_student_turn(trim(reply.content), idx + 1));
    d.raw.push_back(std::move(reply.content));
  }
}

namespace {

void check_not_aborted(const RolloutGroup& g) {
  for (const auto& d : g.dialogues) {
    if (d.termination != Termination::Error) return;
  }
  throw GroupAborted("every dialogue for problem '" + g.problem_id + "' failed: " +
                     (g.dialogues.empty() ? std::string("no dialogues") : g.dialogues.front().error));
}

}  // namespace

RolloutGroup run_group(const Problem& p, const RolloutConfig& cfg, const Agents& agents,
                       const PromptLibrary& lib, std::int64_t base_seed) {
  cfg.validate();
  RolloutGroup g;
  g.problem_id = p.id;
  g.dialogues.resize(static_cast<std::size_t>(cfg.group_size));
  parallel_for(g.dialogues.size(), cfg.parallelism, [&](std::size_t j) {
    g.dialogues[j] = run_dialogue(p, cfg, agents, lib, base_seed + static_cast<std::int64_t>(j));
  });
  check_not_aborted(g);
  return g;
}

std::size_t BatchResult::dialogue_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.dialogues.size();
  return n;
}

std::vector<RolloutGroup> group_dialogues(const std::vector<Dialogue>& dialogues) {
  std::vector<RolloutGroup> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& d : dialogues) {
    auto [it, inserted] = index.try_emplace(d.problem_id, groups.size());
    if (inserted) groups.push_back(RolloutGroup{d.problem_id, {}, {}, {}});
    groups[it->second].dialogues.push_back(d);
  }
  return groups;
}

namespace {

void write_group(std::ostream& out, const RolloutGroup& g) {
  for (const auto& d : g.dialogues) out << dialogue_to_json(d).dump() << '\n';
  out.flush();
}

}  // namespace

BatchResult run_batch(const std::vector<Problem>& problems, const RolloutConfig& cfg,
                      const Agents& agents, const PromptLibrary& lib, const BatchOptions& opts) {
  cfg.validate();
  if (problems.empty()) throw PreconditionError("run_batch needs at least one problem");
  const auto G = static_cast<std::size_t>(cfg.group_size);
  const std::size_t n = problems.size();

  enum class State : char { Pending, Done, Aborted, Resumed };
  std::vector<RolloutGroup> slots(n);
  std::vector<State> state(n, State::Pending);

  // Reuse complete groups whose seeds match this configuration.
  if (opts.resume && !opts.log_path.empty() && std::filesystem::exists(opts.log_path)) {
    std::map<std::string, std::vector<Dialogue>> by_id;
    for (auto& d : load_rollout_log(opts.log_path)) by_id[d.problem_id].push_back(std::move(d));
    for (std::size_t i = 0; i < n; ++i) {
      auto it = by_id.find(problems[i].id);
      if (it == by_id.end() || it->second.size() != G) continue;
      bool seeds_match = true;
      for (std::size_t j = 0; j < G; ++j) {
        seeds_match = seeds_match &&
                      it->second[j].seed == rollout_seed(cfg, i, static_cast<int>(j)) &&
                      it->second[j].condition_id == cfg.condition.name;
      }
      if (!seeds_match) continue;
      slots[i] = RolloutGroup{problems[i].id, std::move(it->second), {}, {}};
      state[i] = State::Resumed;
    }
  }

  std::ofstream log;
  if (!opts.log_path.empty()) {
    if (opts.log_path.has_parent_path()) {
      std::filesystem::create_directories(opts.log_path.parent_path());
    }
    // Rewrite with only the reusable groups, in input order.
    std::string kept;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] != State::Resumed) continue;
      for (const auto& d : slots[i].dialogues) kept.append(dialogue_to_json(d).dump()).push_back('\n');
    }
    write_file_atomic(opts.log_path, kept);
    log.open(opts.log_path, std::ios::app);
    if (!log) throw IoError("cannot open rollout log '" + opts.log_path.string() + "'");
  }

  struct Task {
    std::size_t problem;
    std::size_t member;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] != State::Pending) continue;
    slots[i].problem_id = problems[i].id;
    slots[i].dialogues.resize(G);
    for (std::size_t j = 0; j < G; ++j) tasks.push_back({i, j});
  }
  std::vector<std::atomic<std::size_t>> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = state[i] == State::Pending ? G : 0;

  std::mutex mu;
  std::size_t flushed = 0;
  auto flush_ready = [&] {
    // Held under mu. Groups reach disk in input order.
    while (flushed < n && state[flushed] != State::Pending) {
      if (state[flushed] == State::Done && log.is_open()) write_group(log, slots[flushed]);
      ++flushed;
    }
  };
  {
    std::lock_guard lock(mu);
    flush_ready();
  }

  BatchResult result;
  bool any_resumed = false;
  for (auto st : state) any_resumed = any_resumed || st == State::Resumed;
  parallel_for(tasks.size(), cfg.parallelism, [&](std::size_t t) {
    const auto [i, j] = tasks[t];
    slots[i].dialogues[j] =
        run_dialogue(problems[i], cfg, agents, lib, rollout_seed(cfg, i, static_cast<int>(j)));
    if (--remaining[i] != 0) return;
    std::lock_guard lock(mu);
    try {
      check_not_aborted(slots[i]);
      state[i] = State::Done;
    } catch (const GroupAborted& e) {
      spdlog::error("{}", e.what());
      state[i] = State::Aborted;
    }
    flush_ready();
  });

  if (any_resumed && log.is_open()) {
    // Resumed groups need not have been a prefix; restore input order so
    // the log matches an uninterrupted run.
    log.close();
    std::string all;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] != State::Done && state[i] != State::Resumed) continue;
      for (const auto& d : slots[i].dialogues) all.append(dialogue_to_json(d).dump()).push_back('\n');
    }
    write_file_atomic(opts.log_path, all);
  }

  for (std::size_t i = 0; i < n; ++i) {
    switch (state[i]) {
      case State::Done:
        ++result.executed_groups;
        result.groups.push_back(std::move(slots[i]));
        break;
      case State::Resumed:
        ++result.resumed_groups;
        result.groups.push_back(std::move(slots[i]));
        break;
      case State::Aborted:
        ++result.executed_groups;
        result.aborted_problem_ids.push_back(problems[i].id);
        break;
      case State::Pending:
        break;
    }
  }
  return result;
}

}  // namespace pedtutor

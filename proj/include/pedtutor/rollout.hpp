// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/prompts.hpp"
#include "pedtutor/reward_types.hpp"

namespace pedtutor {

struct RolloutConfig {
  Condition condition = Condition::ped_think_reward();
  int max_turns = 16;
  int group_size = 8;
  int batch_problems = 16;
  int K = 8;
  int parallelism = 8;
  std::int64_t seed = 0;

  void validate() const;
};

struct Agents {
  std::shared_ptr<ChatClient> tutor;
  std::shared_ptr<ChatClient> student;
};

struct RolloutGroup {
  std::string problem_id;
  std::vector<Dialogue> dialogues;
  // Filled by scoring; empty or of size dialogues.size().
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;
};

nlohmann::json dialogue_to_json(const Dialogue& d);
Dialogue dialogue_from_json(const nlohmann::json& j);

/// Tolerates a truncated final line (interrupted writer).
std::vector<Dialogue> load_rollout_log(const std::filesystem::path& path);

/// Seed of dialogue `member` in the group for the problem at `problem_index`.
std::int64_t rollout_seed(const RolloutConfig& cfg, std::size_t problem_index,
                          int member);

/// Tutor and student alternate, tutor first, until the tutor writes the end
/// marker or max_turns tutor turns have been produced. An endpoint failure
/// ends the dialogue with termination=Error, keeping the turns so far.
Dialogue run_dialogue(const Problem& p, const RolloutConfig& cfg, const Agents& agents,
                      const PromptLibrary& lib, std::int64_t seed);

/// G dialogues with seeds base_seed..base_seed+G-1. Throws GroupAborted when
/// every dialogue errored.
RolloutGroup run_group(const Problem& p, const RolloutConfig& cfg, const Agents& agents,
                       const PromptLibrary& lib, std::int64_t base_seed);

struct BatchResult {
  // One entry per input problem, in input order; aborted groups are absent.
  std::vector<RolloutGroup> groups;
  std::size_t executed_groups = 0;
  std::size_t resumed_groups = 0;
  std::vector<std::string> aborted_problem_ids;

  std::size_t dialogue_count() const;
};

struct BatchOptions {
  // Rollout log; empty path = in-memory only.
  std::filesystem::path log_path;
  // Reuse complete groups already present in log_path.
  bool resume = false;
};

/// Runs every group with a global cap of cfg.parallelism concurrent
/// dialogues. Completed groups are appended to the log in input order as
/// soon as all earlier groups are done, so the file is byte-stable.
BatchResult run_batch(const std::vector<Problem>& problems, const RolloutConfig& cfg,
                      const Agents& agents, const PromptLibrary& lib,
                      const BatchOptions& opts = {});

/// Groups dialogues by problem id, preserving first-seen order.
std::vector<RolloutGroup> group_dialogues(const std::vector<Dialogue>& dialogues);

}  // namespace pedtutor

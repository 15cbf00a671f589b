// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/prompts.hpp"
#include "pedtutor/reward_types.hpp"
#include "pedtutor/rollout.hpp"

namespace pedtutor {

/// r = r_sol + (r_ped - 1)·λ_ped + (r_think - θ)·λ_think; the thinking term
/// is dropped when the condition has no thinking reward.
double composite_reward(double r_sol, double r_ped, double r_think,
                        const RewardWeights& w, bool thinking_reward_enabled = true);

inline constexpr double kAdvantageEps = 1e-8;

/// Group z-score with population std; all zeros when std < eps.
/// Throws EmptyGroup.
std::vector<double> grpo_advantages(std::span<const double> rewards,
                                    double eps = kAdvantageEps);

/// First balanced {...} in `text` that parses as a JSON object.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

struct DecisionReply {
  Decision decision;
  std::string reasoning;
};
struct ScoreReply {
  double score;
  std::string reasoning;
};

/// {"reasoning": ..., "decision": "accept"|"reject"}, case-folded, extra
/// fields ignored, JSON may be wrapped in prose.
std::optional<DecisionReply> parse_decision_reply(std::string_view raw);
/// {"score": x, "reasoning": ...}; the score is returned unclamped.
std::optional<ScoreReply> parse_score_reply(std::string_view raw);

struct ThinkingScore {
  double r_think = 0.0;
  std::vector<double> per_turn;
  int clamped = 0;
};

/// Leak, helpfulness and thinking-quality judges over one judge endpoint.
/// Malformed replies are re-requested up to the endpoint's max_retries.
class Judge {
 public:
  Judge(const PromptLibrary& lib, std::shared_ptr<ChatClient> client,
        std::shared_ptr<JsonlLog> audit = nullptr);

  /// `upto_turn` restricts the transcript to a prefix ending at that turn.
  JudgeVerdict leak(const Dialogue& d, std::optional<int> upto_turn = std::nullopt) const;
  JudgeVerdict help(const Dialogue& d, std::optional<int> upto_turn = std::nullopt) const;
  /// Mean of per-tutor-turn scores; empty thinking scores 0 without a call.
  ThinkingScore thinking(const Dialogue& d) const;

 private:
  JudgeVerdict decide(PromptRole role, std::string_view name, const Dialogue& d,
                      std::optional<int> upto_turn) const;

  const PromptLibrary* lib_;
  std::shared_ptr<ChatClient> client_;
  std::shared_ptr<JsonlLog> audit_;
};

/// r_sol: K post-dialogue solo attempts (seeds seed..seed+K-1).
double compute_r_sol(const Problem& p, const Dialogue& d, const ChatClient& student,
                     const PromptLibrary& lib, int K, std::int64_t seed,
                     int parallelism = 1);

struct ScoringContext {
  const PromptLibrary* lib = nullptr;
  Condition condition;
  RewardWeights weights;
  int K = 8;
  int parallelism = 1;
  std::shared_ptr<ChatClient> student;
  const Judge* judge = nullptr;
};

RewardBreakdown score_dialogue(const Problem& p, const Dialogue& d,
                               const ScoringContext& ctx);

/// Scores every dialogue (fanned out under ctx.parallelism) and fills
/// rewards and advantages.
void score_groups(std::vector<RolloutGroup>& groups,
                  const std::map<std::string, Problem>& problems,
                  const ScoringContext& ctx);

nlohmann::json reward_record(const RolloutGroup& g, std::size_t member);
/// Restores rewards/advantages from reward records onto matching dialogues
/// (by problem id and seed). Throws ParseError on mismatches.
void attach_reward_records(std::vector<RolloutGroup>& groups,
                           const std::vector<nlohmann::json>& records);

/// One JSONL record per tutor turn with the dialogue-level reward and
/// advantage broadcast to each. Returns the record count. Throws
/// PreconditionError for groups without rewards/advantages, IoError.
std::size_t emit_training_batch(const std::vector<RolloutGroup>& groups,
                                const std::map<std::string, Problem>& problems,
                                const PromptLibrary& lib, const Condition& condition,
                                const std::filesystem::path& path);

}  // namespace pedtutor

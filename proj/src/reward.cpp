// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "pedtutor/error.hpp"
#include "pedtutor/grading.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/kernels.hpp"
#include "pedtutor/parallel.hpp"

namespace pedtutor {

using nlohmann::json;

void RewardWeights::validate() const {
  if (!(lambda_ped >= 0.0)) throw RangeError("lambda_ped must be >= 0");
  if (!(lambda_think >= 0.0)) throw RangeError("lambda_think must be >= 0");
  if (!(theta >= 0.0 && theta <= 1.0)) throw RangeError("theta must be in [0,1]");
}

std::string_view to_string(Decision d) { return d == Decision::Accept ? "accept" : "reject"; }

double composite_reward(double r_sol, double r_ped, double r_think, const RewardWeights& w,
                        bool thinking_reward_enabled) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(r_sol) || !in_unit(r_ped) || !in_unit(r_think)) {
    throw PreconditionError("reward components must lie in [0,1]");
  }
  double r = r_sol + (r_ped - 1.0) * w.lambda_ped;
  if (thinking_reward_enabled) r += (r_think - w.theta) * w.lambda_think;
  return r;
}

std::vector<double> grpo_advantages(std::span<const double> rewards, double eps) {
  if (rewards.empty()) throw EmptyGroup("cannot normalise an empty group");
  const auto n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < eps) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

std::optional<json> extract_json_object(std::string_view text) {
  for (auto start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        try {
          auto j = json::parse(text.substr(start, i - start + 1));
          if (j.is_object()) return j;
        } catch (const json::exception&) {
        }
        break;
      }
    }
  }
  return std::nullopt;
}

namespace {

const json* find_key_ci(const json& obj, std::string_view key) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (to_lower(it.key()) == key) return &it.value();
  }
  return nullptr;
}

std::string reasoning_of(const json& obj) {
  const json* r = find_key_ci(obj, "reasoning");
  return r && r->is_string() ? r->get<std::string>() : std::string();
}

}  // namespace

std::optional<DecisionReply> parse_decision_reply(std::string_view raw) {
  auto obj = extract_json_object(raw);
  if (!obj) return std::nullopt;
  const json* d = find_key_ci(*obj, "decision");
  if (!d || !d->is_string()) return std::nullopt;
  auto v = to_lower(trim(d->get<std::string>()));
  if (v == "accept") return DecisionReply{Decision::Accept, reasoning_of(*obj)};
  if (v == "reject") return DecisionReply{Decision::Reject, reasoning_of(*obj)};
  return std::nullopt;
}

std::optional<ScoreReply> parse_score_reply(std::string_view raw) {
  auto obj = extract_json_object(raw);
  if (!obj) return std::nullopt;
  const json* s = find_key_ci(*obj, "score");
  if (!s) return std::nullopt;
  double v;
  if (s->is_number()) {
    v = s->get<double>();
  } else if (s->is_string()) {
    try {
      std::size_t used = 0;
      auto str = trim(s->get<std::string>());
      v = std::stod(str, &used);
      if (used != str.size()) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return ScoreReply{v, reasoning_of(*obj)};
}

// --- Judge -----------------------------------------------------------------

namespace {

std::string ref_of(const Dialogue& d) { return d.problem_id + "#" + std::to_string(d.seed); }

bool has_tutor_turn(const Dialogue& d, std::optional<int> upto) {
  return std::any_of(d.turns.begin(), d.turns.end(), [&](const DialogueTurn& t) {
    return t.speaker == Speaker::Tutor && (!upto || t.turn_index <= *upto);
  });
}

}  // namespace

Judge::Judge(const PromptLibrary& lib, std::shared_ptr<ChatClient> client,
             std::shared_ptr<JsonlLog> audit)
    : lib_(&lib), client_(std::move(client)), audit_(std::move(audit)) {
  if (!client_) throw PreconditionError("judge needs a chat client");
}

JudgeVerdict Judge::decide(PromptRole role, std::string_view name, const Dialogue& d,
                           std::optional<int> upto_turn) const {
  if (!has_tutor_turn(d, upto_turn)) {
    throw PreconditionError("judging needs at least one tutor turn");
  }
  const std::vector<ChatMessage> msgs = {
      {Role::System, lib_->raw(role)},
      {Role::User, "Conversation:\n" + render_transcript(d, TranscriptView::VisibleOnly, upto_turn)}};
  const int max_attempts = 1 + client_->config().max_retries;
  std::string last_raw;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    last_raw = client_->chat(msgs, attempt).content;
    auto parsed = parse_decision_reply(last_raw);
    if (audit_) {
      json rec = {{"dialogue_ref", ref_of(d)}, {"judge", name}, {"raw", last_raw},
                  {"parsed", parsed ? json(to_string(parsed->decision)) : json(nullptr)},
                  {"attempts", attempt + 1}};
      if (upto_turn) rec["turn_index"] = *upto_turn;
      audit_->write(rec);
    }
    if (parsed) return JudgeVerdict{parsed->decision, parsed->reasoning, last_raw, attempt + 1};
  }
  throw MalformedJudgeOutput(std::string(name) + " judge: no valid verdict after " +
                             std::to_string(max_attempts) + " attempts; last reply: " +
                             last_raw.substr(0, 200));
}

JudgeVerdict Judge::leak(const Dialogue& d, std::optional<int> upto_turn) const {
  return decide(PromptRole::JudgeLeak, "leak", d, upto_turn);
}

JudgeVerdict Judge::help(const Dialogue& d, std::optional<int> upto_turn) const {
  return decide(PromptRole::JudgeHelp, "help", d, upto_turn);
}

ThinkingScore Judge::thinking(const Dialogue& d) const {
  ThinkingScore out;
  const int max_attempts = 1 + client_->config().max_retries;
  for (const auto& t : d.turns) {
    if (t.speaker != Speaker::Tutor) continue;
    if (t.think_text.empty()) {
      out.per_turn.push_back(0.0);
      continue;
    }
    const std::vector<ChatMessage> msgs = {
        {Role::System, lib_->raw(PromptRole::JudgeThinking)},
        {Role::User, "Conversation:\n" +
                         render_transcript(d, TranscriptView::WithThinking, t.turn_index) +
                         "\n\nEvaluate the teacher's internal thinking in the final teacher turn."}};
    std::optional<ScoreReply> parsed;
    std::string raw;
    for (int attempt = 0; attempt < max_attempts && !parsed; ++attempt) {
      raw = client_->chat(msgs, attempt).content;
      parsed = parse_score_reply(raw);
      if (audit_) {
        audit_->write({{"dialogue_ref", ref_of(d)}, {"judge", "thinking"},
                       {"turn_index", t.turn_index}, {"raw", raw},
                       {"parsed", parsed ? json(parsed->score) : json(nullptr)},
                       {"attempts", attempt + 1}});
      }
    }
    if (!parsed) {
      throw MalformedJudgeOutput("thinking judge: no valid score after " +
                                 std::to_string(max_attempts) + " attempts; last reply: " +
                                 raw.substr(0, 200));
    }
    double s = parsed->score;
    if (s < 0.0 || s > 1.0) {
      spdlog::warn("thinking score {} for {} turn {} clamped to [0,1]", s, ref_of(d), t.turn_index);
      s = std::clamp(s, 0.0, 1.0);
      ++out.clamped;
    }
    out.per_turn.push_back(s);
  }
  if (!out.per_turn.empty()) {
    out.r_think = std::accumulate(out.per_turn.begin(), out.per_turn.end(), 0.0) /
                  static_cast<double>(out.per_turn.size());
  }
  return out;
}

double compute_r_sol(const Problem& p, const Dialogue& d, const ChatClient& student,
                     const PromptLibrary& lib, int K, std::int64_t seed, int parallelism) {
  return solve_rate(p, &d, student, lib, K, seed, parallelism);
}

// --- scoring ---------------------------------------------------------------

RewardBreakdown score_dialogue(const Problem& p, const Dialogue& d, const ScoringContext& ctx) {
  RewardBreakdown b;
  const bool think_reward = ctx.condition.thinking_reward_enabled;
  if (d.termination == Termination::Error) {
    b.errored = true;
    b.reward = composite_reward(0.0, 0.0, 0.0, ctx.weights, think_reward);
    return b;
  }
  if (!ctx.lib || !ctx.student || !ctx.judge) {
    throw PreconditionError("scoring context is missing prompts, student or judge");
  }
  b.r_sol = compute_r_sol(p, d, *ctx.student, *ctx.lib, ctx.K, d.seed * ctx.K);
  b.leak = ctx.judge->leak(d);
  b.help = ctx.judge->help(d);
  b.r_ped = (b.leak->accepted() && b.help->accepted()) ? 1.0 : 0.0;
  if (think_reward) {
    auto ts = ctx.judge->thinking(d);
    b.r_think = ts.r_think;
    b.think_scores = std::move(ts.per_turn);
  }
  b.reward = composite_reward(b.r_sol, b.r_ped, b.r_think, ctx.weights, think_reward);
  return b;
}

void score_groups(std::vector<RolloutGroup>& groups,
                  const std::map<std::string, Problem>& problems, const ScoringContext& ctx) {
  struct Task {
    std::size_t group;
    std::size_t member;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!problems.count(groups[g].problem_id)) {
      throw PreconditionError("no problem record for '" + groups[g].problem_id + "'");
    }
    groups[g].rewards.assign(groups[g].dialogues.size(), RewardBreakdown{});
    for (std::size_t j = 0; j < groups[g].dialogues.size(); ++j) tasks.push_back({g, j});
  }
  parallel_for(tasks.size(), ctx.parallelism, [&](std::size_t t) {
    auto [g, j] = tasks[t];
    groups[g].rewards[j] =
        score_dialogue(problems.at(groups[g].problem_id), groups[g].dialogues[j], ctx);
  });

  std::vector<double> flat;
  std::vector<std::size_t> offsets{0};
  for (const auto& g : groups) {
    if (g.rewards.empty()) throw EmptyGroup("group '" + g.problem_id + "' has no dialogues");
    for (const auto& r : g.rewards) flat.push_back(r.reward);
    offsets.push_back(flat.size());
  }
  std::vector<double> adv(flat.size());
  kernels::parallel::group_advantages(flat, offsets, kAdvantageEps, adv);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].advantages.assign(adv.begin() + static_cast<std::ptrdiff_t>(offsets[g]),
                                adv.begin() + static_cast<std::ptrdiff_t>(offsets[g + 1]));
  }
}

namespace {

json verdict_json(const std::optional<JudgeVerdict>& v) {
  if (!v) return nullptr;
  return {{"decision", to_string(v->decision)}, {"reasoning", v->reasoning},
          {"attempts", v->attempts}};
}

std::optional<JudgeVerdict> verdict_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  JudgeVerdict v;
  v.decision = j.at("decision").get<std::string>() == "accept" ? Decision::Accept : Decision::Reject;
  v.reasoning = j.value("reasoning", "");
  v.attempts = j.value("attempts", 0);
  return v;
}

}  // namespace

json reward_record(const RolloutGroup& g, std::size_t member) {
  const auto& d = g.dialogues.at(member);
  const auto& b = g.rewards.at(member);
  json rec = {{"problem_id", g.problem_id},
              {"seed", d.seed},
              {"termination", to_string(d.termination)},
              {"r_sol", b.r_sol},
              {"r_ped", b.r_ped},
              {"r_think", b.r_think},
              {"reward", b.reward},
              {"advantage", member < g.advantages.size() ? json(g.advantages[member]) : json(nullptr)},
              {"errored", b.errored},
              {"leak", verdict_json(b.leak)},
              {"help", verdict_json(b.help)},
              {"think_scores", b.think_scores}};
  return rec;
}

void attach_reward_records(std::vector<RolloutGroup>& groups, const std::vector<json>& records) {
  std::map<std::pair<std::string, std::int64_t>, const json*> index;
  for (const auto& r : records) {
    index[{r.at("problem_id").get<std::string>(), r.at("seed").get<std::int64_t>()}] = &r;
  }
  for (auto& g : groups) {
    g.rewards.clear();
    g.advantages.clear();
    for (const auto& d : g.dialogues) {
      auto it = index.find({g.problem_id, d.seed});
      if (it == index.end()) {
        throw ParseError("no reward record for " + g.problem_id + "#" + std::to_string(d.seed));
      }
      const json& r = *it->second;
      RewardBreakdown b;
      b.r_sol = r.at("r_sol").get<double>();
      b.r_ped = r.at("r_ped").get<double>();
      b.r_think = r.at("r_think").get<double>();
      b.reward = r.at("reward").get<double>();
      b.errored = r.value("errored", false);
      b.leak = verdict_from(r.value("leak", json(nullptr)));
      b.help = verdict_from(r.value("help", json(nullptr)));
      b.think_scores = r.value("think_scores", std::vector<double>{});
      g.rewards.push_back(std::move(b));
      if (r.contains("advantage") && !r["advantage"].is_null()) {
        g.advantages.push_back(r["advantage"].get<double>());
      }
    }
    if (g.advantages.size() != g.dialogues.size()) g.advantages.clear();
  }
}

std::size_t emit_training_batch(const std::vector<RolloutGroup>& groups,
                                const std::map<std::string, Problem>& problems,
                                const PromptLibrary& lib, const Condition& condition,
                                const std::filesystem::path& path) {
  std::string out;
  std::size_t count = 0;
  for (const auto& g : groups) {
    if (g.rewards.size() != g.dialogues.size() || g.advantages.size() != g.dialogues.size()) {
      throw PreconditionError("group '" + g.problem_id + "' lacks rewards or advantages");
    }
    auto pit = problems.find(g.problem_id);
    if (pit == problems.end()) {
      throw PreconditionError("no problem record for '" + g.problem_id + "'");
    }
    for (std::size_t j = 0; j < g.dialogues.size(); ++j) {
      const auto& d = g.dialogues[j];
      for (std::size_t idx = 0; idx < d.turns.size(); ++idx) {
        const auto& t = d.turns[idx];
        if (t.speaker != Speaker::Tutor) continue;
        json msgs = json::array();
        for (const auto& m : tutor_messages(lib, condition, pit->second, d, static_cast<int>(idx))) {
          msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        std::string raw = idx < d.raw.size()
                              ? d.raw[idx]
                              : format_tutor_output(t.think_text, t.visible_text, t.end_flag);
        json rec = {{"problem_id", g.problem_id},
                    {"rollout_seed", d.seed},
                    {"turn_index", t.turn_index},
                    {"prompt_messages", std::move(msgs)},
                    {"response_raw", std::move(raw)},
                    {"reward", g.rewards[j].reward},
                    {"advantage", g.advantages[j]}};
        out.append(rec.dump()).push_back('\n');
        ++count;
      }
    }
  }
  try {
    write_file_atomic(path, out);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }
  return count;
}

}  // namespace pedtutor

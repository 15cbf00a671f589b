// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/eval.hpp"

#include <cstdio>
#include <numeric>

#include "pedtutor/error.hpp"
#include "pedtutor/parallel.hpp"

namespace pedtutor {

using nlohmann::json;

double delta_solve_rate(std::span<const double> pre, std::span<const double> post) {
  if (pre.size() != post.size()) {
    throw LengthMismatch("pre has " + std::to_string(pre.size()) + " rates, post has " +
                         std::to_string(post.size()));
  }
  if (pre.empty()) throw PreconditionError("delta_solve_rate needs at least one problem");
  const auto n = static_cast<double>(pre.size());
  const double mean_pre = std::accumulate(pre.begin(), pre.end(), 0.0) / n;
  const double mean_post = std::accumulate(post.begin(), post.end(), 0.0) / n;
  return mean_post - mean_pre;
}

std::vector<ResponseJudgement> judge_responses(const std::vector<Dialogue>& dialogues,
                                               const Judge& judge, ResponseJudge which,
                                               int parallelism) {
  std::vector<ResponseJudgement> out;
  std::vector<std::pair<const Dialogue*, int>> tasks;
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::Tutor) continue;
      tasks.emplace_back(&d, t.turn_index);
      out.push_back({d.problem_id, d.seed, t.turn_index, std::nullopt, {}});
    }
  }
  parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
    const auto& [d, turn] = tasks[i];
    try {
      auto v = which == ResponseJudge::Leak ? judge.leak(*d, turn) : judge.help(*d, turn);
      out[i].decision = v.decision;
    } catch (const Error& e) {
      out[i].error = e.kind() + ": " + e.what();
    }
  });
  return out;
}

namespace {

ResponseRate rate_of(const std::vector<ResponseJudgement>& js, Decision positive) {
  ResponseRate r;
  for (const auto& j : js) {
    if (!j.decision) {
      ++r.failed;
      continue;
    }
    ++r.judged;
    if (*j.decision == positive) ++r.positive;
  }
  r.rate = r.judged ? static_cast<double>(r.positive) / static_cast<double>(r.judged) : 0.0;
  return r;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace

ResponseRate leak_rate_from(const std::vector<ResponseJudgement>& judgements) {
  return rate_of(judgements, Decision::Reject);
}

ResponseRate helpful_rate_from(const std::vector<ResponseJudgement>& judgements) {
  return rate_of(judgements, Decision::Accept);
}

ResponseRate leak_rate(const std::vector<Dialogue>& dialogues, const Judge& judge,
                       int parallelism) {
  if (dialogues.empty()) throw PreconditionError("leak_rate needs dialogues");
  return leak_rate_from(judge_responses(dialogues, judge, ResponseJudge::Leak, parallelism));
}

ResponseRate helpful_rate(const std::vector<Dialogue>& dialogues, const Judge& judge,
                          int parallelism) {
  if (dialogues.empty()) throw PreconditionError("helpful_rate needs dialogues");
  return helpful_rate_from(judge_responses(dialogues, judge, ResponseJudge::Help, parallelism));
}

EvalReport build_eval_report(const std::string& condition_id,
                             const std::map<std::string, Problem>& problems,
                             const std::map<std::string, double>& post,
                             const std::vector<ResponseJudgement>& leak,
                             const std::vector<ResponseJudgement>& help) {
  EvalReport r;
  r.condition_id = condition_id;
  std::map<std::string, EvalRow> rows;
  std::vector<double> pre_rates, post_rates;
  for (const auto& [id, rate] : post) {
    auto it = problems.find(id);
    if (it == problems.end() || !it->second.baseline_solve_rate) throw MissingBaseline(id);
    EvalRow row;
    row.problem_id = id;
    row.pre = *it->second.baseline_solve_rate;
    row.post = rate;
    pre_rates.push_back(row.pre);
    post_rates.push_back(row.post);
    rows.emplace(id, row);
  }
  for (const auto& j : leak) {
    auto it = rows.find(j.problem_id);
    if (it == rows.end() || !j.decision) continue;
    ++it->second.responses;
    if (*j.decision == Decision::Reject) ++it->second.leaks;
  }
  for (const auto& j : help) {
    auto it = rows.find(j.problem_id);
    if (it == rows.end() || !j.decision) continue;
    if (*j.decision == Decision::Accept) ++it->second.helpful;
  }
  for (auto& [id, row] : rows) r.rows.push_back(row);
  r.n_problems = r.rows.size();
  if (!pre_rates.empty()) r.delta_solve = delta_solve_rate(pre_rates, post_rates);
  auto lr = leak_rate_from(leak);
  auto hr = helpful_rate_from(help);
  r.leak_rate = lr.rate;
  r.helpful_rate = hr.rate;
  r.judged_leak = lr.judged;
  r.judged_help = hr.judged;
  r.failed_judgements = lr.failed + hr.failed;
  return r;
}

std::string render_report(const EvalReport& r, ReportFormat format) {
  if (r.rows.empty()) throw EmptyReport("evaluation report has no problems");
  std::string out;
  if (format == ReportFormat::Csv) {
    out = "condition,delta_solve,leak_rate,helpful_rate\n";
    out += r.condition_id + "," + fixed3(r.delta_solve) + "," + fixed3(r.leak_rate) + "," +
           fixed3(r.helpful_rate) + "\n";
    return out;
  }
  out += "# Evaluation: " + r.condition_id + "\n\n";
  out += "| Condition | Δ Solve ↑ | Leak ↓ | Helpful ↑ |\n";
  out += "|---|---:|---:|---:|\n";
  out += "| " + r.condition_id + " | " + fixed3(r.delta_solve) + " | " + fixed3(r.leak_rate) +
         " | " + fixed3(r.helpful_rate) + " |\n\n";
  out += "Problems: " + std::to_string(r.n_problems) +
         "; judged responses: leak " + std::to_string(r.judged_leak) + ", helpful " +
         std::to_string(r.judged_help) + "; failed judgements: " +
         std::to_string(r.failed_judgements) + "\n\n";
  out += "| Problem | Pre | Post | Responses | Leaks | Helpful |\n";
  out += "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& row : r.rows) {
    out += "| " + row.problem_id + " | " + fixed3(row.pre) + " | " + fixed3(row.post) + " | " +
           std::to_string(row.responses) + " | " + std::to_string(row.leaks) + " | " +
           std::to_string(row.helpful) + " |\n";
  }
  return out;
}

json report_summary_json(const EvalReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"problem_id", row.problem_id},
                    {"pre", row.pre},
                    {"post", row.post},
                    {"responses", row.responses},
                    {"leaks", row.leaks},
                    {"helpful", row.helpful}});
  }
  return {{"condition", r.condition_id},
          {"n_problems", r.n_problems},
          {"delta_solve", r.delta_solve},
          {"leak_rate", r.leak_rate},
          {"helpful_rate", r.helpful_rate},
          {"judged_leak", r.judged_leak},
          {"judged_help", r.judged_help},
          {"failed_judgements", r.failed_judgements},
          {"rows", std::move(rows)},
          {"config", r.config_snapshot}};
}

}  // namespace pedtutor

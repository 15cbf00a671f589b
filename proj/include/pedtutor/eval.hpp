// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/core.hpp"
#include "pedtutor/reward.hpp"

namespace pedtutor {

/// mean(post) - mean(pre). Throws LengthMismatch, PreconditionError if empty.
double delta_solve_rate(std::span<const double> pre, std::span<const double> post);

/// Verdict on one tutor response, judged on the transcript prefix ending at it.
struct ResponseJudgement {
  std::string problem_id;
  std::int64_t seed = 0;
  int turn_index = 0;
  std::optional<Decision> decision;  // absent when judging failed
  std::string error;
};

struct ResponseRate {
  double rate = 0.0;
  std::size_t positive = 0;
  std::size_t judged = 0;
  std::size_t failed = 0;
};

enum class ResponseJudge { Leak, Help };

std::vector<ResponseJudgement> judge_responses(const std::vector<Dialogue>& dialogues,
                                               const Judge& judge, ResponseJudge which,
                                               int parallelism = 1);

/// Leak judge "reject" counts as a leak.
ResponseRate leak_rate_from(const std::vector<ResponseJudgement>& judgements);
/// Helpfulness judge "accept" counts as helpful.
ResponseRate helpful_rate_from(const std::vector<ResponseJudgement>& judgements);

ResponseRate leak_rate(const std::vector<Dialogue>& dialogues, const Judge& judge,
                       int parallelism = 1);
ResponseRate helpful_rate(const std::vector<Dialogue>& dialogues, const Judge& judge,
                          int parallelism = 1);

struct EvalRow {
  std::string problem_id;
  double pre = 0.0;
  double post = 0.0;
  std::size_t responses = 0;
  std::size_t leaks = 0;
  std::size_t helpful = 0;
};

struct EvalReport {
  std::string condition_id;
  std::size_t n_problems = 0;
  double delta_solve = 0.0;
  double leak_rate = 0.0;
  double helpful_rate = 0.0;
  std::size_t judged_leak = 0;
  std::size_t judged_help = 0;
  std::size_t failed_judgements = 0;
  std::vector<EvalRow> rows;
  nlohmann::json config_snapshot = nlohmann::json::object();
};

/// Assembles the report. `post` maps problem id to its post-dialogue solve
/// rate; pre rates come from the problems' cached baselines (MissingBaseline
/// otherwise). Rows are ordered by problem id.
EvalReport build_eval_report(const std::string& condition_id,
                             const std::map<std::string, Problem>& problems,
                             const std::map<std::string, double>& post,
                             const std::vector<ResponseJudgement>& leak,
                             const std::vector<ResponseJudgement>& help);

enum class ReportFormat { Markdown, Csv };

/// Throws EmptyReport when the report has no rows.
std::string render_report(const EvalReport& r, ReportFormat format);
nlohmann::json report_summary_json(const EvalReport& r);

}  // namespace pedtutor

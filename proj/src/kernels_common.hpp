// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "pedtutor/analysis.hpp"
#include "pedtutor/error.hpp"
#include "pedtutor/kernels.hpp"

namespace pedtutor::kernels::detail {

inline void check_sizes(const RewardComponents& c, std::span<double> out) {
  if (c.r_sol.size() != out.size() || c.r_ped.size() != out.size() ||
      c.r_think.size() != out.size()) {
    throw PreconditionError("reward component arrays differ in length");
  }
}

inline void check_offsets(std::span<const double> rewards, std::span<const std::size_t> offsets,
                          std::span<double> out) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rewards.size() ||
      out.size() != rewards.size()) {
    throw PreconditionError("group offsets do not cover the reward array");
  }
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    if (offsets[g + 1] <= offsets[g]) throw EmptyGroup("empty group in batch");
  }
}

inline double composite_one(double r_sol, double r_ped, double r_think, const RewardWeights& w,
                            bool thinking_reward_enabled) {
  double r = r_sol + (r_ped - 1.0) * w.lambda_ped;
  if (thinking_reward_enabled) r += (r_think - w.theta) * w.lambda_think;
  return r;
}

// Same arithmetic order as grpo_advantages().
inline void normalize_group(const double* in, std::size_t n, double eps, double* out) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += in[i];
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (in[i] - mean) * (in[i] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) out[i] = sd < eps ? 0.0 : (in[i] - mean) / sd;
}

inline TextCounts count_text(const std::string& text) {
  TextCounts c;
  for (auto tok : tokenize_words(text)) {
    ++c.tokens;
    if (is_math_token(tok)) ++c.math_tokens;
  }
  c.unique = unique_word_count(text);
  return c;
}

}  // namespace pedtutor::kernels::detail

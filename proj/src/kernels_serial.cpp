// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "kernels_common.hpp"
#include "pedtutor/analysis.hpp"
#include "pedtutor/kernels.hpp"

namespace pedtutor::kernels::serial {

void composite_rewards(const RewardComponents& c, const RewardWeights& w,
                       bool thinking_reward_enabled, std::span<double> out) {
  detail::check_sizes(c, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = detail::composite_one(c.r_sol[i], c.r_ped[i], c.r_think[i], w,
                                   thinking_reward_enabled);
  }
}

void group_advantages(std::span<const double> rewards, std::span<const std::size_t> offsets,
                      double eps, std::span<double> out) {
  detail::check_offsets(rewards, offsets, out);
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    detail::normalize_group(rewards.data() + offsets[g], offsets[g + 1] - offsets[g], eps,
                            out.data() + offsets[g]);
  }
}

std::vector<TextCounts> text_counts(const std::vector<std::string>& texts) {
  std::vector<TextCounts> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = detail::count_text(texts[i]);
  return out;
}

}  // namespace pedtutor::kernels::serial

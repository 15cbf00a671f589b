// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstddef>

#include "kernels_common.hpp"
#include "pedtutor/kernels.hpp"

namespace pedtutor::kernels::parallel {

void composite_rewards(const RewardComponents& c, const RewardWeights& w,
                       bool thinking_reward_enabled, std::span<double> out) {
  detail::check_sizes(c, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = detail::composite_one(c.r_sol[k], c.r_ped[k], c.r_think[k], w,
                                   thinking_reward_enabled);
  }
}

void group_advantages(std::span<const double> rewards, std::span<const std::size_t> offsets,
                      double eps, std::span<double> out) {
  detail::check_offsets(rewards, offsets, out);
  const auto groups = static_cast<std::ptrdiff_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t g = 0; g < groups; ++g) {
    const auto k = static_cast<std::size_t>(g);
    detail::normalize_group(rewards.data() + offsets[k], offsets[k + 1] - offsets[k], eps,
                            out.data() + offsets[k]);
  }
}

std::vector<TextCounts> text_counts(const std::vector<std::string>& texts) {
  std::vector<TextCounts> out(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = detail::count_text(texts[k]);
  }
  return out;
}

}  // namespace pedtutor::kernels::parallel

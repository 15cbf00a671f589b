// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pedtutor/reward_types.hpp"

// Batch numeric kernels. `serial` is the reference; `parallel` is the OpenMP
// version used by the pipelines. Both must agree bit-for-bit on advantages
// and rewards, and exactly on integer counts.
namespace pedtutor::kernels {

struct RewardComponents {
  std::span<const double> r_sol;
  std::span<const double> r_ped;
  std::span<const double> r_think;
};

struct TextCounts {
  std::size_t tokens = 0;
  std::size_t math_tokens = 0;
  std::size_t unique = 0;
};

namespace serial {

void composite_rewards(const RewardComponents& c, const RewardWeights& w,
                       bool thinking_reward_enabled, std::span<double> out);

/// `offsets` has groups+1 entries; group g is rewards[offsets[g], offsets[g+1]).
void group_advantages(std::span<const double> rewards, std::span<const std::size_t> offsets,
                      double eps, std::span<double> out);

std::vector<TextCounts> text_counts(const std::vector<std::string>& texts);

}  // namespace serial

namespace parallel {

void composite_rewards(const RewardComponents& c, const RewardWeights& w,
                       bool thinking_reward_enabled, std::span<double> out);

void group_advantages(std::span<const double> rewards, std::span<const std::size_t> offsets,
                      double eps, std::span<double> out);

std::vector<TextCounts> text_counts(const std::vector<std::string>& texts);

}  // namespace parallel

}  // namespace pedtutor::kernels

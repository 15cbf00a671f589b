// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pedtutor {

struct RewardWeights {
  double lambda_ped = 0.75;
  double lambda_think = 0.3;
  double theta = 0.6;

  void validate() const;
};

enum class Decision { Accept, Reject };

std::string_view to_string(Decision d);

struct JudgeVerdict {
  Decision decision = Decision::Reject;
  std::string reasoning;
  std::string raw;
  int attempts = 0;

  bool accepted() const { return decision == Decision::Accept; }
};

struct RewardBreakdown {
  double r_sol = 0.0;
  double r_ped = 0.0;
  double r_think = 0.0;
  double reward = 0.0;
  std::optional<JudgeVerdict> leak;
  std::optional<JudgeVerdict> help;
  std::vector<double> think_scores;
  // Dialogue ended in Error and was assigned the worst-case components.
  bool errored = false;
};

}  // namespace pedtutor

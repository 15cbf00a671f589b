// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace pedtutor {

/// Regularized upper incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);

/// P(X >= x) for X ~ chi-square(df).
double chi_square_upper_tail(double x, int df);

enum class EffectKind { Phi, CramersV };

std::string_view to_string(EffectKind k);

struct StatTestResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  double effect = 0.0;
  EffectKind effect_kind = EffectKind::Phi;
  std::int64_t n = 0;
};

using CountTable = std::vector<std::vector<double>>;

/// Pearson chi-square without continuity correction. df = (r-1)(c-1);
/// effect is phi for 2x2, Cramér's V otherwise. Throws DegenerateTable for
/// zero marginals or ragged/undersized tables, PreconditionError for
/// negative counts.
StatTestResult chi_square(const CountTable& table);

}  // namespace pedtutor

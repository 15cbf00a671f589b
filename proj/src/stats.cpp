// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pedtutor/error.hpp"

namespace pedtutor {

namespace {

constexpr int kMaxIter = 1000;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// Lower regularized gamma by series; valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma by modified Lentz continued fraction; x >= a + 1.
double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw PreconditionError("regularized_gamma_q needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_upper_tail(double x, int df) {
  if (df < 1) throw PreconditionError("chi-square df must be >= 1");
  if (x <= 0.0) return 1.0;
  return std::clamp(regularized_gamma_q(0.5 * df, 0.5 * x), 0.0, 1.0);
}

std::string_view to_string(EffectKind k) { return k == EffectKind::Phi ? "phi" : "V"; }

StatTestResult chi_square(const CountTable& table) {
  const std::size_t rows = table.size();
  if (rows < 2) throw DegenerateTable("chi-square needs at least 2 rows");
  const std::size_t cols = table.front().size();
  if (cols < 2) throw DegenerateTable("chi-square needs at least 2 columns");

  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw DegenerateTable("ragged contingency table");
    for (std::size_t j = 0; j < cols; ++j) {
      double v = table[i][j];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw PreconditionError("contingency counts must be finite and >= 0");
      }
      row_sum[i] += v;
      col_sum[j] += v;
      total += v;
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_sum[i] <= 0.0) throw DegenerateTable("row " + std::to_string(i) + " sums to zero");
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (col_sum[j] <= 0.0) throw DegenerateTable("column " + std::to_string(j) + " sums to zero");
  }

  StatTestResult r;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double expected = row_sum[i] * col_sum[j] / total;
      double diff = table[i][j] - expected;
      r.chi2 += diff * diff / expected;
    }
  }
  r.df = static_cast<int>((rows - 1) * (cols - 1));
  r.p_value = chi_square_upper_tail(r.chi2, r.df);
  r.n = static_cast<std::int64_t>(std::llround(total));
  if (rows == 2 && cols == 2) {
    r.effect_kind = EffectKind::Phi;
    r.effect = std::sqrt(r.chi2 / total);
  } else {
    r.effect_kind = EffectKind::CramersV;
    r.effect = std::sqrt(r.chi2 / (total * static_cast<double>(std::min(rows, cols) - 1)));
  }
  return r;
}

}  // namespace pedtutor

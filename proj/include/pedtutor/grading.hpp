// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/prompts.hpp"

namespace pedtutor {

/// Exact value of a numeric answer: integers, decimals, a/b, \frac{a}{b},
/// optional sign, thousands separators; a trailing % is dropped.
std::optional<long double> parse_numeric_answer(std::string_view s);

/// Strips wrappers ($...$, \boxed{...}, "the answer is", trailing
/// punctuation), trims and case-folds.
std::string normalize_answer(std::string_view s);

/// Numeric comparison (relative tolerance 1e-6) when both sides parse,
/// normalized-string equality otherwise. Symmetric and reflexive.
bool answers_equivalent(std::string_view candidate, std::string_view reference);

/// Final answer of a solo attempt: the last "ANSWER:" line, else the last
/// \boxed{...}, else the last non-empty line.
std::string extract_final_answer(std::string_view completion);

/// Runs K independent solo attempts (seeds seed..seed+K-1) and returns
/// successes / K. With `prior`, each attempt sees the dialogue's visible
/// transcript before the attempt instruction.
double solve_rate(const Problem& problem, const Dialogue* prior,
                  const ChatClient& student, const PromptLibrary& lib, int K,
                  std::int64_t seed, int parallelism = 1);

}  // namespace pedtutor

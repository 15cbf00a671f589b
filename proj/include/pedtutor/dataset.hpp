// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/prompts.hpp"

namespace pedtutor {

struct Provenance {
  std::string source;
  std::string content_hash;
};

struct FilterBounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct ProblemSet {
  std::vector<Problem> problems;
  Provenance provenance;
  std::optional<FilterBounds> filter_bounds;
  std::vector<std::string> warnings;

  bool empty() const { return problems.empty(); }
  std::size_t size() const { return problems.size(); }
};

/// 64-bit FNV-1a, lowercase hex.
std::string content_hash(std::string_view bytes);

nlohmann::json problem_to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j);

/// Parses problem JSONL. Throws ParseError (1-based line) or DuplicateId.
ProblemSet parse_problems(std::string_view text, std::string source);
ProblemSet ingest_problems(const std::filesystem::path& path);
void write_problems(const ProblemSet& s, const std::filesystem::path& path);

/// successes / K over K solo attempts with seeds seed..seed+K-1.
double measure_baseline_solve_rate(const Problem& p, const ChatClient& student,
                                   const PromptLibrary& lib, int K,
                                   std::int64_t seed, int parallelism = 1);

/// Fills baseline_solve_rate for every problem lacking one.
void measure_missing_baselines(ProblemSet& s, const ChatClient& student,
                               const PromptLibrary& lib, int K,
                               std::int64_t seed, int parallelism);

/// Keeps lo <= rate <= hi. Throws MissingBaseline or RangeError.
ProblemSet filter_by_solve_rate(const ProblemSet& s, double lo, double hi);

/// Seeded shuffle, first n_train to train, next n_eval to eval.
/// Throws InsufficientProblems.
std::pair<ProblemSet, ProblemSet> split(const ProblemSet& s, std::size_t n_train,
                                        std::size_t n_eval, std::uint64_t seed);

}  // namespace pedtutor

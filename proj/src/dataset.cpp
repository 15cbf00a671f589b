// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "pedtutor/error.hpp"
#include "pedtutor/grading.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/parallel.hpp"

namespace pedtutor {

using nlohmann::json;

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json problem_to_json(const Problem& p) {
  json j = {{"id", p.id}, {"problem", p.statement}, {"answer", p.reference_answer}};
  if (p.baseline_solve_rate) j["baseline_solve_rate"] = *p.baseline_solve_rate;
  if (!p.tags.empty()) j["tags"] = p.tags;
  return j;
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.id = j.at("id").get<std::string>();
  p.statement = j.at("problem").get<std::string>();
  const auto& ans = j.at("answer");
  p.reference_answer = ans.is_string() ? ans.get<std::string>() : ans.dump();
  if (j.contains("baseline_solve_rate") && !j["baseline_solve_rate"].is_null()) {
    double r = j["baseline_solve_rate"].get<double>();
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ParseError("problem '" + p.id + "': baseline_solve_rate outside [0,1]");
    }
    p.baseline_solve_rate = r;
  }
  if (j.contains("tags")) p.tags = j["tags"].get<std::vector<std::string>>();
  if (p.id.empty()) throw ParseError("problem id is empty");
  return p;
}

ProblemSet parse_problems(std::string_view text, std::string source) {
  ProblemSet s;
  s.provenance = {std::move(source), content_hash(text)};
  std::set<std::string> seen;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++lineno;
    if (trim(line).empty()) continue;
    Problem p;
    try {
      p = problem_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(p.id).second) throw DuplicateId(p.id);
    s.problems.push_back(std::move(p));
  }
  if (s.problems.empty()) {
    s.warnings.push_back("no problems in " + s.provenance.source);
    spdlog::warn("no problems in {}", s.provenance.source);
  }
  return s;
}

ProblemSet ingest_problems(const std::filesystem::path& path) {
  return parse_problems(read_file(path), path.string());
}

void write_problems(const ProblemSet& s, const std::filesystem::path& path) {
  std::vector<json> records;
  records.reserve(s.problems.size());
  for (const auto& p : s.problems) records.push_back(problem_to_json(p));
  write_jsonl(path, records);
}

double measure_baseline_solve_rate(const Problem& p, const ChatClient& student,
                                   const PromptLibrary& lib, int K, std::int64_t seed,
                                   int parallelism) {
  return solve_rate(p, nullptr, student, lib, K, seed, parallelism);
}

void measure_missing_baselines(ProblemSet& s, const ChatClient& student, const PromptLibrary& lib,
                               int K, std::int64_t seed, int parallelism) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < s.problems.size(); ++i) {
    if (!s.problems[i].baseline_solve_rate) todo.push_back(i);
  }
  parallel_for(todo.size(), parallelism, [&](std::size_t j) {
    auto& p = s.problems[todo[j]];
    p.baseline_solve_rate = measure_baseline_solve_rate(p, student, lib, K, seed);
  });
}

ProblemSet filter_by_solve_rate(const ProblemSet& s, double lo, double hi) {
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
    throw RangeError("filter bounds must satisfy 0 <= lo <= hi <= 1");
  }
  ProblemSet out;
  out.provenance = s.provenance;
  out.filter_bounds = FilterBounds{lo, hi};
  for (const auto& p : s.problems) {
    if (!p.baseline_solve_rate) throw MissingBaseline(p.id);
    double r = *p.baseline_solve_rate;
    if (r >= lo && r <= hi) out.problems.push_back(p);
  }
  return out;
}

std::pair<ProblemSet, ProblemSet> split(const ProblemSet& s, std::size_t n_train,
                                        std::size_t n_eval, std::uint64_t seed) {
  if (n_train + n_eval > s.size()) {
    throw InsufficientProblems("requested " + std::to_string(n_train) + "+" +
                               std::to_string(n_eval) + " problems from a set of " +
                               std::to_string(s.size()));
  }
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates on raw mt19937_64 output; std::shuffle and the standard
  // distributions are implementation-defined.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }
  ProblemSet train, eval;
  train.provenance = eval.provenance = s.provenance;
  train.filter_bounds = eval.filter_bounds = s.filter_bounds;
  for (std::size_t i = 0; i < n_train; ++i) train.problems.push_back(s.problems[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_eval; ++i) {
    eval.problems.push_back(s.problems[order[i]]);
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace pedtutor

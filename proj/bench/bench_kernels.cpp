// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs OpenMP kernels. Run with --benchmark_filter=... to pick one.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "pedtutor/kernels.hpp"
#include "pedtutor/reward.hpp"

namespace {

namespace k = pedtutor::kernels;

struct Batch {
  std::vector<double> sol, ped, think, rewards;
  std::vector<std::size_t> offsets;
};

Batch make_batch(std::size_t groups, std::size_t g) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch b;
  const auto n = groups * g;
  for (std::size_t i = 0; i < n; ++i) {
    b.sol.push_back(u(rng));
    b.ped.push_back(u(rng) < 0.5 ? 0.0 : 1.0);
    b.think.push_back(u(rng));
    b.rewards.push_back(u(rng));
  }
  for (std::size_t i = 0; i <= groups; ++i) b.offsets.push_back(i * g);
  return b;
}

std::vector<std::string> make_texts(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back("Let x = " + std::to_string(i) + " and check whether x + 1 = " +
                std::to_string(i + 1) + ". Then we verify the result again, carefully.");
  }
  return t;
}

template <auto Fn>
void BM_composite(benchmark::State& st) {
  auto b = make_batch(static_cast<std::size_t>(st.range(0)), 8);
  std::vector<double> out(b.sol.size());
  pedtutor::RewardWeights w;
  for (auto _ : st) {
    Fn(k::RewardComponents{b.sol, b.ped, b.think}, w, true, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(out.size()));
}

template <auto Fn>
void BM_advantages(benchmark::State& st) {
  auto b = make_batch(static_cast<std::size_t>(st.range(0)), 8);
  std::vector<double> out(b.rewards.size());
  for (auto _ : st) {
    Fn(b.rewards, b.offsets, pedtutor::kAdvantageEps, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(out.size()));
}

template <auto Fn>
void BM_text(benchmark::State& st) {
  auto texts = make_texts(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    auto c = Fn(texts);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

BENCHMARK(BM_composite<k::serial::composite_rewards>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_composite<k::parallel::composite_rewards>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_advantages<k::serial::group_advantages>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_advantages<k::parallel::group_advantages>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_text<k::serial::text_counts>)->Arg(1 << 8)->Arg(1 << 12);
BENCHMARK(BM_text<k::parallel::text_counts>)->Arg(1 << 8)->Arg(1 << 12);

}  // namespace

BENCHMARK_MAIN();

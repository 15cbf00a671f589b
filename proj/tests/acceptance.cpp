// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "analysis_fixture.hpp"
#include "oracles.hpp"
#include "pedtutor/cli.hpp"
#include "pedtutor/dataset.hpp"
#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/reward.hpp"
#include "pedtutor/rollout.hpp"
#include "pedtutor/stats.hpp"
#include "support.hpp"

using namespace pedtutor;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

long double oracle_reward(long double s, long double p, long double t, bool think) {
  long double r = s + (p - 1.0L) * 0.75L;
  if (think) r += (t - 0.6L) * 0.3L;
  return r;
}

std::string composite_reward_check() {
  const auto t0 = std::chrono::steady_clock::now();
  RewardWeights w;
  expect(composite_reward(0.5, 1, 0.6, w) == 0.5, "spot 0.5/1/0.6");
  expect(std::abs(composite_reward(1, 0, 1, w) - 0.37) < 1e-12, "spot 1/0/1");
  expect(std::abs(composite_reward(0, 0, 0, w) + 0.93) < 1e-12, "spot 0/0/0");
  expect(composite_reward(0, 0, 0, w, false) == -0.75, "think term dropped");
  std::mt19937_64 rng(20261014);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng), p = u(rng) < 0.5 ? 0.0 : 1.0, t = u(rng);
    for (bool think : {true, false}) {
      const double err = std::abs(static_cast<long double>(composite_reward(s, p, t, w, think)) -
                                  oracle_reward(s, p, t, think));
      worst = std::max(worst, err);
    }
  }
  expect(worst <= 1e-12, fmt::format("max error {:.3g}", worst));
  const double dt = seconds_since(t0);
  expect(dt < 1.0, fmt::format("took {:.3f}s", dt));
  return fmt::format("1000 triples, max error {:.2g}, {:.3f}s", worst, dt);
}

std::string advantage_check() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.3, 2.0);
  double worst_mean = 0.0, worst_std = 0.0;
  for (int grp = 0; grp < 500; ++grp) {
    std::vector<double> r(8);
    for (auto& x : r) x = g(rng);
    auto a = grpo_advantages(r);
    double mean = 0.0, var = 0.0;
    for (double x : a) mean += x;
    mean /= 8.0;
    for (double x : a) var += (x - mean) * (x - mean);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_std = std::max(worst_std, std::abs(std::sqrt(var / 8.0) - 1.0));
  }
  expect(worst_mean <= 1e-9 && worst_std <= 1e-9,
         fmt::format("mean err {:.3g}, std err {:.3g}", worst_mean, worst_std));
  std::vector<double> flat(8, 0.42);
  for (double x : grpo_advantages(flat)) expect(x == 0.0, "constant group nonzero");
  const double dt = seconds_since(t0);
  expect(dt < 1.0, fmt::format("took {:.3f}s", dt));
  return fmt::format("500 groups of 8, {:.3f}s", dt);
}

std::map<std::string, std::string> run_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel.rfind("audit/", 0) == 0 || rel == "config.snapshot") continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

void pipeline(const fs::path& run) {
  const auto fx = testing::fixtures() / "e2e";
  const std::vector<std::string> common = {"--config", (fx / "run.cfg").string(), "--mock",
                                           (fx / "playbook.jsonl").string(), "--run-dir",
                                           run.string()};
  const std::vector<std::vector<std::string>> steps = {
      {"prepare-data", "--in", (fx / "problems.jsonl").string()},
      {"rollout"},
      {"score"},
      {"evaluate"}};
  for (auto args : steps) {
    args.insert(args.end(), common.begin(), common.end());
    std::ostringstream out, err;
    const int status = command_dispatch(args, out, err);
    expect(status == 0, args[0] + " exited " + std::to_string(status) + ": " + err.str());
  }
}

std::string end_to_end_check() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::TempDir a("e2e"), b("e2e");
  pipeline(a.path());
  pipeline(b.path());
  auto fa = run_files(a.path()), fb = run_files(b.path());
  for (const auto* f : {"problems.jsonl", "train.jsonl", "rollouts.jsonl", "rewards.jsonl",
                        "batch.jsonl", "eval.md", "eval.csv", "eval.json"}) {
    expect(fa.count(f) && !fa.at(f).empty(), std::string("missing ") + f);
  }
  expect(fa == fb, "outputs differ between runs");
  const auto summary = nlohmann::json::parse(fa.at("eval.json"));
  const double delta = summary.at("delta_solve").get<double>();
  expect(delta == 0.25, fmt::format("delta {}", delta));
  const double dt = seconds_since(t0);
  expect(dt < 30.0, fmt::format("took {:.1f}s", dt));
  return fmt::format("{} files byte-identical, delta {:.3f}, {:.1f}s", fa.size(), delta, dt);
}

std::string turn_cap_and_retry_check() {
  auto b = testing::backend(R"({"model": "tutor", "reply": "Keep going."}
{"model": "student", "reply": "Ok."})");
  RolloutConfig cfg;
  Agents agents{testing::mock_client("tutor", b), testing::mock_client("student", b)};
  auto d = run_dialogue(testing::problem("p", "Q", "1"), cfg, agents, testing::prompts(), 0);
  expect(d.tutor_turn_count() == 16, fmt::format("{} tutor turns", d.tutor_turn_count()));
  expect(d.termination == Termination::MaxTurns, "termination not max_turns");

  const std::vector<ChatMessage> msgs = {{Role::System, "s"}, {Role::User, "hi"}};
  std::vector<Millis> sleeps;
  auto cfg5 = testing::endpoint("m");
  cfg5.backoff_base = Millis(100);
  auto b5 = testing::backend(R"({"model": "m", "fail_count": 5, "reply": "ok"})");
  ChatClient c5(cfg5, b5, nullptr, [&](Millis m) { sleeps.push_back(m); });
  auto r = c5.chat(msgs);
  expect(r.content == "ok" && r.attempts == 6, fmt::format("attempts {}", r.attempts));
  expect(sleeps == std::vector<Millis>{Millis(100), Millis(200), Millis(400), Millis(800), Millis(1600)},
         "backoff schedule");

  auto b6 = testing::backend(R"({"model": "m", "fail_count": 6, "reply": "ok"})");
  ChatClient c6(testing::endpoint("m"), b6, nullptr, [](Millis) {});
  bool raised = false;
  try {
    c6.chat(msgs);
  } catch (const TransportError&) {
    raised = true;
  }
  expect(raised && b6->calls() == 6, "six failures did not surface an error");
  return "16-turn cap, success on attempt 6, error after 6 failures";
}

std::string filter_check() {
  constexpr int K = 8;
  std::mt19937_64 rng(77);
  std::string playbook;
  std::vector<int> correct(100);
  ProblemSet set;
  for (int i = 0; i < 100; ++i) {
    const auto id = fmt::format("q{:03d}", i);
    const auto stmt = fmt::format("Compute {} + {} (item {}).", i, i + 1, id);
    const auto ans = std::to_string(2 * i + 1);
    correct[static_cast<std::size_t>(i)] = static_cast<int>(rng() % (K + 1));
    nlohmann::json replies = nlohmann::json::array();
    for (int k = 0; k < K; ++k) {
      replies.push_back(k < correct[static_cast<std::size_t>(i)] ? "ANSWER: " + ans : "ANSWER: -1");
    }
    nlohmann::json rule = {{"model", "student"}, {"contains", "(item " + id + ")."}, {"replies", replies}};
    playbook += rule.dump() + "\n";
    set.problems.push_back(testing::problem(id, stmt, ans));
  }
  auto b = testing::backend(playbook);
  auto student = testing::mock_client("student", b);
  measure_missing_baselines(set, *student, testing::prompts(), K, 0, 4);
  const double lo = 0.01, hi = 0.60;
  auto kept = filter_by_solve_rate(set, lo, hi);
  std::vector<std::string> expected;
  for (int i = 0; i < 100; ++i) {
    // Brute force over the K attempt outcomes.
    int hits = 0;
    for (int k = 0; k < K; ++k) hits += k < correct[static_cast<std::size_t>(i)] ? 1 : 0;
    const double rate = static_cast<double>(hits) / K;
    if (rate >= lo && rate <= hi) expected.push_back(fmt::format("q{:03d}", i));
  }
  std::vector<std::string> got;
  for (const auto& p : kept.problems) got.push_back(p.id);
  expect(got == expected, fmt::format("kept {} expected {}", got.size(), expected.size()));
  expect(b->calls() == 100u * K, "attempt count");
  return fmt::format("{} of 100 kept, matches enumeration", got.size());
}

std::string chi_square_check() {
  const CountTable t = {{10, 20}, {20, 10}};
  auto r = chi_square(t);
  expect(std::abs(r.chi2 - oracle::pearson(t)) < 1e-12, "statistic");
  expect(std::abs(r.chi2 - oracle::pearson_2x2(10, 20, 20, 10)) < 1e-12, "closed form");
  expect(r.df == 1, "df");
  expect(std::abs(r.p_value - oracle::chi2_tail(r.chi2, 1)) < 1e-6, "p-value");
  const double p05 = chi_square_upper_tail(3.841, 1);
  expect(std::abs(p05 - 0.05) < 1e-3, fmt::format("p(3.841) = {}", p05));
  expect(std::abs(p05 - oracle::chi2_tail(3.841, 1)) < 1e-6, "p(3.841) vs integration");
  const CountTable t3 = {{12, 5, 9}, {4, 15, 8}, {7, 7, 20}};
  auto r3 = chi_square(t3);
  expect(std::abs(r3.chi2 - oracle::pearson(t3)) < 1e-9 && r3.df == 4, "3x3 statistic");
  expect(std::abs(r3.p_value - oracle::chi2_tail(r3.chi2, 4)) < 1e-6, "3x3 p-value");

  // Table with chi2 near 506.59 and n = 167468: phi must come out near 0.055.
  const double n = 167468, half = n / 2, d = 4606;
  const double a = (half + d) / 2, b = (half - d) / 2;
  auto phi = chi_square({{a, b}, {b, a}});
  expect(std::abs(phi.chi2 - 506.59) < 1.0, fmt::format("chi2 {}", phi.chi2));
  expect(std::abs(phi.effect - 0.055) <= 0.001, fmt::format("phi {}", phi.effect));
  expect(std::abs(std::sqrt(phi.chi2 / n) - phi.effect) < 1e-12, "phi = sqrt(chi2/n)");
  return fmt::format("chi2 {:.4f}, p(3.841) {:.5f}, phi {:.4f}", r.chi2, p05, phi.effect);
}

std::string parsing_check() {
  std::mt19937_64 rng(10000);
  const std::string alphabet = "abz 019+-=?.!$\\";
  auto gen = [&](std::size_t max_len) {
    std::string s;
    for (auto len = rng() % (max_len + 1), i = decltype(len){0}; i < len; ++i) {
      s.push_back(alphabet[rng() % alphabet.size()]);
    }
    return trim(s);
  };
  for (int i = 0; i < 10000; ++i) {
    auto think = gen(24), visible = gen(32);
    const bool end = rng() % 2 == 0;
    auto p = parse_tutor_output(format_tutor_output(think, visible, end), true);
    expect(p.think_text == think && p.visible_text == visible && p.end_flag == end,
           "round trip " + std::to_string(i));
  }
  auto bare = parse_decision_reply(R"({"reasoning": "ok", "decision": "accept"})");
  auto prose = parse_decision_reply("Here it is: {\"decision\": \"Reject\", \"reasoning\": \"x\"} done");
  auto fenced = parse_decision_reply("```json\n{\"reasoning\": \"r\", \"decision\": \"ACCEPT\", \"extra\": 1}\n```");
  expect(bare && bare->decision == Decision::Accept, "bare JSON");
  expect(prose && prose->decision == Decision::Reject, "JSON in prose");
  expect(fenced && fenced->decision == Decision::Accept, "fenced JSON");

  auto b = testing::backend(R"({"model": "judge", "reply": "I cannot decide."})");
  Judge judge(testing::prompts(), testing::mock_client("judge", b));
  Dialogue d;
  d.problem_id = "p";
  DialogueTurn t;
  t.visible_text = "Hi.";
  t.end_flag = true;
  d.turns.push_back(t);
  d.termination = Termination::EndMarker;
  bool raised = false;
  try {
    judge.leak(d);
  } catch (const MalformedJudgeOutput&) {
    raised = true;
  }
  expect(raised, "malformed output accepted");
  expect(b->calls() == 6, fmt::format("{} judge calls", b->calls()));
  return "10000 round trips, 3 judge shapes, malformed output after 6 calls";
}

std::string analysis_check() {
  auto f = testing::run_analysis_fixture();
  const auto& a = f.words.at("think-reward");
  const auto& b = f.words.at("nothink");
  auto near = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
  expect(near(a.visible_words, 9.0) && near(a.think_words, 28.0 / 3) &&
             near(a.total_words, 55.0 / 3) && near(a.unique_words, 46.0 / 3),
         "word counts think-reward");
  expect(near(a.visible_math_ratio, 2.0 / 27) && near(a.think_math_ratio, 0.25), "math ratio think-reward");
  expect(near(b.visible_words, 26.0 / 3) && b.think_words == 0.0 && near(b.visible_math_ratio, 3.0 / 26),
         "word stats nothink");
  const auto& p = f.phases.at("think-reward");
  expect(p.counts == std::array<std::size_t, 3>{1, 3, 2}, "phase counts");
  auto pd = p.distribution();
  expect(near(pd[0] + pd[1] + pd[2], 1.0), "phase distribution sum");
  expect(f.major.total("think-reward") == 6 && f.major.total("nothink") == 7, "labeled totals");
  expect(near(f.major.proportion("think-reward", "Pedagogical Intent Utterance"), 4.0 / 6) &&
             near(f.major.proportion("nothink", "Mathematical Knowledge for Teaching"), 1.0 / 7),
         "major proportions");
  for (const auto* table : {&f.major, &f.codes}) {
    for (const auto& [cond, _] : table->counts) {
      double sum = 0.0;
      for (const auto& [label, share] : table->proportions(cond)) sum += share;
      expect(near(sum, 1.0), "distribution sum for " + cond);
    }
  }
  return "20 sentences match hand counts";
}

std::string concurrency_check() {
  const char* playbook = R"(
{"model": "tutor", "turn": 2, "reply": "<think>wrap up</think>Nice. <end_of_conversation>"}
{"model": "tutor", "replies": ["<think>a</think>What do you see?", "<think>b</think>Try a case.", "<think>c</think>What is given?"]}
{"model": "student", "replies": ["Hmm.", "Maybe 3?", "I see."]}
)";
  std::vector<Problem> ps;
  for (int i = 0; i < 16; ++i) ps.push_back(testing::problem("p" + std::to_string(i), "Q" + std::to_string(i), "1"));
  RolloutConfig cfg;
  cfg.group_size = 8;

  auto local = testing::backend(playbook);
  cfg.parallelism = 1;
  auto serial = run_batch(ps, cfg, {testing::mock_client("tutor", local), testing::mock_client("student", local)},
                          testing::prompts());

  MockHttpServer server(testing::backend(playbook));
  server.start();
  auto http = [&](const std::string& model) {
    auto e = testing::endpoint(model);
    e.base_url = server.base_url();
    return std::make_shared<ChatClient>(e, std::make_shared<HttpBackend>(e.base_url, "", e.request_timeout));
  };
  cfg.parallelism = 8;
  const auto t0 = std::chrono::steady_clock::now();
  auto parallel = run_batch(ps, cfg, {http("tutor"), http("student")}, testing::prompts());
  const double dt = seconds_since(t0);
  server.stop();

  expect(parallel.dialogue_count() == 128, fmt::format("{} dialogues", parallel.dialogue_count()));
  expect(serial.dialogue_count() == 128, "serial count");
  for (std::size_t g = 0; g < serial.groups.size(); ++g) {
    for (std::size_t j = 0; j < serial.groups[g].dialogues.size(); ++j) {
      const auto& sd = serial.groups[g].dialogues[j];
      const auto& hd = parallel.groups[g].dialogues[j];
      expect(sd.termination != Termination::Error, "serial dialogue errored");
      expect(dialogue_to_json(sd) == dialogue_to_json(hd),
             fmt::format("dialogue {}#{} differs", sd.problem_id, sd.seed));
    }
  }
  return fmt::format("128 dialogues over HTTP match the serial run, {:.2f}s", dt);
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<std::string, std::function<std::string()>>> checks = {
      {"composite reward matches the oracle", composite_reward_check},
      {"group advantages are standardized", advantage_check},
      {"mock pipeline is reproducible end to end", end_to_end_check},
      {"turn cap and retry budget", turn_cap_and_retry_check},
      {"solve-rate filter matches enumeration", filter_check},
      {"chi-square statistics and effect size", chi_square_check},
      {"tutor output and judge reply parsing", parsing_check},
      {"analysis fixture hand counts", analysis_check},
      {"parallel HTTP rollouts match serial", concurrency_check},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& [name, fn] = checks[i];
    std::string detail;
    bool ok = false;
    try {
      detail = fn();
      ok = true;
    } catch (const Failure& f) {
      detail = f.what;
    } catch (const Error& e) {
      detail = std::string(e.kind()) + ": " + e.what();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << i + 1 << "] " << name << ": " << detail << "\n";
  }
  std::cout << (checks.size() - static_cast<std::size_t>(failed)) << "/" << checks.size() << " passed\n";
  return failed == 0 ? 0 : 1;
}

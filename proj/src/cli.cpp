// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pedtutor/analysis.hpp"
#include "pedtutor/config.hpp"
#include "pedtutor/dataset.hpp"
#include "pedtutor/error.hpp"
#include "pedtutor/eval.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/mock.hpp"
#include "pedtutor/parallel.hpp"
#include "pedtutor/prompts.hpp"
#include "pedtutor/reward.hpp"
#include "pedtutor/rollout.hpp"

namespace pedtutor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::string mock;
  std::string run_dir;
  std::vector<std::string> overrides;
  std::optional<std::int64_t> seed;
  std::string prompts;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "Run configuration file (key = value)");
  sub->add_option("--mock", o.mock, "Serve every endpoint from this mock playbook (JSONL)");
  sub->add_option("--run-dir", o.run_dir, "Run directory (default runs/run-<timestamp>)");
  sub->add_option("--set", o.overrides, "Config override key=value (repeatable)");
  sub->add_option("--seed", o.seed, "Override the run seed");
  sub->add_option("--prompts", o.prompts, "Prompt template directory");
}

std::string timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Resolved configuration, run directory and clients shared by subcommands.
struct Session {
  RunConfig cfg;
  fs::path dir;
  PromptLibrary lib;
  std::shared_ptr<JsonlLog> requests;
  std::shared_ptr<JsonlLog> judges;
  std::shared_ptr<MockBackend> mock;

  static Session open(const CommonOptions& o) {
    Session s;
    auto overrides = o.overrides;
    if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
    s.cfg = load_config(o.config, overrides);
    if (!o.run_dir.empty()) s.cfg.run_dir = o.run_dir;
    if (s.cfg.run_dir.empty()) s.cfg.run_dir = (fs::path("runs") / ("run-" + timestamp())).string();
    s.dir = s.cfg.run_dir;
    fs::create_directories(s.dir / "audit");
    write_file_atomic(s.dir / "config.snapshot", format_config(s.cfg));
    s.lib = o.prompts.empty() ? PromptLibrary::load_default() : PromptLibrary::load(o.prompts);
    s.requests = std::make_shared<JsonlLog>(s.dir / "audit" / "requests.jsonl");
    s.judges = std::make_shared<JsonlLog>(s.dir / "audit" / "judges.jsonl");
    if (!o.mock.empty()) s.mock = std::make_shared<MockBackend>(load_playbook(o.mock));
    return s;
  }

  std::shared_ptr<ChatClient> client(const EndpointConfig& e, std::string_view role) const {
    if (mock) return make_mock_client(e, mock, requests);
    require_endpoint(e, role);
    return make_http_client(e, requests);
  }

  RolloutConfig rollout_config() const {
    RolloutConfig r;
    r.condition = cfg.condition;
    r.max_turns = cfg.max_turns;
    r.group_size = cfg.group_size;
    r.batch_problems = cfg.batch_problems;
    r.K = cfg.K;
    r.parallelism = cfg.parallelism;
    r.seed = cfg.seed;
    return r;
  }

  std::map<std::string, Problem> problem_map(const std::vector<fs::path>& files) const {
    std::map<std::string, Problem> out;
    for (const auto& f : files) {
      if (!fs::exists(f) || fs::file_size(f) == 0) continue;
      for (auto& p : ingest_problems(f).problems) out.emplace(p.id, std::move(p));
    }
    return out;
  }

  fs::path default_problems() const {
    if (fs::exists(dir / "train.jsonl")) return dir / "train.jsonl";
    if (!cfg.dataset.empty()) return cfg.dataset;
    throw PreconditionError("no problems: pass --problems, set dataset, or run prepare-data");
  }
};

// --- prepare-data -----------------------------------------------------------

struct PrepareOptions {
  std::string in;
  double lo = 0.01;
  double hi = 0.60;
  std::optional<std::size_t> n_train;
  std::size_t n_eval = 0;
};

int run_prepare(const CommonOptions& co, const PrepareOptions& po, std::ostream& out) {
  auto s = Session::open(co);
  const fs::path in = po.in.empty() ? fs::path(s.cfg.dataset) : fs::path(po.in);
  if (in.empty()) throw UsageError("prepare-data needs --in or a dataset in the config");
  auto set = ingest_problems(in);
  const bool missing = std::any_of(set.problems.begin(), set.problems.end(),
                                   [](const Problem& p) { return !p.baseline_solve_rate; });
  if (missing) {
    auto student = s.client(s.cfg.student, "student");
    measure_missing_baselines(set, *student, s.lib, s.cfg.K, s.cfg.seed, s.cfg.parallelism);
  }
  write_problems(set, s.dir / "problems.jsonl");
  auto kept = filter_by_solve_rate(set, po.lo, po.hi);
  const std::size_t n_train = po.n_train.value_or(
      kept.size() >= po.n_eval ? kept.size() - po.n_eval : 0);
  auto [train, eval] = split(kept, n_train, po.n_eval, static_cast<std::uint64_t>(s.cfg.seed));
  write_problems(train, s.dir / "train.jsonl");
  write_problems(eval, s.dir / "eval.jsonl");
  out << "ingested " << set.size() << " problems (" << set.provenance.content_hash << "), kept "
      << kept.size() << " in [" << po.lo << ", " << po.hi << "]; train " << train.size()
      << ", eval " << eval.size() << "\n";
  out << "run directory: " << s.dir.string() << "\n";
  return 0;
}

// --- rollout ------------------------------------------------------------------

struct RolloutOptions {
  std::string problems;
  bool resume = false;
};

int run_rollout(const CommonOptions& co, const RolloutOptions& ro, std::ostream& out) {
  auto s = Session::open(co);
  const fs::path pf = ro.problems.empty() ? s.default_problems() : fs::path(ro.problems);
  auto set = ingest_problems(pf);
  Agents agents{s.client(s.cfg.tutor, "tutor"), s.client(s.cfg.student, "student")};
  BatchOptions bo{s.dir / "rollouts.jsonl", ro.resume};
  auto res = run_batch(set.problems, s.rollout_config(), agents, s.lib, bo);
  out << "groups: " << res.groups.size() << " (executed " << res.executed_groups << ", resumed "
      << res.resumed_groups << "), dialogues: " << res.dialogue_count() << "\n";
  if (!res.aborted_problem_ids.empty()) {
    std::string ids;
    for (const auto& id : res.aborted_problem_ids) ids += (ids.empty() ? "" : ", ") + id;
    throw GroupAborted("every dialogue failed for: " + ids);
  }
  out << "rollout log: " << bo.log_path.string() << "\n";
  return 0;
}

// --- score --------------------------------------------------------------------

struct ScoreOptions {
  std::string problems;
  std::string rollouts;
};

int run_score(const CommonOptions& co, const ScoreOptions& so, std::ostream& out) {
  auto s = Session::open(co);
  const fs::path rf = so.rollouts.empty() ? s.dir / "rollouts.jsonl" : fs::path(so.rollouts);
  auto problems = so.problems.empty()
                      ? s.problem_map({s.dir / "train.jsonl", s.dir / "eval.jsonl"})
                      : s.problem_map({so.problems});
  if (problems.empty() && !s.cfg.dataset.empty()) problems = s.problem_map({s.cfg.dataset});
  auto groups = group_dialogues(load_rollout_log(rf));
  if (groups.empty()) throw PreconditionError("no dialogues in " + rf.string());
  Condition condition = Condition::preset(groups.front().dialogues.front().condition_id);
  auto student = s.client(s.cfg.student, "student");
  Judge judge(s.lib, s.client(s.cfg.judge, "judge"), s.judges);
  ScoringContext ctx{&s.lib, condition, s.cfg.weights, s.cfg.K, s.cfg.parallelism, student, &judge};
  score_groups(groups, problems, ctx);
  std::vector<json> records;
  for (const auto& g : groups) {
    for (std::size_t j = 0; j < g.dialogues.size(); ++j) records.push_back(reward_record(g, j));
  }
  write_jsonl(s.dir / "rewards.jsonl", records);
  auto n = emit_training_batch(groups, problems, s.lib, condition, s.dir / "batch.jsonl");
  out << "scored " << records.size() << " dialogues in " << groups.size() << " groups; "
      << n << " training records\n";
  return 0;
}

// --- evaluate -----------------------------------------------------------------

int run_evaluate(const CommonOptions& co, const ScoreOptions& so, std::ostream& out) {
  auto s = Session::open(co);
  const fs::path rf = so.rollouts.empty() ? s.dir / "rollouts.jsonl" : fs::path(so.rollouts);
  auto problems = so.problems.empty()
                      ? s.problem_map({s.dir / "train.jsonl", s.dir / "eval.jsonl"})
                      : s.problem_map({so.problems});
  if (problems.empty() && !s.cfg.dataset.empty()) problems = s.problem_map({s.cfg.dataset});
  auto dialogues = load_rollout_log(rf);
  if (dialogues.empty()) throw EmptyReport("no dialogues in " + rf.string());
  auto student = s.client(s.cfg.student, "student");
  Judge judge(s.lib, s.client(s.cfg.judge, "judge"), s.judges);

  std::vector<double> rates(dialogues.size(), 0.0);
  for (const auto& d : dialogues) {
    if (!problems.count(d.problem_id)) throw MissingBaseline(d.problem_id);
  }
  parallel_for(dialogues.size(), s.cfg.parallelism, [&](std::size_t i) {
    const auto& d = dialogues[i];
    if (d.termination == Termination::Error) return;
    rates[i] = compute_r_sol(problems.at(d.problem_id), d, *student, s.lib, s.cfg.K, d.seed * s.cfg.K);
  });
  std::map<std::string, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    auto& a = acc[dialogues[i].problem_id];
    if (dialogues[i].termination == Termination::Error) continue;
    a.first += rates[i];
    a.second += 1;
  }
  std::map<std::string, double> post;
  for (const auto& [id, a] : acc) post[id] = a.second ? a.first / a.second : 0.0;

  auto leak = judge_responses(dialogues, judge, ResponseJudge::Leak, s.cfg.parallelism);
  auto help = judge_responses(dialogues, judge, ResponseJudge::Help, s.cfg.parallelism);
  auto report = build_eval_report(dialogues.front().condition_id, problems, post, leak, help);
  report.config_snapshot = {{"condition", s.cfg.condition.name},
                            {"K", s.cfg.K},
                            {"seed", s.cfg.seed},
                            {"judge_model", s.cfg.judge.model_name},
                            {"student_model", s.cfg.student.model_name}};
  const auto md = render_report(report, ReportFormat::Markdown);
  write_file_atomic(s.dir / "eval.md", md);
  write_file_atomic(s.dir / "eval.csv", render_report(report, ReportFormat::Csv));
  write_file_atomic(s.dir / "eval.json", report_summary_json(report).dump(2) + "\n");
  out << md;
  if (report.failed_judgements > 0) {
    throw MalformedJudgeOutput(std::to_string(report.failed_judgements) +
                               " response judgements failed; see audit/judges.jsonl");
  }
  return 0;
}

// --- analyze ------------------------------------------------------------------

struct AnalyzeOptions {
  std::vector<std::string> rollouts;
  bool no_label = false;
  std::size_t top = 10;
};

int run_analyze(const CommonOptions& co, const AnalyzeOptions& ao, std::ostream& out) {
  auto s = Session::open(co);
  std::vector<fs::path> files(ao.rollouts.begin(), ao.rollouts.end());
  if (files.empty()) files.push_back(s.dir / "rollouts.jsonl");
  std::map<std::string, std::vector<Dialogue>> by_cond;
  for (const auto& f : files) {
    for (auto& d : load_rollout_log(f)) by_cond[d.condition_id].push_back(std::move(d));
  }
  if (by_cond.empty()) throw PreconditionError("no dialogues to analyze");

  AnalysisResult a;
  for (const auto& [cond, ds] : by_cond) a.word_stats.push_back(word_stats(ds, cond));

  if (!ao.no_label) {
    auto labeler = s.client(s.cfg.labeler, "labeler");
    LabelerOptions lo;
    lo.parallelism = s.cfg.parallelism;
    for (const auto& [cond, ds] : by_cond) {
      PhaseCounts total;
      bool any = false;
      for (const auto& d : ds) {
        for (const auto& t : d.turns) {
          if (t.speaker != Speaker::Tutor || split_sentences(t.think_text).empty()) continue;
          try {
            total += classify_schoenfeld(t.think_text, *labeler, s.lib, lo);
          } catch (const MalformedLabel& e) {
            total.unlabeled += split_sentences(t.think_text).size();
          }
          any = true;
        }
      }
      if (any) a.phases[cond] = total;
    }

    auto codebook = Codebook::load_default();
    std::vector<Dialogue> all;
    for (const auto& [_, ds] : by_cond) all.insert(all.end(), ds.begin(), ds.end());
    auto coded = label_codebook(tutor_sentences(all), codebook, *labeler, s.lib, lo);
    std::vector<json> recs;
    for (const auto& c : coded) recs.push_back(coded_to_json(c));
    write_jsonl(s.dir / "coded.jsonl", recs);
    if (!coded.empty()) {
      a.major = code_frequency_table(coded, GroupBy::MajorCategory, &codebook);
      a.codes = code_frequency_table(coded, GroupBy::Code, &codebook);
      std::vector<std::string> conds;
      for (const auto& [c, _] : a.major.counts) conds.push_back(c);
      if (conds.size() >= 2) {
        try {
          a.tests.push_back({"major categories x condition",
                             chi_square(contingency(a.major, conds, a.major.labels()))});
        } catch (const DegenerateTable& e) {
          spdlog::warn("skipping major-category test: {}", e.what());
        }
        for (const auto& label : a.major.labels()) {
          try {
            a.tests.push_back({label + " (" + conds[0] + " vs " + conds[1] + ")",
                               chi_square(presence_table(a.major, conds[0], conds[1], label))});
          } catch (const DegenerateTable& e) {
            spdlog::warn("skipping test for {}: {}", label, e.what());
          }
        }
      }
    }
  }
  const auto md = render_analysis(a, ao.top);
  write_file_atomic(s.dir / "analysis.md", md);
  out << md;
  return 0;
}

// --- serve-mock ---------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void request_stop(int) { g_stop = true; }

int run_serve_mock(const std::string& playbook, const std::string& host, int port,
                   std::ostream& out) {
  auto backend = std::make_shared<MockBackend>(load_playbook(playbook));
  MockHttpServer server(backend, host, port);
  server.start();
  out << "mock server listening on " << server.base_url() << std::endl;
  std::signal(SIGINT, request_stop);
  std::signal(SIGTERM, request_stop);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pedtutor: tutor dialogue rollouts, rewards, evaluation and analysis"};
  app.name("pedtutor");
  app.require_subcommand(1);

  CommonOptions co;
  PrepareOptions po;
  auto* prepare = app.add_subcommand("prepare-data", "Ingest, measure baselines, filter and split problems");
  add_common(prepare, co);
  prepare->add_option("--in", po.in, "Problems JSONL");
  prepare->add_option("--lo", po.lo, "Lower solve-rate bound (inclusive)");
  prepare->add_option("--hi", po.hi, "Upper solve-rate bound (inclusive)");
  prepare->add_option("--n-train", po.n_train, "Training problems (default: all but --n-eval)");
  prepare->add_option("--n-eval", po.n_eval, "Held-out evaluation problems");

  RolloutOptions ro;
  auto* rollout = app.add_subcommand("rollout", "Generate rollout groups");
  add_common(rollout, co);
  rollout->add_option("--problems", ro.problems, "Problems JSONL (default: run-dir train.jsonl)");
  rollout->add_flag("--resume", ro.resume, "Reuse complete groups in the rollout log");

  ScoreOptions so;
  auto* score = app.add_subcommand("score", "Rewards, group advantages and the training batch");
  add_common(score, co);
  score->add_option("--problems", so.problems, "Problems JSONL");
  score->add_option("--rollouts", so.rollouts, "Rollout log (default: run-dir rollouts.jsonl)");

  ScoreOptions eo;
  auto* evaluate = app.add_subcommand("evaluate", "Solve-rate delta, leak and helpful rates");
  add_common(evaluate, co);
  evaluate->add_option("--problems", eo.problems, "Problems JSONL with baselines");
  evaluate->add_option("--rollouts", eo.rollouts, "Rollout log (default: run-dir rollouts.jsonl)");

  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "Word, math, phase and codebook analyses");
  add_common(analyze, co);
  analyze->add_option("--rollouts", ao.rollouts, "Rollout logs (repeatable)");
  analyze->add_flag("--no-label", ao.no_label, "Skip labeler-based analyses");
  analyze->add_option("--top", ao.top, "Top codes per condition");

  std::string playbook, host = "127.0.0.1";
  int port = 8089;
  auto* serve = app.add_subcommand("serve-mock", "Serve a mock playbook over HTTP");
  serve->add_option("--playbook", playbook, "Mock playbook JSONL")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
        app.get_subcommand_no_throw(args[0]) == nullptr) {
      throw UsageError("unknown command '" + args[0] + "'");
    }
    app.parse(rev);
  } catch (const UsageError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    UsageError u(e.what());
    err << "error: " << u.kind() << ": " << u.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*prepare) return run_prepare(co, po, out);
    if (*rollout) return run_rollout(co, ro, out);
    if (*score) return run_score(co, so, out);
    if (*evaluate) return run_evaluate(co, eo, out);
    if (*analyze) return run_analyze(co, ao, out);
    if (*serve) return run_serve_mock(playbook, host, port, out);
  } catch (const UsageError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pedtutor

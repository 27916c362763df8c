#pragma once

// `mentra` command line. Exit codes: 0 success, 1 runtime failure, 2 usage
// error. Output is line-delimited JSON unless --format asks for a table.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mentra/config.hpp"
#include "mentra/dataset.hpp"
#include "mentra/eval.hpp"
#include "mentra/gateway_http.hpp"
#include "mentra/llm_roles.hpp"
#include "mentra/prompts.hpp"
#include "mentra/report.hpp"
#include "mentra/reward.hpp"
#include "mentra/rtg.hpp"
#include "mentra/toy_task.hpp"
#include "mentra/trainer.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra::cli {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::string format = "jsonl";
  std::string prompts_dir = MENTRA_PROMPT_DIR;
  bool live = false;
};

namespace detail {

inline EngineConfig load_config(const Common& c) {
  return c.config_path.empty() ? EngineConfig{} : load_engine_config(c.config_path);
}

/// Expands directories into their *.txt files, sorted by name.
inline std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".txt") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json violations_json(const std::vector<Violation>& vs) {
  auto arr = nlohmann::json::array();
  for (const auto& v : vs) arr.push_back({{"code", to_string(v.code)}, {"message", v.message}});
  return arr;
}

inline nlohmann::json breakdown_json(const RewardBreakdown& b) {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
  return {{"format_gate", opt(b.format_gate)},
          {"length_gate", opt(b.length_gate)},
          {"consistency_gate", opt(b.consistency_gate)},
          {"quality", opt(b.quality)},
          {"reward", b.reward},
          {"think_tokens", b.think_tokens},
          {"conclusion_mismatch", b.conclusion_mismatch},
          {"answer_unparsable", b.answer_unparsable},
          {"judge_rationale", b.judge_rationale},
          {"violations", violations_json(b.violations)}};
}

/// Mock judges selectable from the command line.
inline std::unique_ptr<ConsistencyJudge> make_mock_judge(const std::string& kind, double p, std::uint64_t seed,
                                                         const std::vector<std::string>& markers) {
  if (kind == "always") return std::make_unique<AlwaysConsistentJudge>();
  if (kind == "seeded") return std::make_unique<SeededJudge>(p, seed);
  if (kind == "marker") return std::make_unique<MarkerJudge>(markers);
  throw Error(Errc::ConfigError, "unknown judge '" + kind + "'");
}

struct LiveStack {
  explicit LiveStack(const EngineConfig& cfg, const std::string& prompt_dir)
      : client(gateway::make_live_client(cfg.gateway)), prompts(prompt_dir) {}
  gateway::ChatClient client;
  PromptLibrary prompts;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::vector<std::string> inputs;
  bool strict = false;
  std::optional<std::size_t> token_count;
};

inline int cmd_validate(const Common& c, const ValidateArgs& a, std::ostream& out) {
  const auto cfg = detail::load_config(c);
  std::vector<report::Row> rows;
  bool all_ok = true;
  for (const auto& file : detail::expand_inputs(a.inputs)) {
    const auto raw = detail::read_file(file);
    const auto mode = a.token_count ? TokenizationMode::GeneratorReported : TokenizationMode::Whitespace;
    const auto rep = validate_text(raw, cfg.format, mode, a.token_count);
    all_ok = all_ok && rep.format_valid && rep.length_valid;
    if (c.format == "table") {
      rows.push_back({file.filename().string(), rep.format_valid ? "yes" : "no", rep.length_valid ? "yes" : "no",
                      std::to_string(rep.token_count),
                      rep.violations.empty() ? "-" : std::string(to_string(rep.violations.front().code))});
    } else {
      out << nlohmann::json{{"file", file.string()},
                            {"format_valid", rep.format_valid},
                            {"length_valid", rep.length_valid},
                            {"token_count", rep.token_count},
                            {"violations", detail::violations_json(rep.violations)}}
                 .dump()
          << '\n';
    }
  }
  if (c.format == "table") out << report::render_table({"file", "format", "length", "tokens", "first violation"}, rows);
  return a.strict && !all_ok ? 1 : 0;
}

struct ScoreArgs {
  std::string dataset;
  std::string responses;
  std::string judge = "always";
  double judge_p = 0.1;
  std::vector<std::string> markers{"contradict"};
  std::uint64_t seed = 0;
};

inline int cmd_score(const Common& c, const ScoreArgs& a, std::ostream& out) {
  const auto cfg = detail::load_config(c);
  const auto tasks = load_tasks(a.dataset);
  std::map<std::string, const TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;

  std::unique_ptr<detail::LiveStack> live;
  std::unique_ptr<ConsistencyJudge> judge;
  RewardOptions opts;
  if (c.live) {
    live = std::make_unique<detail::LiveStack>(cfg, c.prompts_dir);
    judge = std::make_unique<llm::LlmConsistencyJudge>(live->client, live->prompts, cfg.gateway.judge_model);
    opts.matcher = llm::make_llm_point_matcher(live->client, live->prompts, cfg.gateway.judge_model);
  } else {
    judge = detail::make_mock_judge(a.judge, a.judge_p, a.seed, a.markers);
  }

  std::vector<report::Row> rows;
  for_each_jsonl(fs::path(a.responses), [&](const nlohmann::json& j, std::size_t no) {
    const auto where = a.responses + ":" + std::to_string(no);
    if (!j.contains("id") || !j.contains("trajectory")) throw Error(Errc::DatasetError, where + ": need id and trajectory");
    const auto id = j.at("id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(Errc::AlignmentError, where + ": unknown task id '" + id + "'");
    RewardOptions o = opts;
    if (j.contains("token_count")) {
      o.tokenization = TokenizationMode::GeneratorReported;
      o.generator_token_count = j.at("token_count").get<std::size_t>();
    }
    const auto b = compute_reward(j.at("trajectory").get<std::string>(), *it->second, cfg.format, *judge, o);
    if (c.format == "table") {
      auto opt = [](const auto& v) { return v ? report::fixed(static_cast<double>(*v), 2) : std::string("-"); };
      rows.push_back({id, opt(b.format_gate), opt(b.length_gate), opt(b.consistency_gate), opt(b.quality),
                      report::fixed(b.reward, 4)});
    } else {
      auto rec = detail::breakdown_json(b);
      rec["id"] = id;
      out << rec.dump() << '\n';
    }
  });
  if (c.format == "table")
    out << report::render_table({"id", "format", "length", "consistency", "quality", "reward"}, rows);
  return 0;
}

struct RtgArgs {
  std::string dataset;
  bool filter = false;
  double accuracy = 0.6;
  double solver_accuracy = 0.5;
  std::uint64_t seed = 0;
};

inline int cmd_rtg(const Common& c, const RtgArgs& a, std::ostream& out) {
  auto cfg = detail::load_config(c);
  if (a.seed) cfg.search.strategy_seed = a.seed;
  auto tasks = load_tasks(a.dataset);

  std::unique_ptr<detail::LiveStack> live;
  std::unique_ptr<rtg::ReasoningGenerator> gen;
  std::unique_ptr<rtg::AnswerVerifier> verifier;
  std::unique_ptr<rtg::ZeroShotSolver> solver;
  if (c.live) {
    live = std::make_unique<detail::LiveStack>(cfg, c.prompts_dir);
    gen = std::make_unique<llm::LlmGenerator>(live->client, live->prompts, cfg.gateway.model);
    verifier = std::make_unique<llm::LlmVerifier>(live->client, live->prompts, cfg.gateway.judge_model);
    solver = std::make_unique<llm::LlmSolver>(live->client, live->prompts, cfg.gateway.model);
  } else {
    gen = std::make_unique<rtg::SimulatedGenerator>(a.accuracy, cfg.search.strategy_seed);
    verifier = std::make_unique<rtg::QualityVerifier>();
    solver = std::make_unique<rtg::SimulatedSolver>(a.solver_accuracy, text::mix_seed(cfg.search.strategy_seed, 1));
  }
  if (a.filter) tasks = rtg::difficulty_filter(tasks, *solver);

  std::vector<report::Row> rows;
  std::size_t accepted = 0;
  for (const auto& t : tasks) {
    const auto r = rtg::search_trajectory(t, *gen, *verifier, cfg.search, cfg.format);
    accepted += r.accepted ? 1 : 0;
    if (c.format == "table") {
      rows.push_back({t.id, r.accepted ? "accepted" : "discarded", std::to_string(r.session.attempt),
                      std::to_string(r.session.generator_calls)});
    } else {
      out << rtg::to_json(r).dump() << '\n';
    }
  }
  if (c.format == "table") {
    out << report::render_table({"problem", "status", "attempts", "generator calls"}, rows);
    out << "accepted " << accepted << " of " << tasks.size() << '\n';
  }
  return 0;
}

struct TrainToyArgs {
  std::int64_t steps = 2000;
  std::uint64_t seed = 7;
  std::string out_dir;
  double lr = 0.05;
  std::int64_t log_every = 100;
  std::string resume;
  std::size_t labels = 4;
};

inline int cmd_train_toy(const Common& c, const TrainToyArgs& a, std::ostream& out) {
  auto ecfg = detail::load_config(c);
  auto cfg = ecfg.training();
  cfg.trainer.total_steps = a.steps;
  cfg.trainer.seed = a.seed;
  cfg.optimizer.learning_rate = a.lr;
  if (!a.out_dir.empty()) cfg.trainer.output_dir = a.out_dir;
  if (a.log_every < 1) throw Error(Errc::ConfigError, "--log-every must be >= 1");

  const auto task = toy::make_copy_task(a.labels);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  auto state = a.resume.empty() ? initial_state(policy, a.seed) : load_checkpoint(a.resume);
  const auto start_step = state.step;

  std::vector<report::Row> rows;
  auto result = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, std::move(state),
                             [&](const StepRecord& r, std::span<const RolloutGroup>) {
                               if (r.step % a.log_every != 0 && r.step != a.steps) return;
                               if (c.format == "table") {
                                 rows.push_back({std::to_string(r.step), report::fixed(r.mu), report::fixed(r.sft_loss),
                                                 report::fixed(r.grpo_loss), report::fixed(r.total_loss),
                                                 report::fixed(r.mean_reward)});
                               } else {
                                 out << to_json(r).dump() << '\n';
                               }
                             });
  if (!cfg.trainer.output_dir.empty()) {
    const auto log_path = cfg.trainer.output_dir / "train_log.jsonl";
    // On resume keep the records up to the checkpoint, drop anything later.
    std::vector<StepRecord> full;
    if (!a.resume.empty() && std::filesystem::exists(log_path))
      for (auto& r : read_train_log(log_path))
        if (r.step <= start_step) full.push_back(std::move(r));
    full.insert(full.end(), result.log.begin(), result.log.end());
    write_train_log(log_path, full);
  }
  const auto& last = result.log.empty() ? StepRecord{} : result.log.back();
  if (c.format == "table") {
    out << report::render_table({"step", "mu", "sft", "grpo", "total", "reward"}, rows);
    out << "final step " << last.step << " total_loss " << report::fixed(last.total_loss, 10) << " mean_reward "
        << report::fixed(last.mean_reward) << '\n';
  } else {
    out << nlohmann::json{{"final", true},
                          {"step", result.state.step},
                          {"total_loss", last.total_loss},
                          {"mean_reward", last.mean_reward},
                          {"checkpoints", result.checkpoints.size()}}
               .dump()
        << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string dataset;
  std::string predictions;
};

inline int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  const auto cfg = detail::load_config(c);
  const auto tasks = load_tasks(a.dataset);
  std::vector<report::Row> rows;
  for (const auto& g : join_predictions(tasks, a.predictions, cfg.format)) {
    const auto rep = eval::compute_metric(g.metric, g.set);
    if (c.format == "table") {
      rows.push_back({std::string(to_string(g.set.kind)), std::string(eval::to_string(rep.metric)),
                      report::fixed(rep.value), std::to_string(rep.support)});
    } else {
      nlohmann::json per = nlohmann::json::object();
      for (const auto& [label, s] : rep.per_class)
        per[label] = {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"f1", s.f1}};
      out << nlohmann::json{{"task_kind", to_string(g.set.kind)},
                            {"metric", eval::to_string(rep.metric)},
                            {"value", rep.value},
                            {"support", rep.support},
                            {"per_class", per}}
                 .dump()
          << '\n';
    }
  }
  if (c.format == "table") out << report::render_table({"task kind", "metric", "value", "support"}, rows);
  return 0;
}

struct AgreementArgs {
  std::vector<std::string> sheets;
};

inline int cmd_agreement(const Common& c, const AgreementArgs& a, std::ostream& out) {
  std::vector<eval::RubricSheet> sheets;
  for (const auto& f : a.sheets) {
    auto s = load_rubric_sheets(f);
    sheets.insert(sheets.end(), s.begin(), s.end());
  }
  if (sheets.size() != 2)
    throw Error(Errc::AlignmentError, "agreement needs exactly two annotators, got " + std::to_string(sheets.size()));
  const auto agr = eval::rubric_agreement(sheets[0], sheets[1]);
  const auto avg = eval::rubric_average(sheets);
  if (c.format == "table") {
    const auto [h, rows] = report::agreement_rows(agr);
    out << report::render_table(h, rows) << '\n';
    const auto [h2, rows2] = report::rubric_rows(avg, "mean score");
    out << report::render_table(h2, rows2);
    return 0;
  }
  for (std::size_t d = 0; d < eval::kRubricDims; ++d) {
    out << nlohmann::json{{"dimension", eval::kRubricNames[d]},
                          {"title", eval::kRubricTitles[d]},
                          {"gwet_ac1", agr.ac1[d]},
                          {"cohen_kappa", agr.kappa[d]},
                          {"percent", agr.percent[d]},
                          {"mean_score", avg.dims[d]}}
               .dump()
        << '\n';
  }
  out << nlohmann::json{{"dimension", "R_avg"}, {"mean_score", avg.r_avg}, {"cases", avg.cases}}.dump() << '\n';
  return 0;
}

struct ReportArgs {
  std::string log;
  std::int64_t every = 1;
};

inline int cmd_report(const Common& c, const ReportArgs& a, std::ostream& out) {
  if (a.every < 1) throw Error(Errc::ConfigError, "--every must be >= 1");
  const auto log = read_train_log(a.log);
  std::vector<StepRecord> kept;
  for (const auto& r : log)
    if (r.step % a.every == 0 || &r == &log.back()) kept.push_back(r);

  const report::Row header{"step", "mu", "sft_loss", "grpo_loss", "total_loss", "mean_reward"};
  if (c.format == "json" || c.format == "jsonl") {
    nlohmann::json series = nlohmann::json::object();
    for (const auto& k : header) series[k] = nlohmann::json::array();
    for (const auto& r : kept) {
      series["step"].push_back(r.step);
      series["mu"].push_back(r.mu);
      series["sft_loss"].push_back(r.sft_loss);
      series["grpo_loss"].push_back(r.grpo_loss);
      series["total_loss"].push_back(r.total_loss);
      series["mean_reward"].push_back(r.mean_reward);
    }
    out << series.dump() << '\n';
    return 0;
  }
  std::vector<report::Row> rows;
  for (const auto& r : kept)
    rows.push_back({std::to_string(r.step), report::fixed(r.mu), report::fixed(r.sft_loss), report::fixed(r.grpo_loss),
                    report::fixed(r.total_loss), report::fixed(r.mean_reward)});
  out << (c.format == "csv" ? report::render_csv(header, rows) : report::render_table(header, rows));
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"mentra: structured-reasoning post-training toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "engine config JSON")->check(CLI::ExistingFile);
  app.add_option("--format", common.format, "output format")
      ->check(CLI::IsMember({"jsonl", "table", "csv", "json"}));
  app.add_option("--prompts", common.prompts_dir, "prompt template directory");
  app.add_flag("--live", common.live, "use the configured model endpoint instead of mocks");

  std::function<int()> action;

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "validate structured trajectories");
  validate->add_option("inputs", va.inputs, "trajectory files or directories")->required();
  validate->add_flag("--strict", va.strict, "exit 1 if any input is invalid");
  validate->add_option("--token-count", va.token_count, "generator-reported think token count");
  validate->callback([&] { action = [&] { return cmd_validate(common, va, out); }; });

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "compute gated rewards for responses");
  score->add_option("--dataset", sa.dataset, "task JSONL")->required()->check(CLI::ExistingFile);
  score->add_option("--responses", sa.responses, "response JSONL {id, trajectory}")->required()->check(CLI::ExistingFile);
  score->add_option("--judge", sa.judge, "mock judge")->check(CLI::IsMember({"always", "seeded", "marker"}));
  score->add_option("--judge-p", sa.judge_p, "inconsistency rate of the seeded judge")->check(CLI::Range(0.0, 1.0));
  score->add_option("--markers", sa.markers, "markers for the marker judge");
  score->add_option("--seed", sa.seed, "seed of the seeded judge");
  score->callback([&] { action = [&] { return cmd_score(common, sa, out); }; });

  RtgArgs ra;
  auto* rtg_cmd = app.add_subcommand("rtg", "search and rewrite reasoning trajectories");
  rtg_cmd->add_option("--dataset", ra.dataset, "task JSONL")->required()->check(CLI::ExistingFile);
  rtg_cmd->add_flag("--filter", ra.filter, "keep only items the zero-shot solver gets wrong");
  rtg_cmd->add_option("--accuracy", ra.accuracy, "mock generator accuracy")->check(CLI::Range(0.0, 1.0));
  rtg_cmd->add_option("--solver-accuracy", ra.solver_accuracy, "mock solver accuracy")->check(CLI::Range(0.0, 1.0));
  rtg_cmd->add_option("--seed", ra.seed, "strategy and mock seed");
  rtg_cmd->callback([&] { action = [&] { return cmd_rtg(common, ra, out); }; });

  TrainToyArgs ta;
  auto* train = app.add_subcommand("train-toy", "train the toy policy on the synthetic copy task");
  train->add_option("--steps", ta.steps, "total steps")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", ta.seed, "run seed");
  train->add_option("--out", ta.out_dir, "output directory for checkpoints and the log");
  train->add_option("--lr", ta.lr, "learning rate")->check(CLI::PositiveNumber);
  train->add_option("--log-every", ta.log_every, "print every n-th step");
  train->add_option("--resume", ta.resume, "checkpoint directory to resume from")->check(CLI::ExistingDirectory);
  train->add_option("--labels", ta.labels, "number of copy-task labels")->check(CLI::Range(1, 26));
  train->callback([&] { action = [&] { return cmd_train_toy(common, ta, out); }; });

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against a dataset");
  eval_cmd->add_option("--dataset", ea.dataset, "task JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", ea.predictions, "prediction JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->callback([&] { action = [&] { return cmd_eval(common, ea, out); }; });

  AgreementArgs aa;
  auto* agree = app.add_subcommand("agreement", "inter-annotator agreement on rubric sheets");
  agree->add_option("sheets", aa.sheets, "rubric JSONL files")->required()->check(CLI::ExistingFile);
  agree->callback([&] { action = [&] { return cmd_agreement(common, aa, out); }; });

  ReportArgs pa;
  auto* rep = app.add_subcommand("report", "tables and series from a training log");
  rep->add_option("log", pa.log, "train_log.jsonl")->required()->check(CLI::ExistingFile);
  rep->add_option("--every", pa.every, "keep every n-th step");
  rep->callback([&] { action = [&] { return cmd_report(common, pa, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  if (!action) {
    err << "usage error: no subcommand\n";
    return 2;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mentra::cli

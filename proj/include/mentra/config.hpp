#pragma once

// One JSON file holding every tunable of the engine. Missing keys keep their
// defaults; unknown keys are an error so typos never pass silently.
//
// {
//   "format":    { "min_think_tokens", "max_think_tokens", "conclusion_marker",
//                  "answer_prefix", "allow_surrounding_whitespace" },
//   "schedule":  { "mu_peak", "mu_valley", "t_warmup", "t_decay" },
//   "loss":      { "clip_epsilon", "ez" },
//   "optimizer": { "beta1", "beta2", "learning_rate", "adam_eps" },
//   "trainer":   { "total_steps", "sft_batch", "rollout_k", "prompts_per_step",
//                  "temperature", "checkpoint_every", "seed", "output_dir",
//                  "phi_gradient": "stop_gradient" | "full", "cache_judge" },
//   "search":    { "max_iterations", "max_attempts", "strategy_seed" },
//   "gateway":   { "base_url", "timeout_ms", "model", "judge_model",
//                  "max_retries", "backoff_ms", "concurrency", "api_key_env" }
// }

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "mentra/error.hpp"
#include "mentra/gateway.hpp"
#include "mentra/optimizer.hpp"
#include "mentra/rtg.hpp"
#include "mentra/schedule.hpp"
#include "mentra/trainer.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra {

struct EngineConfig {
  FormatConfig format;
  ScheduleConfig schedule;
  LossConfig loss;
  OptimizerConfig optimizer;
  TrainerConfig trainer;
  rtg::SearchConfig search;
  gateway::GatewaySettings gateway;

  TrainingConfig training() const { return {trainer, schedule, loss, optimizer, format}; }

  void check() const {
    format.check();
    schedule.check();
    loss.check();
    optimizer.check();
    trainer.check();
    search.check();
    gateway.check();
  }
};

namespace detail {

/// Reads named fields from one JSON object and rejects leftovers.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(Errc::ConfigError, name_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::ConfigError, name_ + "." + key + ": wrong type");
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error(Errc::ConfigError, "unknown config key '" + name_ + "." + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  detail::Section root(j, "config");
  nlohmann::json empty = nlohmann::json::object();
  auto sub = [&](const char* name) -> const nlohmann::json& {
    nlohmann::json dummy;
    root.get(name, dummy);
    return j.contains(name) ? j.at(name) : empty;
  };

  {
    detail::Section s(sub("format"), "format");
    s.get("min_think_tokens", c.format.min_think_tokens);
    s.get("max_think_tokens", c.format.max_think_tokens);
    s.get("conclusion_marker", c.format.conclusion_marker);
    s.get("answer_prefix", c.format.answer_prefix);
    s.get("allow_surrounding_whitespace", c.format.allow_surrounding_whitespace);
    s.finish();
  }
  {
    detail::Section s(sub("schedule"), "schedule");
    s.get("mu_peak", c.schedule.mu_peak);
    s.get("mu_valley", c.schedule.mu_valley);
    s.get("t_warmup", c.schedule.t_warmup);
    s.get("t_decay", c.schedule.t_decay);
    s.finish();
  }
  {
    detail::Section s(sub("loss"), "loss");
    s.get("clip_epsilon", c.loss.clip_epsilon);
    s.get("ez", c.loss.ez);
    s.finish();
  }
  {
    detail::Section s(sub("optimizer"), "optimizer");
    s.get("beta1", c.optimizer.beta1);
    s.get("beta2", c.optimizer.beta2);
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("adam_eps", c.optimizer.adam_eps);
    s.finish();
  }
  {
    detail::Section s(sub("trainer"), "trainer");
    s.get("total_steps", c.trainer.total_steps);
    s.get("sft_batch", c.trainer.sft_batch);
    s.get("rollout_k", c.trainer.rollout_k);
    s.get("prompts_per_step", c.trainer.prompts_per_step);
    s.get("temperature", c.trainer.temperature);
    s.get("checkpoint_every", c.trainer.checkpoint_every);
    s.get("seed", c.trainer.seed);
    std::string out_dir = c.trainer.output_dir.string();
    s.get("output_dir", out_dir);
    c.trainer.output_dir = out_dir;
    std::string phi = "stop_gradient";
    s.get("phi_gradient", phi);
    if (phi == "stop_gradient") c.trainer.phi_gradient = PhiGradient::StopGradient;
    else if (phi == "full") c.trainer.phi_gradient = PhiGradient::Full;
    else throw Error(Errc::ConfigError, "trainer.phi_gradient must be \"stop_gradient\" or \"full\"");
    s.get("cache_judge", c.trainer.cache_judge);
    s.finish();
  }
  {
    detail::Section s(sub("search"), "search");
    s.get("max_iterations", c.search.max_iterations);
    s.get("max_attempts", c.search.max_attempts);
    s.get("strategy_seed", c.search.strategy_seed);
    s.finish();
  }
  {
    detail::Section s(sub("gateway"), "gateway");
    s.get("base_url", c.gateway.base_url);
    s.get("timeout_ms", c.gateway.timeout_ms);
    s.get("model", c.gateway.model);
    s.get("judge_model", c.gateway.judge_model);
    s.get("max_retries", c.gateway.max_retries);
    s.get("backoff_ms", c.gateway.backoff_ms);
    s.get("concurrency", c.gateway.concurrency);
    s.get("api_key_env", c.gateway.api_key_env);
    s.finish();
  }
  root.finish();
  c.check();
  return c;
}

inline nlohmann::json to_json(const EngineConfig& c) {
  return {
      {"format",
       {{"min_think_tokens", c.format.min_think_tokens},
        {"max_think_tokens", c.format.max_think_tokens},
        {"conclusion_marker", c.format.conclusion_marker},
        {"answer_prefix", c.format.answer_prefix},
        {"allow_surrounding_whitespace", c.format.allow_surrounding_whitespace}}},
      {"schedule",
       {{"mu_peak", c.schedule.mu_peak},
        {"mu_valley", c.schedule.mu_valley},
        {"t_warmup", c.schedule.t_warmup},
        {"t_decay", c.schedule.t_decay}}},
      {"loss", {{"clip_epsilon", c.loss.clip_epsilon}, {"ez", c.loss.ez}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"learning_rate", c.optimizer.learning_rate},
        {"adam_eps", c.optimizer.adam_eps}}},
      {"trainer",
       {{"total_steps", c.trainer.total_steps},
        {"sft_batch", c.trainer.sft_batch},
        {"rollout_k", c.trainer.rollout_k},
        {"prompts_per_step", c.trainer.prompts_per_step},
        {"temperature", c.trainer.temperature},
        {"checkpoint_every", c.trainer.checkpoint_every},
        {"seed", c.trainer.seed},
        {"output_dir", c.trainer.output_dir.string()},
        {"phi_gradient", c.trainer.phi_gradient == PhiGradient::Full ? "full" : "stop_gradient"},
        {"cache_judge", c.trainer.cache_judge}}},
      {"search",
       {{"max_iterations", c.search.max_iterations},
        {"max_attempts", c.search.max_attempts},
        {"strategy_seed", c.search.strategy_seed}}},
      {"gateway",
       {{"base_url", c.gateway.base_url},
        {"timeout_ms", c.gateway.timeout_ms},
        {"model", c.gateway.model},
        {"judge_model", c.gateway.judge_model},
        {"max_retries", c.gateway.max_retries},
        {"backoff_ms", c.gateway.backoff_ms},
        {"concurrency", c.gateway.concurrency},
        {"api_key_env", c.gateway.api_key_env}}},
  };
}

inline EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return engine_config_from_json(j);
}

}  // namespace mentra

#pragma once

// Hybrid SFT/RL training loop. One iteration:
//   1. sample an SFT mini-batch and a set of rollout prompts
//   2. roll out K completions per prompt and score them with the gated reward
//   3. normalize rewards within each group into advantages
//   4. compute the token-weighted SFT loss and the clipped GRPO loss
//   5. mix them with mu(t) and apply one Adam update
//   6. checkpoint every `checkpoint_every` steps
//
// All randomness is derived from (seed, step, slot), so a run is bitwise
// reproducible and can resume from any checkpoint.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mentra/checkpoint.hpp"
#include "mentra/error.hpp"
#include "mentra/optimizer.hpp"
#include "mentra/policy.hpp"
#include "mentra/reward.hpp"
#include "mentra/schedule.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra {

struct TrainerConfig {
  std::int64_t total_steps = 0;
  std::size_t sft_batch = 64;
  std::size_t rollout_k = 8;
  std::size_t prompts_per_step = 8;
  double temperature = 1.0;
  std::int64_t checkpoint_every = 10;
  std::uint64_t seed = 0;
  // Empty: no checkpoints are written.
  std::filesystem::path output_dir;
  PhiGradient phi_gradient = PhiGradient::StopGradient;
  bool cache_judge = false;

  void check() const {
    if (total_steps < 0) throw Error(Errc::ConfigError, "trainer: total_steps must be >= 0");
    if (sft_batch < 1 || rollout_k < 1 || prompts_per_step < 1 || checkpoint_every < 1)
      throw Error(Errc::ConfigError, "trainer: counts must be >= 1");
    if (!(temperature > 0.0)) throw Error(Errc::ConfigError, "trainer: temperature must be > 0");
  }
};

struct TrainingConfig {
  TrainerConfig trainer;
  ScheduleConfig schedule;
  LossConfig loss;
  OptimizerConfig optimizer;
  FormatConfig format;

  void check() const {
    trainer.check();
    schedule.check();
    loss.check();
    optimizer.check();
    format.check();
  }
};

struct RolloutCompletion {
  std::vector<TokenId> tokens;
  std::vector<double> sample_logprobs;
  std::string text;
  RewardBreakdown reward;
};

struct RolloutGroup {
  const TaskSpec* task = nullptr;
  std::vector<RolloutCompletion> completions;
  std::vector<double> advantages;

  std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(completions.size());
    for (const auto& c : completions) r.push_back(c.reward.reward);
    return r;
  }
};

struct StepRecord {
  std::int64_t step = 0;
  double mu = 0.0;
  double sft_loss = 0.0;
  double grpo_loss = 0.0;
  double total_loss = 0.0;
  double mean_reward = 0.0;
  std::size_t b_rl_sequences = 0;
  std::size_t b_rl_tokens = 0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},           {"mu", r.mu},
          {"sft_loss", r.sft_loss},   {"grpo_loss", r.grpo_loss},
          {"total_loss", r.total_loss}, {"mean_reward", r.mean_reward},
          {"b_rl_sequences", r.b_rl_sequences}, {"b_rl_tokens", r.b_rl_tokens}};
}

inline StepRecord step_record_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.mu = j.at("mu").get<double>();
  r.sft_loss = j.at("sft_loss").get<double>();
  r.grpo_loss = j.at("grpo_loss").get<double>();
  r.total_loss = j.at("total_loss").get<double>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.b_rl_sequences = j.value("b_rl_sequences", std::size_t{0});
  r.b_rl_tokens = j.value("b_rl_tokens", std::size_t{0});
  return r;
}

inline void write_train_log(const std::filesystem::path& path, std::span<const StepRecord> log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : log) out << to_json(r).dump() << '\n';
}

inline std::vector<StepRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::vector<StepRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (text::is_blank(line)) continue;
    try {
      log.push_back(step_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoError, path.string() + ": bad log line: " + e.what());
    }
  }
  return log;
}

struct TrainResult {
  TrainState state;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<StepRecord> log;
};

// Seed slots within a step.
namespace seed_slot {
inline constexpr std::uint64_t kSftBatch = 1;
inline constexpr std::uint64_t kPrompts = 2;
inline constexpr std::uint64_t kCompletionBase = 1000;
}  // namespace seed_slot

inline std::uint64_t step_seed(std::uint64_t seed, std::int64_t step) {
  return text::mix_seed(seed, static_cast<std::uint64_t>(step));
}

/// Samples K completions for one prompt under a frozen parameter snapshot
/// and attaches rewards and group-normalized advantages.
template <PolicyContract P>
RolloutGroup rollout(const TaskSpec& task, const P& policy, std::span<const double> params,
                     const TrainingConfig& cfg, ConsistencyJudge& judge, std::uint64_t seed) {
  RolloutGroup group;
  group.task = &task;
  group.completions.reserve(cfg.trainer.rollout_k);
  for (std::size_t j = 0; j < cfg.trainer.rollout_k; ++j) {
    auto c = policy.sample(params, task.prompt, cfg.trainer.temperature, text::mix_seed(seed, j));
    RolloutCompletion rc;
    rc.text = policy.detokenize(c.tokens);
    rc.reward = compute_reward(rc.text, task, cfg.format, judge);
    rc.tokens = std::move(c.tokens);
    rc.sample_logprobs = std::move(c.logprobs);
    group.completions.push_back(std::move(rc));
  }
  const auto rewards = group.rewards();
  group.advantages = normalize_advantages(rewards, cfg.loss);
  return group;
}

using StepObserver = std::function<void(const StepRecord&, std::span<const RolloutGroup>)>;

/// Runs steps state.step+1 .. total_steps. Pass a fresh TrainState (zero
/// step, params sized for the policy) to start, or a loaded checkpoint to
/// resume.
template <PolicyContract P>
TrainResult run_training(const TrainingConfig& cfg, std::span<const ExpertExample> sft_data,
                         std::span<const TaskSpec> rl_prompts, const P& policy, ConsistencyJudge& judge,
                         TrainState state, const StepObserver& observer = {}) {
  cfg.check();
  if (sft_data.empty()) throw Error(Errc::DatasetEmpty, "SFT dataset is empty");
  if (rl_prompts.empty()) throw Error(Errc::DatasetEmpty, "RL prompt dataset is empty");
  if (state.params.size() != policy.num_params())
    throw Error(Errc::ShapeMismatch, "initial parameters do not match the policy");
  if (state.step > 0 && state.seed != cfg.trainer.seed)
    throw Error(Errc::ConfigError, "resume seed differs from the checkpoint seed");
  state.seed = cfg.trainer.seed;

  std::optional<CachingJudge> cache;
  if (cfg.trainer.cache_judge) cache.emplace(judge);
  ConsistencyJudge& scorer = cache ? static_cast<ConsistencyJudge&>(*cache) : judge;

  TrainResult result;
  const auto& out_dir = cfg.trainer.output_dir;
  if (!out_dir.empty() && state.step == 0) result.checkpoints.push_back(save_checkpoint(out_dir, state));

  for (std::int64_t t = state.step + 1; t <= cfg.trainer.total_steps; ++t) {
    const auto s = step_seed(cfg.trainer.seed, t);

    std::mt19937_64 sft_rng(text::mix_seed(s, seed_slot::kSftBatch));
    std::vector<ExpertExample> sft_batch;
    sft_batch.reserve(cfg.trainer.sft_batch);
    for (std::size_t i = 0; i < cfg.trainer.sft_batch; ++i) sft_batch.push_back(sft_data[sft_rng() % sft_data.size()]);

    std::mt19937_64 prompt_rng(text::mix_seed(s, seed_slot::kPrompts));
    std::vector<RolloutGroup> groups;
    groups.reserve(cfg.trainer.prompts_per_step);
    for (std::size_t i = 0; i < cfg.trainer.prompts_per_step; ++i) {
      const auto& task = rl_prompts[prompt_rng() % rl_prompts.size()];
      groups.push_back(rollout(task, policy, state.params, cfg, scorer,
                               text::mix_seed(s, seed_slot::kCompletionBase + i)));
    }

    std::vector<RolloutSequence> rl_batch;
    double reward_sum = 0.0;
    for (const auto& g : groups) {
      for (std::size_t j = 0; j < g.completions.size(); ++j) {
        const auto& c = g.completions[j];
        rl_batch.push_back({g.task->prompt, c.tokens, c.sample_logprobs, g.advantages[j]});
        reward_sum += c.reward.reward;
      }
    }

    const auto sft = sft_phi_loss(policy, state.params, sft_batch, cfg.trainer.phi_gradient);
    const auto grpo = grpo_loss(policy, state.params, rl_batch, cfg.loss);
    const auto total = total_loss(sft, grpo, t, cfg.schedule);
    adam_step(state.params, total.grad, state.adam, cfg.optimizer);
    state.step = t;

    StepRecord rec;
    rec.step = t;
    rec.mu = mu(t, cfg.schedule);
    rec.sft_loss = sft.value;
    rec.grpo_loss = grpo.value;
    rec.total_loss = total.value;
    rec.mean_reward = reward_sum / static_cast<double>(rl_batch.size());
    rec.b_rl_sequences = rl_batch.size();
    rec.b_rl_tokens = grpo.tokens;
    result.log.push_back(rec);
    if (observer) observer(rec, groups);

    if (!out_dir.empty() && t % cfg.trainer.checkpoint_every == 0)
      result.checkpoints.push_back(save_checkpoint(out_dir, state));
  }
  result.state = std::move(state);
  return result;
}

template <PolicyContract P>
TrainState initial_state(const P& policy, std::uint64_t seed) {
  TrainState st;
  st.params.assign(policy.num_params(), 0.0);
  st.seed = seed;
  return st;
}

}  // namespace mentra

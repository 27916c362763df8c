#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <set>

#include "mentra/toy_task.hpp"
#include "mentra/trainer.hpp"

using namespace mentra;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mentra-test-" + name + "-" + std::to_string(std::random_device{}()));
  fs::remove_all(dir);
  return dir;
}

TrainingConfig small_config(std::int64_t steps, std::uint64_t seed = 3) {
  TrainingConfig cfg;
  cfg.trainer.total_steps = steps;
  cfg.trainer.sft_batch = 8;
  cfg.trainer.rollout_k = 4;
  cfg.trainer.prompts_per_step = 3;
  cfg.trainer.seed = seed;
  cfg.optimizer.learning_rate = 0.05;
  return cfg;
}

// Forwards to a ToyPolicy and counts sample() calls.
class CountingPolicy {
 public:
  explicit CountingPolicy(ToyPolicyConfig c) : inner_(std::move(c)) {}
  std::size_t num_params() const { return inner_.num_params(); }
  TokenLogProb log_prob(std::span<const double> p, std::string_view prompt, std::span<const TokenId> t,
                        std::size_t pos) const {
    return inner_.log_prob(p, prompt, t, pos);
  }
  Completion sample(std::span<const double> p, std::string_view prompt, double temp, std::uint64_t seed) const {
    ++samples;
    return inner_.sample(p, prompt, temp, seed);
  }
  std::string detokenize(std::span<const TokenId> t) const { return inner_.detokenize(t); }

  mutable std::atomic<std::size_t> samples{0};

 private:
  ToyPolicy inner_;
};

static_assert(PolicyContract<CountingPolicy>);

}  // namespace

TEST(CopyTask, PromptsLandInDistinctBuckets) {
  for (std::size_t n : {2u, 4u, 8u}) {
    const auto task = toy::make_copy_task(n);
    const ToyPolicy policy(task.policy);
    std::set<std::size_t> buckets;
    for (const auto& p : task.rl_prompts) buckets.insert(policy.prompt_bucket(p.prompt));
    EXPECT_EQ(buckets.size(), n);
  }
}

TEST(CopyTask, ExpertSolutionEarnsFullReward) {
  const auto task = toy::make_copy_task(4);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  for (std::size_t i = 0; i < task.sft_data.size(); ++i) {
    const auto text = policy.detokenize(task.sft_data[i].tokens);
    EXPECT_EQ(compute_reward(text, task.rl_prompts[i], {}, judge).reward, 1.0) << text;
  }
}

TEST(Trainer, SameSeedIsBitwiseReproducible) {
  const auto task = toy::make_copy_task(4);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  const auto cfg = small_config(25);
  const auto a = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));
  const auto b = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));
  ASSERT_EQ(a.log.size(), 25u);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.state.params, b.state.params);

  auto other = cfg;
  other.trainer.seed = 4;
  const auto c = run_training(other, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 4));
  EXPECT_NE(a.state.params, c.state.params);
}

TEST(Trainer, CheckpointsEveryTenStepsAndResumeMatches) {
  const auto task = toy::make_copy_task(4);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  const auto dir = fresh_dir("ckpt");
  auto cfg = small_config(35);
  cfg.trainer.output_dir = dir;
  const auto full = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));

  std::vector<fs::path> expected;
  for (int s : {0, 10, 20, 30}) expected.push_back(checkpoint_path(dir, s));
  EXPECT_EQ(full.checkpoints, expected);
  for (const auto& p : expected) {
    EXPECT_TRUE(fs::exists(p / "meta.json"));
    EXPECT_TRUE(fs::exists(p / "tensors.bin"));
  }

  const auto st = load_checkpoint(checkpoint_path(dir, 20));
  EXPECT_EQ(st.step, 20);
  EXPECT_EQ(st.seed, 3u);
  const auto resumed = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, st);
  ASSERT_EQ(resumed.log.size(), 15u);
  EXPECT_TRUE(std::equal(resumed.log.begin(), resumed.log.end(), full.log.begin() + 20));
  EXPECT_EQ(resumed.state.params, full.state.params);
  EXPECT_EQ(resumed.state.adam.m, full.state.adam.m);
  EXPECT_EQ(resumed.state.adam.v, full.state.adam.v);
  fs::remove_all(dir);
}

TEST(Trainer, CheckpointRoundTripIsExact) {
  const auto dir = fresh_dir("roundtrip");
  TrainState st;
  st.step = 7;
  st.seed = 11;
  st.params = {0.1, -2.5, 1e-300, 3.0};
  st.adam.m = {1, 2, 3, 4};
  st.adam.v = {5, 6, 7, 8};
  st.adam.step = 7;
  const auto p = save_checkpoint(dir, st);
  const auto back = load_checkpoint(p);
  EXPECT_EQ(back.params, st.params);
  EXPECT_EQ(back.adam.m, st.adam.m);
  EXPECT_EQ(back.adam.v, st.adam.v);
  EXPECT_EQ(back.adam.step, 7);
  EXPECT_EQ(back.step, 7);
  EXPECT_EQ(back.seed, 11u);
  fs::resize_file(p / "tensors.bin", 8);
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CheckpointReadFailure);
  }
  fs::remove_all(dir);
}

TEST(Trainer, RolloutCountIsPromptsTimesK) {
  const auto task = toy::make_copy_task(4);
  const CountingPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  const auto cfg = small_config(6);
  std::size_t groups_seen = 0;
  const auto res = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3),
                                [&](const StepRecord& r, std::span<const RolloutGroup> g) {
                                  groups_seen += g.size();
                                  EXPECT_EQ(r.b_rl_sequences, 12u);
                                  for (const auto& grp : g) EXPECT_EQ(grp.completions.size(), 4u);
                                });
  EXPECT_EQ(policy.samples.load(), 6u * 3u * 4u);
  EXPECT_EQ(groups_seen, 18u);
  EXPECT_EQ(res.log.size(), 6u);
}

TEST(Trainer, ScheduleIsRecordedPerStep) {
  const auto task = toy::make_copy_task(2);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  auto cfg = small_config(5);
  const auto res = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));
  for (const auto& r : res.log) {
    EXPECT_DOUBLE_EQ(r.mu, mu(r.step, cfg.schedule));
    EXPECT_DOUBLE_EQ(r.total_loss, total_loss(r.sft_loss, r.grpo_loss, r.step, cfg.schedule));
    EXPECT_GE(r.mean_reward, 0.0);
    EXPECT_LE(r.mean_reward, 1.0);
  }
}

TEST(Trainer, LearnsTheCopyTask) {
  const auto task = toy::make_copy_task(4);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  auto cfg = small_config(400);
  cfg.trainer.sft_batch = 16;
  cfg.trainer.rollout_k = 8;
  cfg.trainer.prompts_per_step = 4;
  const auto res = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) {
    early += res.log[static_cast<std::size_t>(i)].mean_reward / 10.0;
    late += res.log[res.log.size() - 1 - static_cast<std::size_t>(i)].mean_reward / 10.0;
  }
  EXPECT_LE(early, 0.3);
  EXPECT_GE(late, 0.9);
}

TEST(Trainer, RejectsBadInputs) {
  const auto task = toy::make_copy_task(2);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;
  auto expect_code = [](Errc code, auto&& fn) {
    try {
      fn();
      ADD_FAILURE() << "expected " << to_string(code);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  auto cfg = small_config(3);
  expect_code(Errc::DatasetEmpty, [&] {
    run_training(cfg, std::span<const ExpertExample>{}, task.rl_prompts, policy, judge, initial_state(policy, 3));
  });
  expect_code(Errc::DatasetEmpty, [&] {
    run_training(cfg, task.sft_data, std::span<const TaskSpec>{}, policy, judge, initial_state(policy, 3));
  });
  expect_code(Errc::ShapeMismatch, [&] {
    TrainState st;
    st.params.assign(3, 0.0);
    run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, st);
  });
  expect_code(Errc::ConfigError, [&] {
    auto st = initial_state(policy, 9);
    st.step = 1;
    run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, st);
  });
  auto bad = cfg;
  bad.trainer.rollout_k = 0;
  expect_code(Errc::ConfigError, [&] {
    run_training(bad, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, 3));
  });
}

TEST(TrainLog, RoundTrip) {
  const auto dir = fresh_dir("log");
  fs::create_directories(dir);
  std::vector<StepRecord> log(3);
  for (std::size_t i = 0; i < 3; ++i) {
    log[i].step = static_cast<std::int64_t>(i + 1);
    log[i].total_loss = 0.1 * static_cast<double>(i);
    log[i].mean_reward = 1.0 / 3.0;
  }
  write_train_log(dir / "log.jsonl", log);
  EXPECT_EQ(read_train_log(dir / "log.jsonl"), log);
  fs::remove_all(dir);
}

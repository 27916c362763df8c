// Trains the toy policy on the 4-label copy task and prints a short reward
// curve. Usage: demo_train_copy_task [steps] [seed] [out_dir]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "mentra/mentra.hpp"

int main(int argc, char** argv) {
  using namespace mentra;
  const std::int64_t steps = argc > 1 ? std::atoll(argv[1]) : 400;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

  const auto task = toy::make_copy_task(4);
  const ToyPolicy policy(task.policy);
  AlwaysConsistentJudge judge;

  auto cfg = EngineConfig{}.training();
  cfg.trainer.total_steps = steps;
  cfg.trainer.seed = seed;
  cfg.optimizer.learning_rate = 0.05;
  if (argc > 3) cfg.trainer.output_dir = argv[3];

  std::printf("%6s %6s %9s %9s %9s %7s\n", "step", "mu", "sft", "grpo", "total", "reward");
  const auto every = std::max<std::int64_t>(1, steps / 20);
  const auto result = run_training(cfg, task.sft_data, task.rl_prompts, policy, judge, initial_state(policy, seed),
                                   [&](const StepRecord& r, auto) {
                                     if (r.step % every == 0 || r.step == 1)
                                       std::printf("%6lld %6.3f %9.4f %9.4f %9.4f %7.3f\n",
                                                   static_cast<long long>(r.step), r.mu, r.sft_loss, r.grpo_loss,
                                                   r.total_loss, r.mean_reward);
                                   });
  std::printf("done: %zu steps, %zu checkpoints\n", result.log.size(), result.checkpoints.size());
  return 0;
}

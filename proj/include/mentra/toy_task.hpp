#pragma once

// Synthetic copy task used by train-toy and the end-to-end tests. The
// prompt names a label; the correct completion is a structured trajectory
// whose answer is that label:
//
//   <think>
//   ###Analysis
//   the label is C
//   ###Final Conclusion
//   the label is C
//   </think>
//   <answer>
//   Answer: C
//   </answer>

#include <string>
#include <vector>

#include "mentra/optimizer.hpp"
#include "mentra/policy.hpp"
#include "mentra/task.hpp"

namespace mentra::toy {

struct CopyTask {
  ToyPolicyConfig policy;
  std::vector<ExpertExample> sft_data;
  std::vector<TaskSpec> rl_prompts;
};

inline std::vector<std::string> copy_task_labels(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, static_cast<char>('A' + i)));
  return labels;
}

inline std::string copy_task_prompt(const std::string& label) { return "Copy the label: " + label; }

inline std::vector<std::string> copy_task_solution(const std::string& label) {
  return {"<think>", "###Analysis", "the", "label", "is", label, "###Final Conclusion", "the", "label",
          "is",      label,         "</think>", "<answer>", "Answer:", label, "</answer>"};
}

/// num_labels in [1, 26]. prompt_buckets is chosen so that the prompts of
/// the task land in distinct buckets (checked by the unit tests).
inline CopyTask make_copy_task(std::size_t num_labels = 4, std::size_t prompt_buckets = 16) {
  CopyTask task;
  const auto labels = copy_task_labels(num_labels);
  task.policy.vocab = {"<think>", "</think>", "<answer>", "</answer>", "###Analysis", "###Final Conclusion",
                       "Answer:", "the",      "label",    "is"};
  for (const auto& l : labels) task.policy.vocab.push_back(l);
  task.policy.prompt_buckets = prompt_buckets;
  task.policy.max_len = copy_task_solution(labels.front()).size();
  task.policy.condition_on_previous = false;

  const ToyPolicy policy(task.policy);
  for (const auto& l : labels) {
    const auto prompt = copy_task_prompt(l);
    task.sft_data.push_back({prompt, policy.encode(copy_task_solution(l))});
    TaskSpec spec;
    spec.id = "copy-" + l;
    spec.kind = TaskKind::SingleChoice;
    spec.prompt = prompt;
    spec.options = labels;
    spec.gold = SingleLabel{l};
    spec.metric = "micro_f1";
    spec.split = "train";
    task.rl_prompts.push_back(std::move(spec));
  }
  return task;
}

}  // namespace mentra::toy

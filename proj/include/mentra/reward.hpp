#pragma once

// Composite gated reward: format gate x length gate x consistency gate x
// task quality. Gates are evaluated in that order and evaluation stops at
// the first zero gate.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra {

// ---------------------------------------------------------------------------
// Consistency judge
// ---------------------------------------------------------------------------

struct JudgeRequest {
  std::string prompt;
  std::string trajectory_text;
};

struct JudgeVerdict {
  bool consistent = true;
  std::string rationale;
};

class ConsistencyJudge {
 public:
  virtual ~ConsistencyJudge() = default;
  virtual JudgeVerdict judge(const JudgeRequest& req) = 0;
};

class AlwaysConsistentJudge final : public ConsistencyJudge {
 public:
  JudgeVerdict judge(const JudgeRequest&) override { return {true, "mock: always consistent"}; }
};

/// Flags a trajectory as inconsistent when its text contains any of the
/// configured markers (case-insensitive).
class MarkerJudge final : public ConsistencyJudge {
 public:
  explicit MarkerJudge(std::vector<std::string> markers) {
    for (auto& m : markers) markers_.push_back(text::to_lower(m));
  }

  JudgeVerdict judge(const JudgeRequest& req) override {
    const auto lowered = text::to_lower(req.trajectory_text);
    for (const auto& m : markers_)
      if (lowered.find(m) != std::string::npos) return {false, "mock: found marker '" + m + "'"};
    return {true, "mock: no contradiction markers"};
  }

 private:
  std::vector<std::string> markers_;
};

/// Deterministic pseudo-random verdicts: the outcome is a hash of
/// (seed, prompt, text), so identical requests always agree.
class SeededJudge final : public ConsistencyJudge {
 public:
  SeededJudge(double p_inconsistent, std::uint64_t seed) : p_(p_inconsistent), seed_(seed) {}

  JudgeVerdict judge(const JudgeRequest& req) override {
    const auto h = text::mix_seed(seed_, text::fnv1a(req.trajectory_text, text::fnv1a(req.prompt)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < p_ ? JudgeVerdict{false, "mock: seeded inconsistency"} : JudgeVerdict{true, "mock: seeded pass"};
  }

 private:
  double p_;
  std::uint64_t seed_;
};

/// Memoizes verdicts of an inner judge by request content.
class CachingJudge final : public ConsistencyJudge {
 public:
  explicit CachingJudge(ConsistencyJudge& inner) : inner_(inner) {}

  JudgeVerdict judge(const JudgeRequest& req) override {
    const auto key = req.prompt + '\x1f' + req.trajectory_text;
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto verdict = inner_.judge(req);
    std::lock_guard lock(mu_);
    cache_.emplace(key, verdict);
    return verdict;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  ConsistencyJudge& inner_;
  mutable std::mutex mu_;
  std::map<std::string, JudgeVerdict> cache_;
};

// ---------------------------------------------------------------------------
// Quality scorers
// ---------------------------------------------------------------------------

inline double score_single_choice(std::string_view answer, std::string_view gold) {
  return normalize_label(answer) == normalize_label(gold) ? 1.0 : 0.0;
}

/// Jaccard similarity |Y n Y*| / |Y u Y*|. Defined as 0 when both are empty;
/// gold sets are never empty for valid tasks.
inline double score_multi_choice(const std::set<std::string>& answer, const std::set<std::string>& gold) {
  std::size_t inter = 0;
  for (const auto& a : answer) inter += gold.count(a);
  const std::size_t uni = answer.size() + gold.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

using PointMatcher = std::function<bool(std::string_view response, std::string_view point)>;

/// Case-folded substring containment after punctuation stripping.
inline bool substring_point_matcher(std::string_view response, std::string_view point) {
  const auto p = text::fold_for_matching(point);
  if (p.empty()) return false;
  return text::fold_for_matching(response).find(p) != std::string::npos;
}

inline double score_short_answer(std::string_view response, const std::vector<std::string>& points,
                                 const PointMatcher& matcher = substring_point_matcher) {
  if (points.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : points) hits += matcher(response, p) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

/// Quality of an extracted answer against the gold answer of the task.
inline double score_answer(const AnswerValue& answer, const TaskSpec& task,
                           const PointMatcher& matcher = substring_point_matcher) {
  switch (task.kind) {
    case TaskKind::SingleChoice: {
      const auto* a = std::get_if<SingleLabel>(&answer);
      const auto* g = std::get_if<SingleLabel>(&task.gold);
      if (!a || !g) throw Error(Errc::KindMismatch, "single_choice needs single labels");
      return score_single_choice(a->value, g->value);
    }
    case TaskKind::MultiChoice: {
      const auto* a = std::get_if<LabelSet>(&answer);
      const auto* g = std::get_if<LabelSet>(&task.gold);
      if (!a || !g) throw Error(Errc::KindMismatch, "multi_choice needs label sets");
      return score_multi_choice(a->values, g->values);
    }
    case TaskKind::ShortAnswer: {
      const auto* a = std::get_if<FreeText>(&answer);
      const auto* g = std::get_if<ScoringPoints>(&task.gold);
      if (!a || !g) throw Error(Errc::KindMismatch, "short_answer needs free text and scoring points");
      return score_short_answer(a->value, g->points, matcher);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Composite reward
// ---------------------------------------------------------------------------

/// Components left unset were skipped by short-circuit evaluation.
struct RewardBreakdown {
  std::optional<int> format_gate;
  std::optional<int> length_gate;
  std::optional<int> consistency_gate;
  std::optional<double> quality;
  double reward = 0.0;

  std::size_t think_tokens = 0;
  std::vector<Violation> violations;
  std::string judge_rationale;
  // The conclusion section does not mention the answer-phase label(s).
  bool conclusion_mismatch = false;
  bool answer_unparsable = false;
};

struct RewardOptions {
  TokenizationMode tokenization = TokenizationMode::Whitespace;
  std::optional<std::size_t> generator_token_count;
  PointMatcher matcher = substring_point_matcher;
};

namespace detail {

inline bool conclusion_mentions(std::string_view conclusion, const std::string& label) {
  const auto folded = " " + text::fold_for_matching(conclusion) + " ";
  return folded.find(" " + text::fold_for_matching(label) + " ") != std::string::npos;
}

}  // namespace detail

inline RewardBreakdown compute_reward(std::string_view raw, const TaskSpec& task, const FormatConfig& cfg,
                                      ConsistencyJudge& judge, const RewardOptions& opts = {}) {
  RewardBreakdown b;
  auto parsed = try_parse_trajectory(raw, cfg);
  if (!parsed.ok()) {
    b.format_gate = 0;
    b.violations.push_back(*parsed.error);
    return b;
  }
  const auto& p = *parsed.value;
  b.think_tokens = count_think_tokens(p, opts.tokenization, opts.generator_token_count);
  auto report = validate(p, cfg, b.think_tokens);
  b.violations = report.violations;
  b.format_gate = report.format_valid ? 1 : 0;
  if (!report.format_valid) return b;
  b.length_gate = report.length_valid ? 1 : 0;
  if (!report.length_valid) return b;

  auto verdict = judge.judge(JudgeRequest{task.prompt, std::string(raw)});
  b.judge_rationale = std::move(verdict.rationale);
  b.consistency_gate = verdict.consistent ? 1 : 0;
  if (!verdict.consistent) return b;

  try {
    const auto answer = extract_answer(p, task.kind);
    b.quality = std::clamp(score_answer(answer, task, opts.matcher), 0.0, 1.0);
    if (const auto* s = std::get_if<SingleLabel>(&answer)) {
      b.conclusion_mismatch = !detail::conclusion_mentions(p.final_conclusion, s->value);
    } else if (const auto* m = std::get_if<LabelSet>(&answer)) {
      for (const auto& l : m->values)
        if (!detail::conclusion_mentions(p.final_conclusion, l)) b.conclusion_mismatch = true;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::UnparsableAnswer) throw;
    b.answer_unparsable = true;
    b.quality = 0.0;
  }
  b.reward = *b.format_gate * *b.length_gate * *b.consistency_gate * *b.quality;
  return b;
}

}  // namespace mentra

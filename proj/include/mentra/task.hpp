#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/text.hpp"

namespace mentra {

enum class TaskKind { SingleChoice, MultiChoice, ShortAnswer };

constexpr std::string_view to_string(TaskKind k) noexcept {
  switch (k) {
    case TaskKind::SingleChoice: return "single_choice";
    case TaskKind::MultiChoice: return "multi_choice";
    case TaskKind::ShortAnswer: return "short_answer";
  }
  return "unknown";
}

inline TaskKind task_kind_from_string(std::string_view s) {
  if (s == "single_choice" || s == "single") return TaskKind::SingleChoice;
  if (s == "multi_choice" || s == "multi") return TaskKind::MultiChoice;
  if (s == "short_answer" || s == "short") return TaskKind::ShortAnswer;
  throw Error(Errc::DatasetError, "unknown task kind '" + std::string(s) + "'");
}

/// Canonical form of a choice label: trimmed, surrounding punctuation
/// stripped, upper-cased. "(b)." and " B " both normalize to "B".
inline std::string normalize_label(std::string_view raw) {
  auto s = text::trim(raw);
  while (!s.empty() && (text::is_punct(s.front()) || text::is_space(s.front()))) s.remove_prefix(1);
  while (!s.empty() && (text::is_punct(s.back()) || text::is_space(s.back()))) s.remove_suffix(1);
  return text::to_upper(s);
}

/// Label of an option entry: "A. Depression" and "(A) Depression" give "A";
/// a bare "a" gives "A".
inline std::string option_label(std::string_view option) {
  auto s = text::trim(option);
  if (!s.empty() && s.front() == '(') s.remove_prefix(1);
  std::size_t n = 0;
  while (n < s.size() && n < 3 && std::isalnum(static_cast<unsigned char>(s[n]))) ++n;
  if (n > 0 && n < s.size() && (s[n] == '.' || s[n] == ')' || s[n] == ':')) return text::to_upper(s.substr(0, n));
  return normalize_label(option);
}

struct SingleLabel {
  std::string value;
  friend bool operator==(const SingleLabel&, const SingleLabel&) = default;
};

struct LabelSet {
  std::set<std::string> values;
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

struct FreeText {
  std::string value;
  friend bool operator==(const FreeText&, const FreeText&) = default;
};

struct ScoringPoints {
  std::vector<std::string> points;
  friend bool operator==(const ScoringPoints&, const ScoringPoints&) = default;
};

using AnswerValue = std::variant<SingleLabel, LabelSet, FreeText>;
using GoldAnswer = std::variant<SingleLabel, LabelSet, ScoringPoints>;

struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::SingleChoice;
  std::string prompt;
  std::vector<std::string> options;  // empty when the task has no option list
  GoldAnswer gold;
  std::string metric;
  std::string split;
};

/// Throws DatasetError when the gold answer does not fit the task kind.
inline void check_task(const TaskSpec& task) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::DatasetError, "task '" + task.id + "': " + why);
  };
  auto in_options = [&](const std::string& label) {
    if (task.options.empty()) return true;
    for (const auto& o : task.options)
      if (option_label(o) == label) return true;
    return false;
  };
  switch (task.kind) {
    case TaskKind::SingleChoice: {
      const auto* g = std::get_if<SingleLabel>(&task.gold);
      if (g == nullptr || g->value.empty()) fail("single_choice gold must be one label");
      if (!in_options(g->value)) fail("gold label '" + g->value + "' not among options");
      break;
    }
    case TaskKind::MultiChoice: {
      const auto* g = std::get_if<LabelSet>(&task.gold);
      if (g == nullptr || g->values.empty()) fail("multi_choice gold must be a non-empty label set");
      for (const auto& l : g->values)
        if (!in_options(l)) fail("gold label '" + l + "' not among options");
      break;
    }
    case TaskKind::ShortAnswer: {
      const auto* g = std::get_if<ScoringPoints>(&task.gold);
      if (g == nullptr || g->points.empty()) fail("short_answer gold needs at least one scoring point");
      break;
    }
  }
}

}  // namespace mentra

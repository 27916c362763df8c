#pragma once

// Line-delimited JSON readers and writers.
//
// Task record:       {"id", "task_kind", "prompt", "options"?, "gold", "metric", "split"}
//                    gold: "B" | ["A", "C"] | {"scoring_points": ["...", ...]}
// Prediction record: {"id", "prediction"} where prediction is a label, a label
//                    list or free text; or {"id", "trajectory"} holding a raw
//                    structured response whose answer is extracted.
// Rubric record:     {"annotator", "case_id", "scores": [R1, R2, R3, R4, R5]}

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mentra/error.hpp"
#include "mentra/eval.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra {

/// Calls `fn(json, line_no)` for every non-blank line.
inline void for_each_jsonl(std::istream& in, const std::string& source,
                           const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (text::is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::DatasetError, source + ":" + std::to_string(no) + ": " + e.what());
    }
    fn(j, no);
  }
}

inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  for_each_jsonl(in, path.string(), fn);
}

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

inline TaskSpec task_from_json(const nlohmann::json& j) {
  auto fail = [&](const std::string& why) -> TaskSpec { throw Error(Errc::DatasetError, why); };
  if (!j.is_object()) return fail("task record must be an object");
  try {
    TaskSpec t;
    t.id = j.at("id").get<std::string>();
    t.kind = task_kind_from_string(j.at("task_kind").get<std::string>());
    t.prompt = j.at("prompt").get<std::string>();
    if (j.contains("options")) t.options = j.at("options").get<std::vector<std::string>>();
    const auto& g = j.at("gold");
    if (g.is_string()) {
      t.gold = SingleLabel{normalize_label(g.get<std::string>())};
    } else if (g.is_array()) {
      LabelSet s;
      for (const auto& l : g) s.values.insert(normalize_label(l.get<std::string>()));
      t.gold = s;
    } else if (g.is_object() && g.contains("scoring_points")) {
      t.gold = ScoringPoints{g.at("scoring_points").get<std::vector<std::string>>()};
    } else {
      return fail("task '" + t.id + "': gold must be a label, a label list or {\"scoring_points\": [...]}");
    }
    // A single-element list is a legal multi-choice gold.
    if (t.kind == TaskKind::MultiChoice)
      if (const auto* s = std::get_if<SingleLabel>(&t.gold)) t.gold = LabelSet{{s->value}};
    t.metric = j.value("metric", "");
    t.split = j.value("split", "");
    check_task(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("task record: ") + e.what());
  }
}

inline nlohmann::json to_json(const TaskSpec& t) {
  nlohmann::json gold;
  if (const auto* s = std::get_if<SingleLabel>(&t.gold)) gold = s->value;
  else if (const auto* m = std::get_if<LabelSet>(&t.gold)) gold = m->values;
  else gold = {{"scoring_points", std::get<ScoringPoints>(t.gold).points}};
  nlohmann::json j = {{"id", t.id}, {"task_kind", to_string(t.kind)}, {"prompt", t.prompt}, {"gold", gold},
                      {"metric", t.metric}, {"split", t.split}};
  if (!t.options.empty()) j["options"] = t.options;
  return j;
}

inline std::vector<TaskSpec> load_tasks(const std::filesystem::path& path) {
  std::vector<TaskSpec> out;
  std::map<std::string, std::size_t> seen;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t no) {
    try {
      out.push_back(task_from_json(j));
    } catch (const Error& e) {
      throw Error(Errc::DatasetError, path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
    if (!seen.emplace(out.back().id, no).second)
      throw Error(Errc::DatasetError, path.string() + ":" + std::to_string(no) + ": duplicate id '" + out.back().id + "'");
  });
  return out;
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// Predicted answer of one record, interpreted under the task kind.
/// Unparsable answers become an empty label / empty text, which scores 0.
inline AnswerValue prediction_from_json(const nlohmann::json& j, TaskKind kind, const FormatConfig& fmt = {}) {
  auto empty = [&]() -> AnswerValue {
    switch (kind) {
      case TaskKind::SingleChoice: return SingleLabel{};
      case TaskKind::MultiChoice: return LabelSet{};
      case TaskKind::ShortAnswer: return FreeText{};
    }
    return SingleLabel{};
  };
  try {
    if (j.contains("trajectory")) {
      auto parsed = try_parse_trajectory(j.at("trajectory").get<std::string>(), fmt);
      if (!parsed.ok()) return empty();
      return extract_answer(*parsed.value, kind);
    }
    const auto& p = j.at("prediction");
    if (p.is_array()) {
      if (kind != TaskKind::MultiChoice)
        throw Error(Errc::KindMismatch, "label list given for a " + std::string(to_string(kind)) + " task");
      LabelSet s;
      for (const auto& l : p) s.values.insert(normalize_label(l.get<std::string>()));
      return s;
    }
    return answer_from_literal(p.get<std::string>(), kind);
  } catch (const Error& e) {
    if (e.code() == Errc::UnparsableAnswer) return empty();
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::DatasetError, std::string("prediction record: ") + e.what());
  }
}

/// Joins predictions to tasks by id and groups them by (metric, task kind).
/// Tasks without a prediction count as unanswered (empty answer).
struct PredictionGroup {
  eval::MetricKind metric;
  eval::PredictionSet set;
};

inline std::vector<PredictionGroup> join_predictions(std::span<const TaskSpec> tasks,
                                                     const std::filesystem::path& predictions,
                                                     const FormatConfig& fmt = {}) {
  std::map<std::string, const TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;
  std::map<std::string, AnswerValue> answers;
  for_each_jsonl(predictions, [&](const nlohmann::json& j, std::size_t no) {
    const auto where = predictions.string() + ":" + std::to_string(no);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw Error(Errc::DatasetError, where + ": missing id");
    const auto id = j["id"].get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(Errc::AlignmentError, where + ": unknown task id '" + id + "'");
    if (!answers.emplace(id, prediction_from_json(j, it->second->kind, fmt)).second)
      throw Error(Errc::DatasetError, where + ": duplicate prediction for '" + id + "'");
  });

  std::map<std::pair<int, int>, PredictionGroup> groups;
  for (const auto& t : tasks) {
    const auto metric = !t.metric.empty() ? eval::metric_from_string(t.metric)
                        : t.kind == TaskKind::ShortAnswer ? eval::MetricKind::PointRecall
                        : t.kind == TaskKind::MultiChoice ? eval::MetricKind::Jaccard
                                                           : eval::MetricKind::MicroF1;
    auto key = std::make_pair(static_cast<int>(metric), static_cast<int>(t.kind));
    auto& g = groups.try_emplace(key, PredictionGroup{metric, {t.kind, {}}}).first->second;
    auto a = answers.find(t.id);
    AnswerValue predicted = a != answers.end() ? a->second
                            : t.kind == TaskKind::ShortAnswer ? AnswerValue{FreeText{}}
                            : t.kind == TaskKind::MultiChoice ? AnswerValue{LabelSet{}}
                                                              : AnswerValue{SingleLabel{}};
    g.set.items.push_back({t.id, std::move(predicted), t.gold});
  }
  std::vector<PredictionGroup> out;
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  return out;
}

// ---------------------------------------------------------------------------
// Rubric sheets
// ---------------------------------------------------------------------------

/// Reads rubric records; one sheet per annotator, in order of first
/// appearance. Records without an annotator field take `default_annotator`.
inline std::vector<eval::RubricSheet> load_rubric_sheets(const std::filesystem::path& path,
                                                         const std::string& default_annotator = {}) {
  std::vector<eval::RubricSheet> sheets;
  std::map<std::string, std::size_t> index;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t no) {
    const auto where = path.string() + ":" + std::to_string(no);
    try {
      const auto who = j.value("annotator", default_annotator.empty() ? path.stem().string() : default_annotator);
      eval::RubricRow row;
      row.case_id = j.at("case_id").get<std::string>();
      const auto scores = j.at("scores").get<std::vector<int>>();
      if (scores.size() != eval::kRubricDims)
        throw Error(Errc::DatasetError, where + ": expected " + std::to_string(eval::kRubricDims) + " scores");
      std::copy(scores.begin(), scores.end(), row.scores.begin());
      auto [it, fresh] = index.emplace(who, sheets.size());
      if (fresh) sheets.push_back({who, {}});
      sheets[it->second].rows.push_back(row);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::DatasetError, where + ": " + e.what());
    }
  });
  if (sheets.empty()) throw Error(Errc::EmptyInput, path.string() + ": no rubric records");
  return sheets;
}

}  // namespace mentra

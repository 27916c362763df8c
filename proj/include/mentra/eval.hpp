#pragma once

// Benchmark metrics, trajectory rubric aggregation and inter-annotator
// agreement for binary rubric scores.

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/reward.hpp"
#include "mentra/task.hpp"

namespace mentra::eval {

// ---------------------------------------------------------------------------
// Task metrics
// ---------------------------------------------------------------------------

enum class MetricKind { MicroF1, MacroF1, Jaccard, PointRecall };

constexpr std::string_view to_string(MetricKind k) noexcept {
  switch (k) {
    case MetricKind::MicroF1: return "micro_f1";
    case MetricKind::MacroF1: return "macro_f1";
    case MetricKind::Jaccard: return "jaccard";
    case MetricKind::PointRecall: return "point_recall";
  }
  return "unknown";
}

inline MetricKind metric_from_string(std::string_view s) {
  if (s == "micro_f1" || s == "MicroF1") return MetricKind::MicroF1;
  if (s == "macro_f1" || s == "MacroF1") return MetricKind::MacroF1;
  if (s == "jaccard" || s == "Jaccard") return MetricKind::Jaccard;
  if (s == "point_recall" || s == "coverage") return MetricKind::PointRecall;
  throw Error(Errc::ConfigError, "unknown metric '" + std::string(s) + "'");
}

struct PredictionItem {
  std::string id;
  AnswerValue predicted;
  GoldAnswer gold;
};

struct PredictionSet {
  TaskKind kind = TaskKind::SingleChoice;
  std::vector<PredictionItem> items;
};

struct ClassStats {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double f1 = 0.0;
};

struct MetricReport {
  MetricKind metric = MetricKind::MicroF1;
  double value = 0.0;
  std::size_t support = 0;
  std::map<std::string, ClassStats> per_class;
};

namespace detail {

inline std::set<std::string> label_set(const AnswerValue& v) {
  if (const auto* s = std::get_if<SingleLabel>(&v)) {
    if (s->value.empty()) return {};
    return {s->value};
  }
  if (const auto* m = std::get_if<LabelSet>(&v)) return m->values;
  throw Error(Errc::KindMismatch, "free-text prediction where labels were expected");
}

inline std::set<std::string> label_set(const GoldAnswer& v) {
  if (const auto* s = std::get_if<SingleLabel>(&v)) return {s->value};
  if (const auto* m = std::get_if<LabelSet>(&v)) return m->values;
  throw Error(Errc::KindMismatch, "scoring-point gold where labels were expected");
}

inline double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

}  // namespace detail

inline MetricReport compute_metric(MetricKind kind, const PredictionSet& preds) {
  if (preds.items.empty()) throw Error(Errc::EmptyInput, "prediction set is empty");
  {
    std::set<std::string> ids;
    for (const auto& it : preds.items)
      if (!ids.insert(it.id).second) throw Error(Errc::DatasetError, "duplicate prediction id '" + it.id + "'");
  }
  const bool labelled = preds.kind != TaskKind::ShortAnswer;
  if ((kind == MetricKind::PointRecall) == labelled)
    throw Error(Errc::KindMismatch, std::string(to_string(kind)) + " does not apply to " +
                                        std::string(to_string(preds.kind)) + " tasks");

  MetricReport rep;
  rep.metric = kind;
  rep.support = preds.items.size();
  const double n = static_cast<double>(preds.items.size());

  switch (kind) {
    case MetricKind::MicroF1:
    case MetricKind::MacroF1: {
      for (const auto& it : preds.items) {
        const auto p = detail::label_set(it.predicted);
        const auto g = detail::label_set(it.gold);
        for (const auto& l : p) (g.count(l) ? rep.per_class[l].tp : rep.per_class[l].fp)++;
        for (const auto& l : g)
          if (!p.count(l)) rep.per_class[l].fn++;
      }
      std::size_t tp = 0, fp = 0, fn = 0;
      double sum = 0.0;
      for (auto& [label, c] : rep.per_class) {
        c.f1 = detail::f1(c.tp, c.fp, c.fn);
        sum += c.f1;
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
      }
      if (kind == MetricKind::MicroF1) {
        rep.value = detail::f1(tp, fp, fn);
      } else {
        rep.value = rep.per_class.empty() ? 0.0 : sum / static_cast<double>(rep.per_class.size());
      }
      break;
    }
    case MetricKind::Jaccard: {
      double sum = 0.0;
      for (const auto& it : preds.items)
        sum += score_multi_choice(detail::label_set(it.predicted), detail::label_set(it.gold));
      rep.value = sum / n;
      break;
    }
    case MetricKind::PointRecall: {
      double sum = 0.0;
      for (const auto& it : preds.items) {
        const auto* p = std::get_if<FreeText>(&it.predicted);
        const auto* g = std::get_if<ScoringPoints>(&it.gold);
        if (!p || !g) throw Error(Errc::KindMismatch, "point_recall needs free text and scoring points");
        sum += score_short_answer(p->value, g->points);
      }
      rep.value = sum / n;
      break;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rubric
// ---------------------------------------------------------------------------

inline constexpr std::size_t kRubricDims = 5;
inline constexpr std::array<std::string_view, kRubricDims> kRubricNames = {
    "R1", "R2", "R3", "R4", "R5"};
inline constexpr std::array<std::string_view, kRubricDims> kRubricTitles = {
    "Reasoning Conciseness", "Logical Coherence", "No Hallucination", "Task Understanding",
    "Internal Consistency"};

struct RubricRow {
  std::string case_id;
  std::array<int, kRubricDims> scores{};
};

struct RubricSheet {
  std::string annotator;
  std::vector<RubricRow> rows;
};

struct RubricSummary {
  std::array<double, kRubricDims> dims{};
  double r_avg = 0.0;
  std::size_t cases = 0;
  std::size_t annotators = 0;
};

namespace detail {

inline void check_aligned(std::span<const RubricSheet> sheets) {
  if (sheets.empty() || sheets.front().rows.empty()) throw Error(Errc::EmptyInput, "rubric sheet is empty");
  std::vector<std::string> ref;
  for (const auto& r : sheets.front().rows) ref.push_back(r.case_id);
  if (std::set<std::string>(ref.begin(), ref.end()).size() != ref.size())
    throw Error(Errc::AlignmentError, "duplicate case id in sheet of " + sheets.front().annotator);
  for (const auto& s : sheets) {
    if (s.rows.size() != ref.size()) throw Error(Errc::AlignmentError, "sheets cover different numbers of cases");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (s.rows[i].case_id != ref[i])
        throw Error(Errc::AlignmentError, "case '" + s.rows[i].case_id + "' of " + s.annotator +
                                              " does not align with '" + ref[i] + "'");
      for (int v : s.rows[i].scores)
        if (v != 0 && v != 1) throw Error(Errc::DatasetError, "rubric scores must be 0 or 1");
    }
  }
}

}  // namespace detail

/// Mean per dimension over all cases and annotators, plus the grand mean.
inline RubricSummary rubric_average(std::span<const RubricSheet> sheets) {
  detail::check_aligned(sheets);
  RubricSummary out;
  out.annotators = sheets.size();
  out.cases = sheets.front().rows.size();
  const double n = static_cast<double>(out.annotators * out.cases);
  for (std::size_t d = 0; d < kRubricDims; ++d) {
    std::size_t ones = 0;
    for (const auto& s : sheets)
      for (const auto& r : s.rows) ones += static_cast<std::size_t>(r.scores[d]);
    out.dims[d] = static_cast<double>(ones) / n;
  }
  double sum = 0.0;
  for (double v : out.dims) sum += v;
  out.r_avg = sum / static_cast<double>(kRubricDims);
  return out;
}

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

enum class AgreementKind { GwetAC1, CohenKappa, Percent };

/// 2x2 contingency counts of two raters over binary ratings.
struct BinaryTable {
  std::size_t both_one = 0;   // a
  std::size_t first_only = 0; // b: rater 1 says 1, rater 2 says 0
  std::size_t second_only = 0;// c
  std::size_t both_zero = 0;  // d

  std::size_t total() const noexcept { return both_one + first_only + second_only + both_zero; }
};

inline BinaryTable tabulate(std::span<const std::pair<int, int>> ratings) {
  BinaryTable t;
  for (auto [x, y] : ratings) {
    if ((x != 0 && x != 1) || (y != 0 && y != 1)) throw Error(Errc::DatasetError, "ratings must be 0 or 1");
    if (x == 1 && y == 1) ++t.both_one;
    else if (x == 1) ++t.first_only;
    else if (y == 1) ++t.second_only;
    else ++t.both_zero;
  }
  return t;
}

/// Percent agreement, Cohen's kappa, or Gwet's AC1 for two raters.
///   kappa: (p_o - p_e) / (1 - p_e), p_e = p1 q1 + (1-p1)(1-q1)
///   AC1:   (p_o - g_e) / (1 - g_e), g_e = 2 pi (1 - pi), pi = (p1 + q1) / 2
/// Kappa is undefined when both raters are constant; that returns 1 when the
/// constants match (p_o = 1) and 0 otherwise.
inline double agreement(const BinaryTable& t, AgreementKind kind) {
  const auto n_count = t.total();
  if (n_count < 2) throw Error(Errc::EmptyInput, "agreement needs at least two paired ratings");
  const double n = static_cast<double>(n_count);
  const double po = static_cast<double>(t.both_one + t.both_zero) / n;
  const double p1 = static_cast<double>(t.both_one + t.first_only) / n;   // rater 1 prevalence of 1
  const double q1 = static_cast<double>(t.both_one + t.second_only) / n;  // rater 2 prevalence of 1
  switch (kind) {
    case AgreementKind::Percent:
      return po;
    case AgreementKind::CohenKappa: {
      const double pe = p1 * q1 + (1.0 - p1) * (1.0 - q1);
      if (1.0 - pe == 0.0) return po == 1.0 ? 1.0 : 0.0;
      return (po - pe) / (1.0 - pe);
    }
    case AgreementKind::GwetAC1: {
      const double pi = (p1 + q1) / 2.0;
      const double ge = 2.0 * pi * (1.0 - pi);
      return (po - ge) / (1.0 - ge);
    }
  }
  return 0.0;
}

inline double agreement(std::span<const std::pair<int, int>> ratings, AgreementKind kind) {
  return agreement(tabulate(ratings), kind);
}

struct AgreementRow {
  std::array<double, kRubricDims> ac1{};
  std::array<double, kRubricDims> kappa{};
  std::array<double, kRubricDims> percent{};
};

/// Per-dimension agreement between two aligned rubric sheets.
inline AgreementRow rubric_agreement(const RubricSheet& first, const RubricSheet& second) {
  const std::array<RubricSheet, 2> pair{first, second};
  detail::check_aligned(pair);
  AgreementRow out;
  for (std::size_t d = 0; d < kRubricDims; ++d) {
    std::vector<std::pair<int, int>> ratings;
    for (std::size_t i = 0; i < first.rows.size(); ++i)
      ratings.emplace_back(first.rows[i].scores[d], second.rows[i].scores[d]);
    const auto table = tabulate(ratings);
    out.ac1[d] = agreement(table, AgreementKind::GwetAC1);
    out.kappa[d] = agreement(table, AgreementKind::CohenKappa);
    out.percent[d] = agreement(table, AgreementKind::Percent);
  }
  return out;
}

}  // namespace mentra::eval

#pragma once

// Plain-text and CSV table rendering for metric, agreement and training
// reports.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "mentra/eval.hpp"

namespace mentra::report {

using Row = std::vector<std::string>;

inline std::string fixed(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// Columns padded to their widest cell; first column left-aligned, the rest
/// right-aligned.
inline std::string render_table(const Row& header, const std::vector<Row>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto widen = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  widen(header);
  for (const auto& r : rows) widen(r);

  auto line = [&](const Row& r) {
    std::string out;
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      const std::string pad(width[i] - cell.size(), ' ');
      if (i) out += "  ";
      out += i == 0 ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string render_csv(const Row& header, const std::vector<Row>& rows) {
  auto line = [](const Row& r) {
    std::string out;
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_cell(r[i]);
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

/// Agreement statistics laid out one statistic per row, one rubric
/// dimension per column, with the mean across dimensions last.
inline std::pair<Row, std::vector<Row>> agreement_rows(const eval::AgreementRow& a, int precision = 3) {
  Row header{"Metric"};
  for (auto n : eval::kRubricNames) header.emplace_back(n);
  header.emplace_back("Avg");
  auto row = [&](const char* name, const std::array<double, eval::kRubricDims>& v) {
    Row r{name};
    double sum = 0.0;
    for (double x : v) {
      r.push_back(fixed(x, precision));
      sum += x;
    }
    r.push_back(fixed(sum / static_cast<double>(v.size()), precision));
    return r;
  };
  return {header, {row("Gwet AC1", a.ac1), row("Cohen's Kappa", a.kappa), row("Consistency", a.percent)}};
}

inline std::pair<Row, std::vector<Row>> rubric_rows(const eval::RubricSummary& s, const std::string& label,
                                                    int precision = 3) {
  Row header{"Model"};
  for (auto n : eval::kRubricNames) header.emplace_back(n);
  header.emplace_back("R_avg");
  Row r{label};
  for (double x : s.dims) r.push_back(fixed(x, precision));
  r.push_back(fixed(s.r_avg, precision));
  return {header, {r}};
}

}  // namespace mentra::report

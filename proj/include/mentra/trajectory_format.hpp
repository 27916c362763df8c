#pragma once

// Structured reasoning trajectory grammar.
//
//   <think>
//   ###Symptom Analysis
//   ...
//   ###Final Conclusion
//   ...
//   </think>
//   <answer>
//   ...
//   Answer: B
//   </answer>
//
// The think block is split into subtitle sections (lines starting with
// "###"); the last section must carry the conclusion marker. The answer
// block must end with a line starting with the answer prefix. Parsing is
// total: every input yields a ParsedTrajectory or exactly one coded error.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"

namespace mentra {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kSubtitleMark = "###";

struct FormatConfig {
  std::size_t min_think_tokens = 10;
  std::size_t max_think_tokens = 2048;
  std::string conclusion_marker = "Final Conclusion";
  std::string answer_prefix = "Answer:";
  // Strict mode rejects any text outside the two tag pairs. When set,
  // leading/trailing whitespace around the whole text is tolerated.
  bool allow_surrounding_whitespace = false;

  void check() const {
    if (!(0 < min_think_tokens && min_think_tokens < max_think_tokens))
      throw Error(Errc::ConfigError, "format: require 0 < min_think_tokens < max_think_tokens");
    if (text::is_blank(conclusion_marker))
      throw Error(Errc::ConfigError, "format: conclusion_marker must be non-empty");
    if (text::is_blank(answer_prefix))
      throw Error(Errc::ConfigError, "format: answer_prefix must be non-empty");
  }
};

struct Section {
  std::string subtitle;
  std::string body;
  friend bool operator==(const Section&, const Section&) = default;
};

struct ParsedTrajectory {
  std::vector<Section> think_sections;  // includes the conclusion section, last
  std::string final_conclusion;
  std::string answer_phase;
  std::string answer_literal;
  friend bool operator==(const ParsedTrajectory&, const ParsedTrajectory&) = default;
};

struct Violation {
  Errc code;
  std::string message;
};

struct ValidationReport {
  bool format_valid = false;
  bool length_valid = false;
  std::size_t token_count = 0;
  std::vector<Violation> violations;
};

enum class TokenizationMode { Whitespace, GeneratorReported };

inline bool is_format_code(Errc code) noexcept { return code != Errc::LengthOutOfRange; }

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

inline bool equals_ci(std::string_view a, std::string_view b) {
  return a.size() == b.size() && text::starts_with_ci(a, b);
}

inline bool contains_tag(std::string_view s) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose})
    if (s.find(tag) != std::string_view::npos) return true;
  return false;
}

inline bool is_subtitle_line(std::string_view line) {
  return text::trim(line).substr(0, kSubtitleMark.size()) == kSubtitleMark;
}

}  // namespace detail

struct ParseOutcome {
  std::optional<ParsedTrajectory> value;
  std::optional<Violation> error;

  bool ok() const noexcept { return value.has_value(); }
};

/// Non-throwing parse. Exactly one of value/error is set.
inline ParseOutcome try_parse_trajectory(std::string_view raw, const FormatConfig& cfg) {
  auto fail = [](Errc code, std::string msg) {
    return ParseOutcome{std::nullopt, Violation{code, std::move(msg)}};
  };

  const auto n_think_open = detail::count_occurrences(raw, kThinkOpen);
  const auto n_think_close = detail::count_occurrences(raw, kThinkClose);
  if (n_think_open == 0 || n_think_close == 0)
    return fail(Errc::MissingThinkBlock, "no <think>...</think> block");
  const auto n_answer_open = detail::count_occurrences(raw, kAnswerOpen);
  const auto n_answer_close = detail::count_occurrences(raw, kAnswerClose);
  if (n_answer_open == 0 || n_answer_close == 0)
    return fail(Errc::MissingAnswerBlock, "no <answer>...</answer> block");
  if (n_think_open > 1 || n_think_close > 1 || n_answer_open > 1 || n_answer_close > 1)
    return fail(Errc::TagOrderViolation, "each tag must appear exactly once");

  const auto p_think_open = raw.find(kThinkOpen);
  const auto p_think_close = raw.find(kThinkClose);
  const auto p_answer_open = raw.find(kAnswerOpen);
  const auto p_answer_close = raw.find(kAnswerClose);
  if (!(p_think_open < p_think_close && p_think_close < p_answer_open && p_answer_open < p_answer_close))
    return fail(Errc::TagOrderViolation, "tags must appear as <think></think><answer></answer>");

  const auto prefix = raw.substr(0, p_think_open);
  const auto between = raw.substr(p_think_close + kThinkClose.size(),
                                  p_answer_open - p_think_close - kThinkClose.size());
  const auto suffix = raw.substr(p_answer_close + kAnswerClose.size());
  const bool surround_ok = cfg.allow_surrounding_whitespace
                               ? text::is_blank(prefix) && text::is_blank(suffix)
                               : prefix.empty() && suffix.empty();
  if (!surround_ok) return fail(Errc::TextOutsideTags, "text found outside the tag pairs");
  if (!text::is_blank(between)) return fail(Errc::TextOutsideTags, "text found between </think> and <answer>");

  const auto think = raw.substr(p_think_open + kThinkOpen.size(),
                                p_think_close - p_think_open - kThinkOpen.size());
  const auto answer = text::trim(raw.substr(p_answer_open + kAnswerOpen.size(),
                                            p_answer_close - p_answer_open - kAnswerOpen.size()));

  ParsedTrajectory out;
  std::vector<std::string_view> body_lines;
  auto flush = [&] {
    if (out.think_sections.empty()) return;
    std::string body;
    for (std::size_t i = 0; i < body_lines.size(); ++i) {
      if (i) body.push_back('\n');
      body.append(body_lines[i]);
    }
    out.think_sections.back().body = std::string(text::trim(body));
    body_lines.clear();
  };
  for (auto line : text::split_lines(think)) {
    if (detail::is_subtitle_line(line)) {
      flush();
      const auto subtitle = text::trim(text::trim(line).substr(kSubtitleMark.size()));
      if (subtitle.empty()) return fail(Errc::MissingSections, "empty subtitle line");
      out.think_sections.push_back(Section{std::string(subtitle), {}});
    } else if (out.think_sections.empty()) {
      if (!text::is_blank(line))
        return fail(Errc::MissingSections, "think content before the first ### subtitle");
    } else {
      body_lines.push_back(line);
    }
  }
  flush();
  if (out.think_sections.empty()) return fail(Errc::MissingSections, "think block has no ### subtitle sections");

  for (std::size_t i = 0; i + 1 < out.think_sections.size(); ++i) {
    if (detail::equals_ci(out.think_sections[i].subtitle, cfg.conclusion_marker))
      return fail(Errc::MissingConclusion, "###" + cfg.conclusion_marker + " must be the last section");
  }
  if (!detail::equals_ci(out.think_sections.back().subtitle, cfg.conclusion_marker))
    return fail(Errc::MissingConclusion, "think block does not end with ###" + cfg.conclusion_marker);
  out.final_conclusion = out.think_sections.back().body;

  if (answer.empty()) return fail(Errc::MissingAnswerPrefix, "answer block is empty");
  const auto lines = text::split_lines(answer);
  const auto last = text::trim(lines.back());
  if (last.substr(0, cfg.answer_prefix.size()) != cfg.answer_prefix)
    return fail(Errc::MissingAnswerPrefix, "answer block must end with '" + cfg.answer_prefix + " ...'");
  const auto literal = text::trim(last.substr(cfg.answer_prefix.size()));
  if (literal.empty()) return fail(Errc::EmptyAnswer, "nothing follows '" + cfg.answer_prefix + "'");
  out.answer_phase = std::string(answer);
  out.answer_literal = std::string(literal);
  return ParseOutcome{std::move(out), std::nullopt};
}

/// Throwing parse; the Error carries the code of the first violated rule.
inline ParsedTrajectory parse_trajectory(std::string_view raw, const FormatConfig& cfg = {}) {
  auto r = try_parse_trajectory(raw, cfg);
  if (!r.ok()) throw Error(r.error->code, r.error->message);
  return std::move(*r.value);
}

/// Canonical think-block content (without the tags).
inline std::string think_text(const ParsedTrajectory& p) {
  std::string out;
  for (const auto& s : p.think_sections) {
    out.append(kSubtitleMark).append(s.subtitle).push_back('\n');
    if (!s.body.empty()) out.append(s.body).push_back('\n');
  }
  return out;
}

inline std::size_t count_think_tokens(const ParsedTrajectory& p, TokenizationMode mode,
                                      std::optional<std::size_t> generator_count = std::nullopt) {
  if (mode == TokenizationMode::GeneratorReported) {
    if (!generator_count)
      throw Error(Errc::GeneratorCountUnavailable, "generator-reported token count not supplied");
    return *generator_count;
  }
  return text::count_whitespace_tokens(think_text(p));
}

/// Pure structural and length check of an already-decomposed trajectory.
inline ValidationReport validate(const ParsedTrajectory& p, const FormatConfig& cfg, std::size_t token_count) {
  ValidationReport rep;
  rep.token_count = token_count;
  auto add = [&](Errc code, std::string msg) { rep.violations.push_back({code, std::move(msg)}); };

  if (p.think_sections.empty()) {
    add(Errc::MissingSections, "no think sections");
  } else {
    std::size_t conclusions = 0;
    for (const auto& s : p.think_sections) {
      if (text::is_blank(s.subtitle) || s.subtitle.find('\n') != std::string::npos)
        add(Errc::MissingSections, "subtitle must be a non-empty single line");
      if (detail::equals_ci(s.subtitle, cfg.conclusion_marker)) ++conclusions;
    }
    if (conclusions != 1 || !detail::equals_ci(p.think_sections.back().subtitle, cfg.conclusion_marker))
      add(Errc::MissingConclusion, "exactly one ###" + cfg.conclusion_marker + " section, placed last");
    else if (p.think_sections.back().body != p.final_conclusion)
      add(Errc::InvalidContent, "final_conclusion does not match the conclusion section body");
  }
  if (text::is_blank(p.answer_literal)) add(Errc::EmptyAnswer, "answer literal is empty");

  rep.format_valid = rep.violations.empty();
  rep.length_valid = cfg.min_think_tokens <= token_count && token_count <= cfg.max_think_tokens;
  if (!rep.length_valid)
    add(Errc::LengthOutOfRange, "think length " + std::to_string(token_count) + " outside [" +
                                    std::to_string(cfg.min_think_tokens) + ", " +
                                    std::to_string(cfg.max_think_tokens) + "]");
  return rep;
}

/// Parse + count + validate in one pass. Parse failures become a single
/// format-class violation with both gates false.
inline ValidationReport validate_text(std::string_view raw, const FormatConfig& cfg,
                                      TokenizationMode mode = TokenizationMode::Whitespace,
                                      std::optional<std::size_t> generator_count = std::nullopt) {
  auto parsed = try_parse_trajectory(raw, cfg);
  if (!parsed.ok()) {
    ValidationReport rep;
    rep.violations.push_back(*parsed.error);
    return rep;
  }
  return validate(*parsed.value, cfg, count_think_tokens(*parsed.value, mode, generator_count));
}

/// Interprets an answer literal for a task kind. Multi-choice separators:
/// ',', ';', '/', '&' and the standalone word "and". Short answers keep the
/// conclusion text alongside the literal.
inline AnswerValue answer_from_literal(std::string_view literal, TaskKind kind, std::string_view conclusion = {}) {
  switch (kind) {
    case TaskKind::SingleChoice: {
      auto label = normalize_label(literal);
      if (label.empty()) throw Error(Errc::UnparsableAnswer, "no label in '" + std::string(literal) + "'");
      return SingleLabel{std::move(label)};
    }
    case TaskKind::MultiChoice: {
      std::string s;
      for (char c : literal) s.push_back((c == ';' || c == '/' || c == '&') ? ',' : c);
      std::string joined;
      for (const auto& word : text::split_whitespace(s)) {
        if (text::to_lower(word) == "and") {
          joined.append(" , ");
        } else {
          joined.append(" ").append(word);
        }
      }
      LabelSet out;
      std::size_t start = 0;
      while (start <= joined.size()) {
        const auto comma = joined.find(',', start);
        const auto piece = std::string_view(joined).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (auto label = normalize_label(piece); !label.empty()) out.values.insert(std::move(label));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (out.values.empty()) throw Error(Errc::UnparsableAnswer, "no labels in '" + std::string(literal) + "'");
      return out;
    }
    case TaskKind::ShortAnswer:
      if (conclusion.empty()) return FreeText{std::string(literal)};
      return FreeText{std::string(conclusion) + "\n" + std::string(literal)};
  }
  throw Error(Errc::UnparsableAnswer, "unknown task kind");
}

inline AnswerValue extract_answer(const ParsedTrajectory& p, TaskKind kind) {
  return answer_from_literal(p.answer_literal, kind, p.final_conclusion);
}

namespace detail {

inline void check_renderable(const ParsedTrajectory& p, const FormatConfig& cfg) {
  if (p.think_sections.empty()) throw Error(Errc::EmptyContent, "no sections to render");
  if (text::is_blank(p.answer_literal)) throw Error(Errc::EmptyContent, "answer is empty");
  for (std::size_t i = 0; i < p.think_sections.size(); ++i) {
    const auto& s = p.think_sections[i];
    if (text::is_blank(s.subtitle) || s.subtitle.find('\n') != std::string::npos ||
        text::trim(s.subtitle) != s.subtitle)
      throw Error(Errc::InvalidContent, "subtitle must be a trimmed, non-empty single line");
    if (text::trim(s.body) != s.body) throw Error(Errc::InvalidContent, "section body must be trimmed");
    if (contains_tag(s.subtitle) || contains_tag(s.body))
      throw Error(Errc::InvalidContent, "section text contains a reserved tag");
    for (auto line : text::split_lines(s.body))
      if (is_subtitle_line(line)) throw Error(Errc::InvalidContent, "body line starts with ###");
    const bool is_last = i + 1 == p.think_sections.size();
    if (equals_ci(s.subtitle, cfg.conclusion_marker) != is_last)
      throw Error(Errc::InvalidContent, "conclusion marker must title the last section only");
  }
  if (contains_tag(p.answer_phase)) throw Error(Errc::InvalidContent, "answer phase contains a reserved tag");
  if (text::trim(p.answer_phase) != p.answer_phase || p.answer_phase.empty())
    throw Error(Errc::InvalidContent, "answer phase must be trimmed and non-empty");
  const auto last = text::trim(text::split_lines(p.answer_phase).back());
  if (last.substr(0, cfg.answer_prefix.size()) != cfg.answer_prefix ||
      text::trim(last.substr(cfg.answer_prefix.size())) != p.answer_literal)
    throw Error(Errc::InvalidContent, "answer phase must end with '" + cfg.answer_prefix + " <answer literal>'");
}

}  // namespace detail

/// Canonical writer for a full decomposition. parse(render(p)) == p for
/// every p that parse can produce.
inline std::string render(const ParsedTrajectory& p, const FormatConfig& cfg = {}) {
  detail::check_renderable(p, cfg);
  std::string out(kThinkOpen);
  out.push_back('\n');
  out.append(think_text(p));
  out.append(kThinkClose).push_back('\n');
  out.append(kAnswerOpen).push_back('\n');
  out.append(p.answer_phase).push_back('\n');
  out.append(kAnswerClose);
  return out;
}

/// Builds a trajectory from reasoning sections (without the conclusion),
/// the conclusion text and the answer literal.
inline std::string render(const std::vector<Section>& sections, std::string_view conclusion,
                          std::string_view answer, const FormatConfig& cfg = {}) {
  if (sections.empty()) throw Error(Errc::EmptyContent, "at least one reasoning section is required");
  if (text::is_blank(answer)) throw Error(Errc::EmptyContent, "answer is empty");
  ParsedTrajectory p;
  for (const auto& s : sections)
    p.think_sections.push_back({std::string(text::trim(s.subtitle)), std::string(text::trim(s.body))});
  p.final_conclusion = std::string(text::trim(conclusion));
  p.think_sections.push_back({cfg.conclusion_marker, p.final_conclusion});
  p.answer_literal = std::string(text::trim(answer));
  p.answer_phase = cfg.answer_prefix + " " + p.answer_literal;
  if (p.answer_literal.find('\n') != std::string::npos)
    throw Error(Errc::InvalidContent, "answer literal must be a single line");
  return render(p, cfg);
}

}  // namespace mentra

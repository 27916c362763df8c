#pragma once

// Reasoning trajectory generation: difficulty filtering, verifier-guided
// iterative path search, and rewriting of the accepted path into the
// canonical structured trajectory.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mentra/error.hpp"
#include "mentra/reward.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"
#include "mentra/trajectory_format.hpp"

namespace mentra::rtg {

enum class Strategy { Backtracking, NewPath, Verification, Correction };

inline constexpr std::array<Strategy, 4> kAllStrategies = {Strategy::Backtracking, Strategy::NewPath,
                                                            Strategy::Verification, Strategy::Correction};

constexpr std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Backtracking: return "backtracking";
    case Strategy::NewPath: return "new_path";
    case Strategy::Verification: return "verification";
    case Strategy::Correction: return "correction";
  }
  return "unknown";
}

/// One reasoning step e_i with its candidate answer y_i.
struct ReasoningStep {
  std::string reasoning;
  std::string answer;
};

struct SearchConfig {
  std::size_t max_iterations = 3;  // generation rounds per attempt
  std::size_t max_attempts = 3;
  std::uint64_t strategy_seed = 0;

  void check() const {
    if (max_iterations < 1 || max_attempts < 1)
      throw Error(Errc::ConfigError, "search: max_iterations and max_attempts must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Client roles
// ---------------------------------------------------------------------------

class ReasoningGenerator {
 public:
  virtual ~ReasoningGenerator() = default;
  /// Initial step when `strategy` is empty, otherwise a refinement of `path`.
  virtual ReasoningStep generate(const TaskSpec& problem, std::span<const ReasoningStep> path,
                                 std::optional<Strategy> strategy) = 0;
  /// Free-form structured rewrite of an accepted path. Mocks return nothing
  /// and the templated linearization is used instead.
  virtual std::optional<std::string> rewrite(const TaskSpec&, std::span<const ReasoningStep>,
                                             std::string_view /*answer*/) {
    return std::nullopt;
  }
};

class AnswerVerifier {
 public:
  virtual ~AnswerVerifier() = default;
  virtual bool verify(const TaskSpec& problem, const ReasoningStep& step) = 0;
};

class ZeroShotSolver {
 public:
  virtual ~ZeroShotSolver() = default;
  /// Returns the solver's answer literal.
  virtual std::string solve(const TaskSpec& problem) = 0;
};

/// Quality of a candidate answer literal against the task's gold answer;
/// unparsable answers score 0.
inline double answer_quality(const TaskSpec& problem, std::string_view literal, std::string_view reasoning = {}) {
  try {
    return score_answer(answer_from_literal(literal, problem.kind, reasoning), problem);
  } catch (const Error& e) {
    if (e.code() == Errc::UnparsableAnswer) return 0.0;
    throw;
  }
}

/// Default verifier: accepts iff the task's own quality scorer gives 1.
class QualityVerifier final : public AnswerVerifier {
 public:
  bool verify(const TaskSpec& problem, const ReasoningStep& step) override {
    return answer_quality(problem, step.answer, step.reasoning) >= 1.0;
  }
};

/// Replays a fixed verdict sequence; the last verdict repeats once the
/// script is exhausted.
class ScriptedVerifier final : public AnswerVerifier {
 public:
  explicit ScriptedVerifier(std::vector<bool> verdicts) : verdicts_(std::move(verdicts)) {}

  bool verify(const TaskSpec&, const ReasoningStep&) override {
    std::lock_guard lock(mu_);
    const bool v = verdicts_.empty() ? false : verdicts_[std::min(calls_, verdicts_.size() - 1)];
    ++calls_;
    return v;
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  std::vector<bool> verdicts_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

/// Emits numbered steps whose answers follow a fixed script (cycled).
/// Refinement steps may carry meta-language so the rewriter can be tested.
class ScriptedGenerator final : public ReasoningGenerator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> answers, bool chatty_refinements = false)
      : answers_(std::move(answers)), chatty_(chatty_refinements) {}

  ReasoningStep generate(const TaskSpec& problem, std::span<const ReasoningStep> path,
                         std::optional<Strategy> strategy) override {
    std::lock_guard lock(mu_);
    const auto n = calls_++;
    const auto answer = answers_.empty() ? std::string("A") : answers_[n % answers_.size()];
    std::string reasoning;
    if (strategy && chatty_)
      reasoning = "Wait, earlier I forgot to check the duration. Let me revisit that. ";
    reasoning += "Step " + std::to_string(path.size() + 1) + " examines the case '" + problem.id +
                 "' and weighs the evidence for option " + answer + ".";
    return {reasoning, answer};
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  std::vector<std::string> answers_;
  bool chatty_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

/// Offline stand-in for a strong generator: answers correctly with a fixed
/// probability, decided by a hash of (seed, problem, per-problem round),
/// otherwise picks a wrong option.
class SimulatedGenerator final : public ReasoningGenerator {
 public:
  SimulatedGenerator(double accuracy, std::uint64_t seed) : accuracy_(accuracy), seed_(seed) {}

  ReasoningStep generate(const TaskSpec& problem, std::span<const ReasoningStep> path,
                         std::optional<Strategy> strategy) override {
    std::uint64_t round = 0;
    {
      std::lock_guard lock(mu_);
      round = rounds_[problem.id]++;
    }
    const auto h = text::mix_seed(text::mix_seed(seed_, text::fnv1a(problem.id)), round * 31 + path.size());
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    const bool correct = u < accuracy_;
    std::string answer = pick_answer(problem, correct, h);
    std::string reasoning = "The presentation in case " + problem.id + " is weighed against each candidate";
    if (strategy) reasoning += " after a " + std::string(to_string(*strategy)) + " pass";
    reasoning += "; the evidence points to " + answer + ".";
    return {reasoning, answer};
  }

 private:
  static std::string pick_answer(const TaskSpec& problem, bool correct, std::uint64_t h) {
    if (const auto* g = std::get_if<SingleLabel>(&problem.gold)) {
      if (correct || problem.options.size() < 2) return g->value;
      std::vector<std::string> wrong;
      for (const auto& o : problem.options)
        if (option_label(o) != g->value) wrong.push_back(option_label(o));
      return wrong[(h >> 7) % wrong.size()];
    }
    if (const auto* g = std::get_if<LabelSet>(&problem.gold)) {
      std::vector<std::string> labels(g->values.begin(), g->values.end());
      if (!correct) labels.pop_back();
      if (labels.empty() && !problem.options.empty()) labels.push_back(option_label(problem.options.front()));
      std::string out;
      for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? ", " : "") + labels[i];
      return out.empty() ? std::string("none") : out;
    }
    const auto& points = std::get<ScoringPoints>(problem.gold).points;
    std::string out;
    const std::size_t n = correct ? points.size() : points.size() / 2;
    for (std::size_t i = 0; i < n; ++i) out += (i ? "; " : "") + points[i];
    return out.empty() ? std::string("insufficient information") : out;
  }

  double accuracy_;
  std::uint64_t seed_;
  std::map<std::string, std::uint64_t> rounds_;
  std::mutex mu_;
};

/// Replays fixed answers per problem id; unknown ids answer "?".
class ScriptedSolver final : public ZeroShotSolver {
 public:
  explicit ScriptedSolver(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}
  std::string solve(const TaskSpec& problem) override {
    auto it = answers_.find(problem.id);
    return it == answers_.end() ? std::string("?") : it->second;
  }

 private:
  std::map<std::string, std::string> answers_;
};

/// Offline zero-shot solver: correct on a hash-determined fraction of items.
class SimulatedSolver final : public ZeroShotSolver {
 public:
  SimulatedSolver(double accuracy, std::uint64_t seed) : generator_(accuracy, seed) {}
  std::string solve(const TaskSpec& problem) override { return generator_.generate(problem, {}, std::nullopt).answer; }

 private:
  SimulatedGenerator generator_;
};

// ---------------------------------------------------------------------------
// Difficulty filtering
// ---------------------------------------------------------------------------

/// Keeps exactly the items the solver gets wrong (quality < 1), in input
/// order.
inline std::vector<TaskSpec> difficulty_filter(std::span<const TaskSpec> dataset, ZeroShotSolver& solver) {
  std::vector<TaskSpec> kept;
  for (const auto& task : dataset) {
    const auto literal = solver.solve(task);
    if (answer_quality(task, literal) < 1.0) kept.push_back(task);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct SearchSession {
  std::string problem_id;
  std::size_t attempt = 0;    // 1-based index of the current (or last) attempt
  std::size_t iteration = 0;  // refinements completed in the current attempt
  std::vector<ReasoningStep> path;
  std::vector<bool> verdicts;
  std::vector<Strategy> strategies;
  std::size_t generator_calls = 0;  // across all attempts
  std::size_t verifier_calls = 0;
  std::size_t rewrite_requests = 0;
  bool accepted = false;
};

struct SearchResult {
  bool accepted = false;
  std::string trajectory;  // empty when discarded
  SearchSession session;
};

namespace detail {

inline constexpr std::array<std::string_view, 14> kMetaMarkers = {
    "wait",           "let me revisit",  "let me reconsider", "let me re-check", "let me recheck",
    "earlier i forgot", "on second thought", "i made a mistake", "hmm",           "backtrack",
    "actually,",      "scratch that",    "let me try again",  "going back to"};

inline bool has_meta_language(std::string_view sentence) {
  const auto lowered = " " + text::to_lower(sentence) + " ";
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (auto m : kMetaMarkers) {
    for (auto pos = lowered.find(m); pos != std::string::npos; pos = lowered.find(m, pos + 1)) {
      const bool starts = !word_char(lowered[pos - 1]);
      const bool ends = !word_char(m.back()) || !word_char(lowered[pos + m.size()]);
      if (starts && ends) return true;
    }
  }
  return false;
}

/// Drops sentences carrying self-correction meta-language and any text that
/// would break the trajectory grammar.
inline std::string clean_reasoning(std::string_view raw) {
  std::string s(raw);
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) s = text::replace_all(std::move(s), tag, " ");
  std::string out;
  std::string sentence;
  auto flush = [&] {
    const auto t = text::trim(sentence);
    if (!t.empty() && !has_meta_language(t)) {
      if (!out.empty()) out.push_back(' ');
      out.append(t);
    }
    sentence.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    sentence.push_back(text::is_space(c) ? ' ' : c);
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || text::is_space(s[i + 1]))) flush();
  }
  flush();
  // a leading ### would read as a subtitle
  while (out.starts_with("#")) out.erase(0, 1);
  return std::string(text::trim(out));
}

inline std::string single_line(std::string_view s) {
  std::string out;
  for (char c : text::trim(s)) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) out = text::replace_all(std::move(out), tag, "");
  return std::string(text::trim(out));
}

}  // namespace detail

/// Linearizes the accepted path into the canonical structured trajectory.
/// A new path restarts the chain, backtracking and correction replace the
/// latest step, verification extends it.
inline std::string structure_rewrite(const SearchSession& session, const FormatConfig& cfg = {}) {
  if (!session.accepted || session.path.empty())
    throw Error(Errc::SessionNotAccepted, "session '" + session.problem_id + "' did not end in acceptance");

  struct Link {
    const ReasoningStep* step;
    std::optional<Strategy> via;
  };
  std::vector<Link> chain{{&session.path.front(), std::nullopt}};
  for (std::size_t i = 1; i < session.path.size(); ++i) {
    const auto via = i - 1 < session.strategies.size() ? std::optional(session.strategies[i - 1]) : std::nullopt;
    const Link link{&session.path[i], via};
    if (via == Strategy::NewPath) {
      chain.assign(1, link);
    } else if (via == Strategy::Verification) {
      chain.push_back(link);
    } else {
      chain.back() = link;
    }
  }

  const auto answer = detail::single_line(session.path.back().answer);
  if (answer.empty()) throw Error(Errc::EmptyContent, "accepted answer is empty");

  std::vector<Section> sections;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    auto body = detail::clean_reasoning(chain[k].step->reasoning);
    if (body.empty()) continue;
    std::string title = "Case Analysis";
    if (k > 0) title = chain[k].via == Strategy::Verification ? "Consistency Check" : "Further Analysis";
    sections.push_back({title, std::move(body)});
  }
  if (sections.empty()) sections.push_back({"Case Analysis", "The case details were reviewed against every option."});
  const std::string conclusion = "Taken together, the analysis supports " + answer + " as the answer.";

  auto build = [&] { return render(sections, conclusion, answer, cfg); };
  auto tokens = [&](const std::string& raw) {
    return count_think_tokens(parse_trajectory(raw, cfg), TokenizationMode::Whitespace);
  };
  auto out = build();
  while (tokens(out) > cfg.max_think_tokens && sections.size() > 1) {
    sections.erase(sections.begin());
    out = build();
  }
  while (tokens(out) > cfg.max_think_tokens) {
    auto words = text::split_whitespace(sections.front().body);
    const auto excess = tokens(out) - cfg.max_think_tokens;
    if (words.size() <= excess) throw Error(Errc::InvalidContent, "trajectory cannot fit the length bound");
    words.resize(words.size() - excess);
    std::string body;
    for (const auto& w : words) body += (body.empty() ? "" : " ") + w;
    sections.front().body = body;
    out = build();
  }
  const auto report = validate_text(out, cfg);
  if (!report.format_valid || !report.length_valid)
    throw Error(Errc::InvalidContent, "rewritten trajectory failed validation");
  return out;
}

namespace detail {

inline bool rewrite_acceptable(std::string_view raw, const TaskSpec& problem, std::string_view answer,
                               const FormatConfig& cfg) {
  const auto report = validate_text(raw, cfg);
  if (!report.format_valid || !report.length_valid) return false;
  const auto parsed = parse_trajectory(raw, cfg);
  (void)problem;
  return normalize_label(parsed.answer_literal) == normalize_label(answer);
}

}  // namespace detail

/// Verifier-guided iterative search. Each attempt makes up to
/// max_iterations generation rounds (the initial step plus refinements);
/// after max_attempts failed attempts the problem is discarded.
inline SearchResult search_trajectory(const TaskSpec& problem, ReasoningGenerator& generator,
                                      AnswerVerifier& verifier, const SearchConfig& cfg,
                                      const FormatConfig& fmt = {}) {
  cfg.check();
  std::mt19937_64 rng(text::mix_seed(cfg.strategy_seed, text::fnv1a(problem.id)));
  SearchResult result;
  auto& session = result.session;
  session.problem_id = problem.id;

  auto next_step = [&](std::optional<Strategy> strategy) {
    auto step = generator.generate(problem, session.path, strategy);
    ++session.generator_calls;
    if (text::is_blank(step.answer))
      throw Error(Errc::ClientProtocolError, "generator returned an empty answer for '" + problem.id + "'");
    session.path.push_back(std::move(step));
  };

  for (std::size_t attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    session.attempt = attempt;
    session.iteration = 0;
    session.path.clear();
    session.verdicts.clear();
    session.strategies.clear();
    next_step(std::nullopt);
    while (true) {
      const bool ok = verifier.verify(problem, session.path.back());
      ++session.verifier_calls;
      session.verdicts.push_back(ok);
      if (ok) {
        session.accepted = true;
        const auto answer = session.path.back().answer;
        for (int tries = 0; tries < 2; ++tries) {
          ++session.rewrite_requests;
          auto live = generator.rewrite(problem, session.path, answer);
          if (!live) break;
          if (detail::rewrite_acceptable(*live, problem, answer, fmt)) {
            result.trajectory = std::move(*live);
            break;
          }
        }
        if (result.trajectory.empty()) result.trajectory = structure_rewrite(session, fmt);
        result.accepted = true;
        return result;
      }
      if (session.iteration + 1 >= cfg.max_iterations) break;
      const auto strategy = kAllStrategies[rng() % kAllStrategies.size()];
      session.strategies.push_back(strategy);
      next_step(strategy);
      ++session.iteration;
    }
  }
  return result;
}

/// Line-delimited output record of one searched problem.
inline nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : r.session.strategies) strategies.push_back(std::string(to_string(s)));
  return {{"problem_id", r.session.problem_id},
          {"status", r.accepted ? "accepted" : "discarded"},
          {"text", r.trajectory},
          {"attempts", r.session.attempt},
          {"iterations", r.session.iteration},
          {"generator_calls", r.session.generator_calls},
          {"strategies", strategies}};
}

}  // namespace mentra::rtg

#pragma once

// Model-backed implementations of the generator, verifier, zero-shot solver,
// consistency judge and scoring-point matcher roles. Each role renders its
// prompt template, sends one chat request, and parses a small fixed reply
// format.

#include <optional>
#include <span>
#include <string>

#include "mentra/gateway.hpp"
#include "mentra/prompts.hpp"
#include "mentra/reward.hpp"
#include "mentra/rtg.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"

namespace mentra::llm {

namespace detail {

inline std::string format_options(const TaskSpec& t) {
  if (t.options.empty()) return "(none)";
  std::string out;
  for (const auto& o : t.options) out += o + "\n";
  out.pop_back();
  return out;
}

inline std::string format_gold(const TaskSpec& t) {
  if (const auto* s = std::get_if<SingleLabel>(&t.gold)) return s->value;
  if (const auto* m = std::get_if<LabelSet>(&t.gold)) {
    std::string out;
    for (const auto& l : m->values) out += (out.empty() ? "" : ", ") + l;
    return out;
  }
  std::string out;
  for (const auto& p : std::get<ScoringPoints>(t.gold).points) out += "- " + p + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

inline std::string format_path(std::span<const rtg::ReasoningStep> path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i)
    out += "Step " + std::to_string(i + 1) + ": " + path[i].reasoning + " (answer: " + path[i].answer + ")\n";
  if (!out.empty()) out.pop_back();
  return out;
}

inline PromptVars task_vars(const TaskSpec& t) {
  return {{"task_kind", std::string(to_string(t.kind))}, {"prompt", t.prompt}, {"options", format_options(t)}};
}

/// Splits a "REASONING: ... ANSWER: ..." reply. Without the markers the last
/// non-blank line is the answer and everything before it the reasoning.
inline rtg::ReasoningStep parse_step(std::string_view reply) {
  const std::string s(reply);
  const auto upper = text::to_upper(s);
  const auto a = upper.rfind("ANSWER:");
  if (a != std::string::npos) {
    auto r = upper.find("REASONING:");
    const std::size_t r_begin = r == std::string::npos || r > a ? 0 : r + 10;
    return {std::string(text::trim(s.substr(r_begin, a - r_begin))), std::string(text::trim(s.substr(a + 7)))};
  }
  const auto lines = text::split_lines(s);
  std::size_t last = lines.size();
  while (last > 0 && text::is_blank(lines[last - 1])) --last;
  if (last == 0) throw Error(Errc::ClientProtocolError, "empty generator reply");
  std::string reasoning;
  for (std::size_t i = 0; i + 1 < last; ++i) reasoning += std::string(lines[i]) + "\n";
  return {std::string(text::trim(reasoning)), std::string(text::trim(lines[last - 1]))};
}

/// First word of the reply, upper-cased, punctuation stripped.
inline std::string first_word(std::string_view reply) {
  const auto words = text::split_whitespace(reply);
  if (words.empty()) return {};
  return normalize_label(words.front());
}

}  // namespace detail

class LlmGenerator final : public rtg::ReasoningGenerator {
 public:
  LlmGenerator(gateway::ChatClient& client, PromptLibrary& prompts, std::string model, double temperature = 0.7)
      : client_(client), prompts_(prompts), model_(std::move(model)), temperature_(temperature) {}

  rtg::ReasoningStep generate(const TaskSpec& problem, std::span<const rtg::ReasoningStep> path,
                              std::optional<rtg::Strategy> strategy) override {
    auto vars = detail::task_vars(problem);
    std::string prompt;
    if (!strategy) {
      prompt = prompts_.render("generator", vars);
    } else {
      vars["path"] = detail::format_path(path);
      vars["strategy"] = std::string(rtg::to_string(*strategy));
      prompt = prompts_.render("refine", vars);
    }
    return detail::parse_step(client_.ask(model_, {}, prompt, temperature_));
  }

  std::optional<std::string> rewrite(const TaskSpec& problem, std::span<const rtg::ReasoningStep> path,
                                     std::string_view answer) override {
    PromptVars vars{{"prompt", problem.prompt}, {"path", detail::format_path(path)}, {"answer", std::string(answer)}};
    return std::string(text::trim(client_.ask(model_, {}, prompts_.render("rewrite", vars), 0.0)));
  }

 private:
  gateway::ChatClient& client_;
  PromptLibrary& prompts_;
  std::string model_;
  double temperature_;
};

class LlmVerifier final : public rtg::AnswerVerifier {
 public:
  LlmVerifier(gateway::ChatClient& client, PromptLibrary& prompts, std::string model)
      : client_(client), prompts_(prompts), model_(std::move(model)) {}

  bool verify(const TaskSpec& problem, const rtg::ReasoningStep& step) override {
    auto vars = detail::task_vars(problem);
    vars["gold"] = detail::format_gold(problem);
    vars["answer"] = step.answer;
    vars["reasoning"] = step.reasoning;
    const auto word = detail::first_word(client_.ask(model_, {}, prompts_.render("verifier", vars)));
    if (word == "CORRECT") return true;
    if (word == "INCORRECT") return false;
    throw Error(Errc::ClientProtocolError, "verifier reply is neither CORRECT nor INCORRECT");
  }

 private:
  gateway::ChatClient& client_;
  PromptLibrary& prompts_;
  std::string model_;
};

class LlmSolver final : public rtg::ZeroShotSolver {
 public:
  LlmSolver(gateway::ChatClient& client, PromptLibrary& prompts, std::string model)
      : client_(client), prompts_(prompts), model_(std::move(model)) {}

  std::string solve(const TaskSpec& problem) override {
    const auto reply = client_.ask(model_, {}, prompts_.render("solver", detail::task_vars(problem)));
    for (auto line : text::split_lines(reply))
      if (!text::is_blank(line)) return std::string(text::trim(line));
    return {};
  }

 private:
  gateway::ChatClient& client_;
  PromptLibrary& prompts_;
  std::string model_;
};

/// Gateway and reply-format failures surface as JudgeUnavailable.
class LlmConsistencyJudge final : public ConsistencyJudge {
 public:
  LlmConsistencyJudge(gateway::ChatClient& client, PromptLibrary& prompts, std::string model)
      : client_(client), prompts_(prompts), model_(std::move(model)) {}

  JudgeVerdict judge(const JudgeRequest& req) override {
    std::string reply;
    try {
      reply = client_.ask(model_, {},
                          prompts_.render("consistency_judge",
                                          {{"prompt", req.prompt}, {"trajectory", req.trajectory_text}}));
    } catch (const Error& e) {
      if (e.code() == Errc::ConfigError) throw;
      throw Error(Errc::JudgeUnavailable, e.what());
    }
    const auto word = detail::first_word(reply);
    const auto nl = reply.find('\n');
    std::string rationale = nl == std::string::npos ? std::string() : std::string(text::trim(reply.substr(nl + 1)));
    if (word == "CONSISTENT") return {true, rationale};
    if (word == "INCONSISTENT") return {false, rationale};
    throw Error(Errc::JudgeUnavailable, "judge reply is neither CONSISTENT nor INCONSISTENT");
  }

 private:
  gateway::ChatClient& client_;
  PromptLibrary& prompts_;
  std::string model_;
};

/// Semantic scoring-point matcher backed by the judge model.
inline PointMatcher make_llm_point_matcher(gateway::ChatClient& client, PromptLibrary& prompts, std::string model) {
  return [&client, &prompts, model = std::move(model)](std::string_view response, std::string_view point) {
    const auto word = detail::first_word(client.ask(
        model, {},
        prompts.render("point_matcher", {{"point", std::string(point)}, {"response", std::string(response)}})));
    if (word == "YES") return true;
    if (word == "NO") return false;
    throw Error(Errc::ClientProtocolError, "point matcher reply is neither YES nor NO");
  };
}

}  // namespace mentra::llm

#pragma once

// Differentiable policy contract and the desk-scale toy policy that ships
// with the engine.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/text.hpp"

namespace mentra {

using TokenId = std::uint32_t;

/// log pi(token | prompt, prefix) and its gradient w.r.t. the flat parameter
/// vector, stored sparsely as (index, value) pairs.
struct TokenLogProb {
  double logp = 0.0;
  std::vector<std::pair<std::size_t, double>> grad;
};

struct Completion {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;  // log-probs of the sampling distribution
};

template <class P>
concept PolicyContract = requires(const P& p, std::span<const double> params, std::string_view prompt,
                                  std::span<const TokenId> tokens, std::size_t pos, double temperature,
                                  std::uint64_t seed) {
  { p.num_params() } -> std::convertible_to<std::size_t>;
  { p.log_prob(params, prompt, tokens, pos) } -> std::same_as<TokenLogProb>;
  { p.sample(params, prompt, temperature, seed) } -> std::same_as<Completion>;
  { p.detokenize(tokens) } -> std::convertible_to<std::string>;
};

struct ToyPolicyConfig {
  std::vector<std::string> vocab;
  std::size_t prompt_buckets = 16;
  std::size_t max_len = 16;
  // Also key the context on the previous symbol (prefix-dependent policy).
  bool condition_on_previous = false;
  // Sampling ends after emitting this symbol; it is dropped from the text.
  std::optional<TokenId> stop_symbol;
};

/// Tabular softmax policy. Each context bucket owns one row of logits over
/// the vocabulary; the bucket of position t is
///   ((fnv1a(prompt) mod prompt_buckets) * max_len + t) * W + prev
/// with W = |vocab| + 1 and prev = previous symbol + 1 (0 at t = 0) when
/// conditioning on the previous symbol, and W = 1, prev = 0 otherwise.
class ToyPolicy {
 public:
  explicit ToyPolicy(ToyPolicyConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.vocab.empty()) throw Error(Errc::ConfigError, "toy policy needs a non-empty vocabulary");
    if (cfg_.prompt_buckets == 0 || cfg_.max_len == 0)
      throw Error(Errc::ConfigError, "toy policy needs prompt_buckets >= 1 and max_len >= 1");
    if (cfg_.stop_symbol && *cfg_.stop_symbol >= cfg_.vocab.size())
      throw Error(Errc::UnknownSymbol, "stop symbol outside vocabulary");
  }

  const ToyPolicyConfig& config() const noexcept { return cfg_; }
  std::size_t vocab_size() const noexcept { return cfg_.vocab.size(); }
  std::size_t num_contexts() const noexcept {
    return cfg_.prompt_buckets * cfg_.max_len * (cfg_.condition_on_previous ? vocab_size() + 1 : 1);
  }
  std::size_t num_params() const noexcept { return num_contexts() * vocab_size(); }

  std::size_t prompt_bucket(std::string_view prompt) const noexcept {
    return static_cast<std::size_t>(text::fnv1a(prompt) % cfg_.prompt_buckets);
  }

  std::size_t context(std::string_view prompt, std::size_t position, std::span<const TokenId> prefix) const {
    if (position >= cfg_.max_len)
      throw Error(Errc::ShapeMismatch, "position " + std::to_string(position) + " beyond max_len");
    std::size_t ctx = prompt_bucket(prompt) * cfg_.max_len + position;
    if (cfg_.condition_on_previous) {
      const std::size_t prev = position == 0 ? 0 : static_cast<std::size_t>(prefix[position - 1]) + 1;
      ctx = ctx * (vocab_size() + 1) + prev;
    }
    return ctx;
  }

  TokenId symbol(std::string_view s) const {
    for (std::size_t i = 0; i < cfg_.vocab.size(); ++i)
      if (cfg_.vocab[i] == s) return static_cast<TokenId>(i);
    throw Error(Errc::UnknownSymbol, "symbol '" + std::string(s) + "' not in vocabulary");
  }

  std::vector<TokenId> encode(const std::vector<std::string>& symbols) const {
    std::vector<TokenId> out;
    out.reserve(symbols.size());
    for (const auto& s : symbols) out.push_back(symbol(s));
    return out;
  }

  TokenLogProb log_prob(std::span<const double> params, std::string_view prompt, std::span<const TokenId> tokens,
                        std::size_t position) const {
    check_params(params);
    if (position >= tokens.size()) throw Error(Errc::ShapeMismatch, "position outside completion");
    for (std::size_t i = 0; i <= position; ++i)
      if (tokens[i] >= vocab_size()) throw Error(Errc::UnknownSymbol, "token id outside vocabulary");
    const auto row = context(prompt, position, tokens) * vocab_size();
    const auto probs = softmax(params.subspan(row, vocab_size()), 1.0);
    const auto chosen = tokens[position];
    TokenLogProb out;
    out.logp = log_softmax_at(params.subspan(row, vocab_size()), 1.0, chosen);
    out.grad.reserve(vocab_size());
    for (std::size_t v = 0; v < vocab_size(); ++v)
      out.grad.emplace_back(row + v, (v == chosen ? 1.0 : 0.0) - probs[v]);
    return out;
  }

  Completion sample(std::span<const double> params, std::string_view prompt, double temperature,
                    std::uint64_t seed) const {
    check_params(params);
    if (!(temperature > 0.0)) throw Error(Errc::DomainError, "temperature must be > 0");
    std::mt19937_64 rng(seed);
    Completion out;
    for (std::size_t pos = 0; pos < cfg_.max_len; ++pos) {
      const auto row = context(prompt, pos, out.tokens) * vocab_size();
      const auto logits = params.subspan(row, vocab_size());
      const auto probs = softmax(logits, temperature);
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      double acc = 0.0;
      TokenId pick = static_cast<TokenId>(vocab_size() - 1);
      for (std::size_t v = 0; v < vocab_size(); ++v) {
        acc += probs[v];
        if (u < acc) {
          pick = static_cast<TokenId>(v);
          break;
        }
      }
      out.tokens.push_back(pick);
      out.logprobs.push_back(log_softmax_at(logits, temperature, pick));
      if (cfg_.stop_symbol && pick == *cfg_.stop_symbol) break;
    }
    return out;
  }

  // Tags and ### subtitles occupy a line of their own; a symbol starting
  // with "Answer:" opens a new line; everything else is space-joined.
  std::string detokenize(std::span<const TokenId> tokens) const {
    std::string out;
    bool line_open = false;
    for (auto t : tokens) {
      if (t >= vocab_size()) throw Error(Errc::UnknownSymbol, "token id outside vocabulary");
      if (cfg_.stop_symbol && t == *cfg_.stop_symbol) continue;
      const auto& s = cfg_.vocab[t];
      const bool own_line = s.starts_with('<') || s.starts_with("###");
      const bool new_line = own_line || s.starts_with("Answer:");
      if (line_open && new_line) out.push_back('\n');
      else if (line_open) out.push_back(' ');
      out.append(s);
      line_open = true;
      if (own_line) {
        out.push_back('\n');
        line_open = false;
      }
    }
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
  }

  static std::vector<double> softmax(std::span<const double> logits, double temperature) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp((logits[i] - mx) / temperature));
    for (auto& x : p) x /= z;
    return p;
  }

  static double log_softmax_at(std::span<const double> logits, double temperature, std::size_t i) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp((l - mx) / temperature);
    return (logits[i] - mx) / temperature - std::log(z);
  }

 private:
  void check_params(std::span<const double> params) const {
    if (params.size() != num_params())
      throw Error(Errc::ShapeMismatch, "parameter vector has " + std::to_string(params.size()) +
                                           " entries, policy expects " + std::to_string(num_params()));
  }

  ToyPolicyConfig cfg_;
};

static_assert(PolicyContract<ToyPolicy>);

}  // namespace mentra

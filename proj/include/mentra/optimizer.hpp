#pragma once

// Loss functions of the hybrid objective and the Adam update.
//
//   L_total = (1 - mu(t)) * L_grpo + mu(t) * L_sft_phi
//
// All losses return their value together with the dense gradient w.r.t.
// the policy parameters. Math is done in double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mentra/error.hpp"
#include "mentra/policy.hpp"
#include "mentra/schedule.hpp"

namespace mentra {

struct LossConfig {
  double clip_epsilon = 0.2;
  double ez = 1e-8;

  void check() const {
    if (!(0.0 < clip_epsilon && clip_epsilon < 1.0)) throw Error(Errc::ConfigError, "loss: 0 < clip_epsilon < 1");
    if (!(ez > 0.0)) throw Error(Errc::ConfigError, "loss: ez must be > 0");
  }
};

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double learning_rate = 2e-6;
  double adam_eps = 1e-8;

  void check() const {
    if (!(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0))
      throw Error(Errc::ConfigError, "optimizer: betas must lie in (0,1)");
    if (!(learning_rate > 0.0)) throw Error(Errc::ConfigError, "optimizer: learning_rate must be > 0");
    if (!(adam_eps > 0.0)) throw Error(Errc::ConfigError, "optimizer: adam_eps must be > 0");
  }
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
  std::size_t tokens = 0;
};

// Log-ratios above this are capped before exponentiation.
inline constexpr double kMaxLogRatio = 30.0;

// ---------------------------------------------------------------------------
// Advantages
// ---------------------------------------------------------------------------

/// A_j = (r_j - mean) / (std + ez), population standard deviation.
inline std::vector<double> normalize_advantages(std::span<const double> rewards, const LossConfig& cfg = {}) {
  if (rewards.empty()) throw Error(Errc::EmptyBatch, "advantage normalization needs at least one reward");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / (sd + cfg.ez));
  return out;
}

// ---------------------------------------------------------------------------
// Clipped surrogate
// ---------------------------------------------------------------------------

struct SurrogateTerm {
  double value;         // min(r A, clip(r, 1-eps, 1+eps) A)
  double d_dratio;      // derivative of value w.r.t. r (0 on the clipped branch)
};

inline SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return {unclipped, advantage};
  return {clipped, 0.0};
}

struct GrpoSequenceInput {
  double advantage = 0.0;
  std::vector<double> sample_logprobs;   // frozen at rollout time
  std::vector<TokenLogProb> current;     // under the parameters being optimized
};

/// Negative mean over all tokens of the batch of the clipped surrogate.
inline LossValue grpo_loss(std::span<const GrpoSequenceInput> batch, std::size_t num_params,
                           const LossConfig& cfg = {}) {
  LossValue out;
  out.grad.assign(num_params, 0.0);
  for (const auto& seq : batch) {
    if (seq.sample_logprobs.size() != seq.current.size())
      throw Error(Errc::TokenAlignmentMismatch, "sampling and current log-probs differ in length");
    out.tokens += seq.current.size();
  }
  if (out.tokens == 0) throw Error(Errc::EmptyBatch, "GRPO batch contains no tokens");
  const double scale = -1.0 / static_cast<double>(out.tokens);
  double total = 0.0;
  for (const auto& seq : batch) {
    for (std::size_t t = 0; t < seq.current.size(); ++t) {
      const double raw_log_ratio = seq.current[t].logp - seq.sample_logprobs[t];
      const bool capped = raw_log_ratio > kMaxLogRatio;
      const double ratio = std::exp(capped ? kMaxLogRatio : raw_log_ratio);
      const auto term = clipped_surrogate(ratio, seq.advantage, cfg.clip_epsilon);
      total += term.value;
      // d ratio / d theta = ratio * d logp / d theta
      const double w = capped ? 0.0 : scale * term.d_dratio * ratio;
      if (w == 0.0) continue;
      for (const auto& [i, g] : seq.current[t].grad) {
        if (i >= num_params) throw Error(Errc::ShapeMismatch, "gradient index outside parameter vector");
        out.grad[i] += w * g;
      }
    }
  }
  out.value = scale * total;
  return out;
}

// ---------------------------------------------------------------------------
// Token-weighted SFT
// ---------------------------------------------------------------------------

enum class PhiGradient {
  StopGradient,  // phi(p) is a constant weight; gradient flows through log p only
  Full,          // differentiate through phi(p) as well
};

/// -(1 / sum |y_i|) * sum_i sum_t phi(p_it) log p_it over per-sequence
/// token log-probs.
inline LossValue sft_phi_loss(std::span<const std::vector<TokenLogProb>> batch, std::size_t num_params,
                              PhiGradient mode = PhiGradient::StopGradient) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "SFT batch is empty");
  LossValue out;
  out.grad.assign(num_params, 0.0);
  for (const auto& seq : batch) {
    if (seq.empty()) throw Error(Errc::EmptyBatch, "expert solution with no tokens");
    out.tokens += seq.size();
  }
  const double scale = -1.0 / static_cast<double>(out.tokens);
  double total = 0.0;
  for (const auto& seq : batch) {
    for (const auto& tok : seq) {
      const double p = std::exp(tok.logp);
      const double phi = p * (1.0 - p);
      total += phi * tok.logp;
      // d/dtheta [phi(p) log p] = (phi + [full] * (1 - 2p) p log p) dlogp
      double coef = phi;
      if (mode == PhiGradient::Full) coef += (1.0 - 2.0 * p) * p * tok.logp;
      const double w = scale * coef;
      for (const auto& [i, g] : tok.grad) {
        if (i >= num_params) throw Error(Errc::ShapeMismatch, "gradient index outside parameter vector");
        out.grad[i] += w * g;
      }
    }
  }
  out.value = scale * total;
  return out;
}

struct ExpertExample {
  std::string prompt;
  std::vector<TokenId> tokens;
};

template <PolicyContract P>
std::vector<TokenLogProb> sequence_log_probs(const P& policy, std::span<const double> params,
                                             std::string_view prompt, std::span<const TokenId> tokens) {
  std::vector<TokenLogProb> out;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) out.push_back(policy.log_prob(params, prompt, tokens, t));
  return out;
}

template <PolicyContract P>
LossValue sft_phi_loss(const P& policy, std::span<const double> params, std::span<const ExpertExample> batch,
                       PhiGradient mode = PhiGradient::StopGradient) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "SFT batch is empty");
  std::vector<std::vector<TokenLogProb>> lps;
  lps.reserve(batch.size());
  for (const auto& ex : batch) {
    if (ex.tokens.empty()) throw Error(Errc::EmptyBatch, "expert solution with no tokens");
    lps.push_back(sequence_log_probs(policy, params, ex.prompt, ex.tokens));
  }
  return sft_phi_loss(lps, policy.num_params(), mode);
}

struct RolloutSequence {
  std::string prompt;
  std::vector<TokenId> tokens;
  std::vector<double> sample_logprobs;
  double advantage = 0.0;
};

template <PolicyContract P>
LossValue grpo_loss(const P& policy, std::span<const double> params, std::span<const RolloutSequence> batch,
                    const LossConfig& cfg = {}) {
  std::vector<GrpoSequenceInput> inputs;
  inputs.reserve(batch.size());
  for (const auto& seq : batch) {
    if (seq.tokens.size() != seq.sample_logprobs.size())
      throw Error(Errc::TokenAlignmentMismatch, "tokens and sampling log-probs differ in length");
    inputs.push_back({seq.advantage, seq.sample_logprobs, sequence_log_probs(policy, params, seq.prompt, seq.tokens)});
  }
  return grpo_loss(inputs, policy.num_params(), cfg);
}

// ---------------------------------------------------------------------------
// Combined objective
// ---------------------------------------------------------------------------

inline double total_loss(double sft, double grpo, std::int64_t t, const ScheduleConfig& cfg = {}) {
  const double m = mu(t, cfg);
  return (1.0 - m) * grpo + m * sft;
}

inline LossValue total_loss(const LossValue& sft, const LossValue& grpo, std::int64_t t,
                            const ScheduleConfig& cfg = {}) {
  if (sft.grad.size() != grpo.grad.size()) throw Error(Errc::ShapeMismatch, "gradient sizes differ");
  const double m = mu(t, cfg);
  LossValue out;
  out.value = (1.0 - m) * grpo.value + m * sft.value;
  out.tokens = sft.tokens + grpo.tokens;
  out.grad.resize(sft.grad.size());
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] = (1.0 - m) * grpo.grad[i] + m * sft.grad[i];
  return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update, in place. An empty state is initialized to
/// zero moments of the right shape.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const OptimizerConfig& cfg) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "params and grads differ in size");
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(Errc::ShapeMismatch, "Adam state does not match parameter shape");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

}  // namespace mentra

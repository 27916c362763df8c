#pragma once

#include <cstdint>

#include "mentra/error.hpp"

namespace mentra {

/// Warmup-decay mixing weight between the SFT and RL losses.
struct ScheduleConfig {
  double mu_peak = 0.5;
  double mu_valley = 0.02;
  std::int64_t t_warmup = 200;
  std::int64_t t_decay = 400;

  void check() const {
    if (!(0.0 <= mu_valley && mu_valley < mu_peak && mu_peak <= 1.0))
      throw Error(Errc::ConfigError, "schedule: require 0 <= mu_valley < mu_peak <= 1");
    if (t_warmup < 1 || t_decay < 1) throw Error(Errc::ConfigError, "schedule: t_warmup and t_decay must be >= 1");
  }
};

/// mu(t) for t >= 1. Rises linearly from the valley to the peak over the
/// warmup window, falls back linearly over the decay window, then holds at
/// the valley.
inline double mu(std::int64_t t, const ScheduleConfig& cfg = {}) {
  if (t < 1) throw Error(Errc::InvalidStep, "schedule step must be >= 1, got " + std::to_string(t));
  const double span = cfg.mu_peak - cfg.mu_valley;
  if (t <= cfg.t_warmup)
    return cfg.mu_valley + span * (static_cast<double>(t) / static_cast<double>(cfg.t_warmup));
  if (t <= cfg.t_warmup + cfg.t_decay)
    return cfg.mu_peak -
           span * (static_cast<double>(t - cfg.t_warmup) / static_cast<double>(cfg.t_decay));
  return cfg.mu_valley;
}

/// Token-wise SFT weight p(1-p); largest where the policy is least certain.
inline double token_weight(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::DomainError, "token_weight needs p in [0,1]");
  return p * (1.0 - p);
}

}  // namespace mentra

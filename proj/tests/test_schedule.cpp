#include <gtest/gtest.h>

#include "mentra/schedule.hpp"

using namespace mentra;

TEST(Schedule, DefaultEndpoints) {
  EXPECT_NEAR(mu(200), 0.5, 1e-12);
  EXPECT_NEAR(mu(100), 0.26, 1e-12);
  EXPECT_NEAR(mu(600), 0.02, 1e-12);
  EXPECT_NEAR(mu(1), 0.02 + 0.48 / 200.0, 1e-12);
}

TEST(Schedule, ContinuousAtWarmupBoundary) {
  // Left and right pieces evaluated at the boundary agree; one step either
  // side moves by one slope increment.
  EXPECT_NEAR(mu(201) - mu(200), -0.48 / 400.0, 1e-12);
  EXPECT_NEAR(mu(200) - mu(199), 0.48 / 200.0, 1e-12);
}

TEST(Schedule, HeldAtValleyAfterDecay) {
  for (std::int64_t t : {601, 700, 10000}) EXPECT_EQ(mu(t), 0.02);
}

TEST(Schedule, RangeAndMonotonicity) {
  const ScheduleConfig cfg;
  for (std::int64_t t = 1; t <= 800; ++t) {
    const double m = mu(t);
    EXPECT_GE(m, cfg.mu_valley - 1e-15);
    EXPECT_LE(m, cfg.mu_peak + 1e-15);
    if (t > 1 && t <= cfg.t_warmup) {
      EXPECT_GE(m, mu(t - 1));
    }
    if (t > cfg.t_warmup + 1 && t <= cfg.t_warmup + cfg.t_decay) {
      EXPECT_LE(m, mu(t - 1));
    }
  }
}

TEST(Schedule, InvalidStep) {
  for (std::int64_t t : {0, -5}) {
    try {
      mu(t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidStep);
    }
  }
}

TEST(Schedule, ConfigInvariants) {
  ScheduleConfig c;
  c.mu_valley = 0.6;
  EXPECT_THROW(c.check(), Error);
  c = {};
  c.t_decay = 0;
  EXPECT_THROW(c.check(), Error);
  c = {};
  c.mu_peak = 1.0;
  c.mu_valley = 0.0;
  EXPECT_NO_THROW(c.check());
  EXPECT_EQ(mu(c.t_warmup, c), 1.0);
}

TEST(TokenWeight, Parabola) {
  EXPECT_EQ(token_weight(0.5), 0.25);
  EXPECT_EQ(token_weight(0.0), 0.0);
  EXPECT_EQ(token_weight(1.0), 0.0);
  EXPECT_NEAR(token_weight(0.2), 0.16, 1e-15);
  for (double p : {-0.1, 1.1}) {
    try {
      token_weight(p);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::DomainError);
    }
  }
}

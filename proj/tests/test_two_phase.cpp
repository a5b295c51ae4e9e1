// Copyright 2026 The Omega Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "omega/toy_sampling.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace
{

using omega::DiffusionSchedule;
using omega::GmmDenoiser;
using omega::Matrix;
using omega::Vector;

/// Two-component mixture over 3 frames x 2 channels.
GmmDenoiser trajectory_denoiser()
{
  omega::GaussianMixture g;
  Vector m0(6);
  m0 << 0.0, 0.0, 1.0, 0.0, 2.0, 0.0;
  Vector m1(6);
  m1 << 0.0, 1.0, 1.0, 1.5, 2.0, 2.0;
  g.weights = {0.5, 0.5};
  g.means = {m0, m1};
  g.covariances = {0.05 * Matrix::Identity(6, 6), 0.05 * Matrix::Identity(6, 6)};
  return GmmDenoiser(g, 3);
}

/// Pulls every free coordinate up.
class PushUp : public omega::GuidanceProvider
{
public:
  std::optional<omega::AgentGuidance> prepare(const omega::GuidanceQuery & q) override
  {
    if (q.phase == omega::Phase::kRolling) {
      const auto fr = q.frozen_for(q.agent);
      for (int i = 0; i < (q.tau - 1) * 2; ++i) {
        if (!fr[static_cast<size_t>(i)]) ++frozen_errors;
      }
      ++rolling_queries;
    }
    omega::AgentGuidance g;
    g.aux = Vector(0);
    g.objective = [](const Vector & z, double, bool) {
      omega::ObjectiveReport r;
      r.value = z.sum();
      r.gradient = Vector::Ones(z.size());
      return r;
    };
    return g;
  }

  int frozen_errors{0};
  int rolling_queries{0};
};

TEST(RollingSchedule, ExhaustiveSweep)
{
  for (int frames = 1; frames <= 8; ++frames) {
    for (int t_low = 0; t_low <= 5; ++t_low) {
      for (int tau = 1; tau <= frames; ++tau) {
        const auto s = omega::rolling_schedule(tau, t_low, frames);
        ASSERT_EQ(static_cast<int>(s.size()), frames);
        for (int f = 0; f < frames; ++f) EXPECT_EQ(s[static_cast<size_t>(f)], f < tau ? 0 : t_low);
      }
      EXPECT_THROW(omega::rolling_schedule(0, t_low, frames), std::invalid_argument);
      EXPECT_THROW(omega::rolling_schedule(frames + 1, t_low, frames), std::invalid_argument);
    }
  }
  EXPECT_THROW(omega::rolling_schedule(1, -1, 3), std::invalid_argument);
}

TEST(SamplerConfig, DefaultTLowIsTenPercent)
{
  EXPECT_EQ(omega::default_t_low(100), 10);
  EXPECT_EQ(omega::default_t_low(1000), 100);
  EXPECT_EQ(omega::default_t_low(5), 1);
  omega::SamplerConfig cfg;
  const DiffusionSchedule s(20, 1e-3, 0.2);
  EXPECT_EQ(cfg.resolved_t_low(s), 2);
  cfg.t_low = 21;
  EXPECT_THROW(cfg.validate(s), std::invalid_argument);
}

TEST(TwoPhase, ZeroBudgetIsBitExactUnguided)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  omega::SamplerConfig cfg;
  cfg.warmup_trust.kappa = 0.0;
  cfg.rolling_trust.kappa = 0.0;
  const auto ctx = omega::InpaintingContext::none(6, 2);
  PushUp push;
  for (int seed = 0; seed < 5; ++seed) {
    omega::Rng r1(seed);
    omega::Rng r2(seed);
    const auto a = omega::sample_two_phase(den, s, ctx, cfg, nullptr, r1);
    const auto b = omega::sample_two_phase(den, s, ctx, cfg, &push, r2);
    EXPECT_TRUE((a.x0.array() == b.x0.array()).all());
  }
}

TEST(TwoPhase, KnownEntriesAreExact)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  auto ctx = omega::InpaintingContext::none(6, 2);
  ctx.known(0, 0) = 0.3;
  ctx.known(1, 0) = -0.7;
  ctx.known(4, 1) = 2.25;
  ctx.mask(0, 0) = ctx.mask(1, 0) = ctx.mask(4, 1) = true;
  omega::SamplerConfig cfg;
  PushUp push;
  omega::Rng rng(3);
  const auto r = omega::sample_two_phase(den, s, ctx, cfg, &push, rng);
  EXPECT_EQ(r.x0(0, 0), 0.3);
  EXPECT_EQ(r.x0(1, 0), -0.7);
  EXPECT_EQ(r.x0(4, 1), 2.25);
  EXPECT_TRUE(r.x0.allFinite());
}

TEST(TwoPhase, RollingFreezesFinalizedFrames)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  const auto ctx = omega::InpaintingContext::none(6, 1);
  omega::SamplerConfig cfg;
  cfg.guide_warmup = false;
  PushUp push;
  omega::Rng rng(4);
  const Matrix x = omega::initial_noise(6, 1, rng);
  const Matrix low = omega::warmup_phase(x, ctx, den, s, cfg, nullptr, rng);
  omega::SamplerDiagnostics diag;
  omega::rolling_zero_phase(low, ctx, den, s, cfg, &push, rng, &diag);
  EXPECT_EQ(push.rolling_queries, 3);
  EXPECT_EQ(push.frozen_errors, 0);
  EXPECT_EQ(static_cast<int>(diag.rows.size()), 3);
}

TEST(TwoPhase, DiagnosticsRespectBudget)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  const auto ctx = omega::InpaintingContext::none(6, 2);
  omega::SamplerConfig cfg;
  cfg.warmup_trust.kappa = 0.1;
  cfg.rolling_trust.kappa = 0.2;
  PushUp push;
  omega::Rng rng(5);
  const auto r = omega::sample_two_phase(den, s, ctx, cfg, &push, rng);
  ASSERT_FALSE(r.diagnostics.rows.empty());
  for (const auto & row : r.diagnostics.rows) {
    const double kappa = row.phase == omega::Phase::kWarmup ? 0.1 : 0.2;
    EXPECT_LE(row.kl_used, kappa + 1e-9);
  }
  std::ostringstream csv;
  r.diagnostics.write_csv(csv);
  EXPECT_EQ(csv.str().rfind("phase,step,agent,kl_used", 0), 0u);
}

TEST(TwoPhase, MultiUpdateRunsAncestralSteps)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  const auto ctx = omega::InpaintingContext::none(6, 1);
  omega::SamplerConfig cfg;
  cfg.multi_update = true;
  PushUp push;
  omega::Rng rng(6);
  const auto r = omega::sample_two_phase(den, s, ctx, cfg, &push, rng);
  EXPECT_TRUE(r.x0.allFinite());
  // 3 frames x t_low rolling levels on top of the warmup rows.
  int rolling = 0;
  for (const auto & row : r.diagnostics.rows) rolling += row.phase == omega::Phase::kRolling;
  EXPECT_EQ(rolling, 3 * 4);
}

TEST(TwoPhase, GuidanceMovesSamples)
{
  const auto den = trajectory_denoiser();
  const DiffusionSchedule s(40, 1e-3, 0.2);
  const auto ctx = omega::InpaintingContext::none(6, 1);
  omega::SamplerConfig cfg;
  cfg.warmup_trust.lambda = cfg.rolling_trust.lambda = 0.0;
  PushUp push;
  double plain = 0.0;
  double guided = 0.0;
  for (int seed = 0; seed < 40; ++seed) {
    omega::Rng r1(seed);
    omega::Rng r2(seed);
    plain += omega::sample_two_phase(den, s, ctx, cfg, nullptr, r1).x0.sum();
    guided += omega::sample_two_phase(den, s, ctx, cfg, &push, r2).x0.sum();
  }
  EXPECT_GT(guided, plain + 1.0);
}

TEST(InpaintingContext, RejectsBadShapes)
{
  auto ctx = omega::InpaintingContext::none(6, 2);
  EXPECT_NO_THROW(ctx.validate(6));
  EXPECT_THROW(ctx.validate(4), std::invalid_argument);
  ctx.known(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ctx.validate(6), std::invalid_argument);
}

TEST(ToySampling, RegimesParse)
{
  EXPECT_EQ(omega::parse_toy_regime("omega"), omega::ToyRegime::kOmega);
  EXPECT_EQ(omega::parse_toy_regime("reward_only"), omega::ToyRegime::kRewardOnly);
  EXPECT_EQ(omega::parse_toy_regime("unguided"), omega::ToyRegime::kUnguided);
  EXPECT_THROW(omega::parse_toy_regime("dps"), std::invalid_argument);
  const auto cfg = omega::toy_sampler_config(omega::ToyRegime::kRewardOnly);
  EXPECT_FALSE(cfg.solver.use_stabilizer);
  EXPECT_TRUE(std::isinf(cfg.rolling_trust.kappa));
}

TEST(ToySampling, OmegaFavorsGuidedMode)
{
  const auto world = omega::make_toy_world(0);
  const DiffusionSchedule s(100, 1e-3, 0.2);
  const GmmDenoiser den(world.target);
  omega::Rng r1(11);
  omega::Rng r2(11);
  const auto cu = omega::toy_sampler_config(omega::ToyRegime::kUnguided);
  const auto co = omega::toy_sampler_config(omega::ToyRegime::kOmega);
  const auto su = omega::mode_stats(world.target, omega::sample_toy(world, den, s, omega::ToyRegime::kUnguided, cu, 400, r1));
  const auto so = omega::mode_stats(world.target, omega::sample_toy(world, den, s, omega::ToyRegime::kOmega, co, 400, r2));
  const auto k = static_cast<size_t>(world.guided_mode());
  EXPECT_GT(so.mass[k], su.mass[k]);
  EXPECT_GE(so.within_fraction, 0.85);
}

}  // namespace

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

#ifndef OMEGA__TOY_SAMPLING_HPP_
#define OMEGA__TOY_SAMPLING_HPP_

#include "omega/toy.hpp"
#include "omega/two_phase.hpp"

#include <limits>
#include <string>
#include <string_view>

namespace omega
{

/// Guidance by a smooth reward on the raw sample vector.
class RewardGuidance : public GuidanceProvider
{
public:
  using Reward = std::function<double(const Vector &)>;
  using Gradient = std::function<Vector(const Vector &)>;

  RewardGuidance(Reward reward, Gradient gradient)
  : reward_(std::move(reward)), gradient_(std::move(gradient))
  {
  }

  std::optional<AgentGuidance> prepare(const GuidanceQuery &) override
  {
    AgentGuidance g;
    g.aux = Vector(0);
    g.objective = [this](const Vector & z, double, bool) {
      ObjectiveReport r;
      r.value = reward_(z);
      r.gradient = gradient_(z);
      return r;
    };
    return g;
  }

private:
  Reward reward_;
  Gradient gradient_;
};

enum class ToyRegime { kUnguided, kRewardOnly, kOmega };

inline ToyRegime parse_toy_regime(std::string_view name)
{
  if (name == "unguided") return ToyRegime::kUnguided;
  if (name == "reward" || name == "reward_only") return ToyRegime::kRewardOnly;
  if (name == "omega") return ToyRegime::kOmega;
  throw std::invalid_argument("unknown toy regime '" + std::string(name) + "'");
}

inline const char * to_string(const ToyRegime r)
{
  switch (r) {
    case ToyRegime::kUnguided:
      return "unguided";
    case ToyRegime::kRewardOnly:
      return "reward_only";
    case ToyRegime::kOmega:
      return "omega";
  }
  return "?";
}

/// Sampler settings for a regime. Reward-only drops the stabilizer and the
/// ball so the anchor jumps to the reward maximizer.
inline SamplerConfig toy_sampler_config(const ToyRegime regime, const double kappa = 0.05)
{
  SamplerConfig cfg;
  cfg.warmup_trust.lambda = 0.0;
  cfg.rolling_trust.lambda = 0.0;
  cfg.warmup_trust.kappa = kappa;
  cfg.rolling_trust.kappa = kappa;
  if (regime == ToyRegime::kRewardOnly) {
    cfg.warmup_trust.kappa = std::numeric_limits<double>::infinity();
    cfg.rolling_trust.kappa = std::numeric_limits<double>::infinity();
    cfg.solver.use_stabilizer = false;
  }
  return cfg;
}

/// n independent two-phase samples (columns).
inline Matrix sample_toy(
  const ToyWorld & world, const Denoiser & denoiser, const DiffusionSchedule & sched,
  const ToyRegime regime, const SamplerConfig & cfg, const int n, Rng & rng,
  SamplerDiagnostics * diag = nullptr)
{
  if (n < 0) throw std::invalid_argument("sample count must be >= 0");
  RewardGuidance guidance(
    [&world](const Vector & x) { return world.reward(x); },
    [&world](const Vector & x) { return world.reward_gradient(x); });
  GuidanceProvider * provider = regime == ToyRegime::kUnguided ? nullptr : &guidance;
  const auto ctx = InpaintingContext::none(denoiser.dim(), 1);
  Matrix out(denoiser.dim(), n);
  for (int i = 0; i < n; ++i) {
    auto r = sample_two_phase(denoiser, sched, ctx, cfg, provider, rng);
    out.col(i) = r.x0.col(0);
    if (diag) {
      diag->nonconverged += r.diagnostics.nonconverged;
      if (i == 0) diag->rows = std::move(r.diagnostics.rows);
    }
  }
  return out;
}

}  // namespace omega

#endif  // OMEGA__TOY_SAMPLING_HPP_

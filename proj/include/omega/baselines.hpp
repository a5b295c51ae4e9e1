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

#ifndef OMEGA__BASELINES_HPP_
#define OMEGA__BASELINES_HPP_

#include "omega/diffusion.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace omega
{

/// Reference guidance strategies that modify the reverse step directly.
enum class BaselineKind { kDps, kCtg, kGhcClip };

inline BaselineKind parse_baseline_kind(std::string_view name)
{
  if (name == "dps") return BaselineKind::kDps;
  if (name == "ctg") return BaselineKind::kCtg;
  if (name == "ghc_clip") return BaselineKind::kGhcClip;
  throw std::invalid_argument("unknown baseline guidance '" + std::string(name) + "'");
}

inline const char * to_string(const BaselineKind k)
{
  switch (k) {
    case BaselineKind::kDps:
      return "dps";
    case BaselineKind::kCtg:
      return "ctg";
    case BaselineKind::kGhcClip:
      return "ghc_clip";
  }
  return "?";
}

struct BaselineGuidance
{
  BaselineKind kind{BaselineKind::kDps};
  double scale{1.0};
  /// Objective gradient in sample space (dps, ctg).
  std::function<Vector(const Vector &)> gradient;
  /// Box for ghc_clip.
  Vector lower;
  Vector upper;
  /// Central difference step for the clean-estimate Jacobian.
  double fd_step{1e-4};

  void validate(const Eigen::Index dim) const
  {
    if (!std::isfinite(scale) || scale < 0.0) throw std::invalid_argument("baseline scale must be >= 0");
    if (kind == BaselineKind::kGhcClip) {
      if (lower.size() != dim || upper.size() != dim) throw std::invalid_argument("ghc_clip box has the wrong size");
      if ((lower.array() > upper.array()).any()) throw std::invalid_argument("ghc_clip box is empty");
    } else {
      if (!gradient) throw std::invalid_argument("baseline guidance needs a gradient");
      if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be > 0");
    }
  }
};

/// (d x~0 / d x_t)^T g by central differences.
inline Vector clean_estimate_vjp(
  const Denoiser & denoiser, const Vector & x_t, const int t, const DiffusionSchedule & sched,
  const Vector & g, const double h)
{
  Vector out(x_t.size());
  Vector xp = x_t;
  for (Eigen::Index i = 0; i < x_t.size(); ++i) {
    xp(i) = x_t(i) + h;
    const Vector up = denoiser.predict_clean(xp, t, sched);
    xp(i) = x_t(i) - h;
    const Vector dn = denoiser.predict_clean(xp, t, sched);
    xp(i) = x_t(i);
    out(i) = g.dot(up - dn) / (2.0 * h);
  }
  return out;
}

/// One guided ancestral step. The noise draw matches reverse_step, so a
/// zero gradient (or an unbounded box) reproduces the unguided step.
inline Vector baseline_step(
  const Denoiser & denoiser, const Vector & x_t, const int t, const DiffusionSchedule & sched,
  const BaselineGuidance & g, Rng & rng)
{
  const Vector x0 = denoiser.predict_clean(x_t, t, sched);
  Vector mean = reverse_kernel_mean(x0, x_t, t, sched);
  switch (g.kind) {
    case BaselineKind::kDps: {
      const Vector grad = g.gradient(x0);
      if (!grad.isZero(0.0)) mean += g.scale * clean_estimate_vjp(denoiser, x_t, t, sched, grad, g.fd_step);
      break;
    }
    case BaselineKind::kCtg: {
      const double s2 = sched.sigma(t) * sched.sigma(t);
      mean += g.scale * s2 * g.gradient(mean);
      break;
    }
    case BaselineKind::kGhcClip:
      break;
  }
  const double sigma = sched.sigma(t);
  Vector x = sigma == 0.0 ? mean : Vector(mean + sigma * standard_normal(rng, mean.size()));
  if (g.kind == BaselineKind::kGhcClip) x = x.cwiseMax(g.lower).cwiseMin(g.upper);
  return x;
}

inline Vector sample_baseline(
  const Denoiser & denoiser, const DiffusionSchedule & sched, const BaselineGuidance & g, Rng & rng)
{
  g.validate(denoiser.dim());
  Vector x = standard_normal(rng, denoiser.dim());
  for (int t = sched.steps(); t >= 1; --t) x = baseline_step(denoiser, x, t, sched, g, rng);
  return x;
}

}  // namespace omega

#endif  // OMEGA__BASELINES_HPP_

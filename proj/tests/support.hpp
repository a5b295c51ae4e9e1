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

#ifndef OMEGA_TESTS__SUPPORT_HPP_
#define OMEGA_TESTS__SUPPORT_HPP_

#include "omega/guidance.hpp"
#include "omega/routes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace omega::testing
{

struct GuidanceInstance
{
  Vector decision;
  GuidanceSpec spec;
  GuidanceContext ctx;
};

/// Random small single-agent objective: up to 8 frames, up to two other
/// agents, a curved reference, some anchored states. Speeds stay away from
/// the heading/road activation threshold so the objective is smooth around
/// the sample.
inline GuidanceInstance random_guidance_instance(Rng & rng, const bool log_barrier = false)
{
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };
  GuidanceInstance inst;
  const int frames = std::uniform_int_distribution<int>(2, 8)(rng);
  const int others = std::uniform_int_distribution<int>(0, 2)(rng);
  auto & spec = inst.spec;
  spec.w_a = range(0.0, 1.0);
  spec.w_ad = range(0.0, 1.0);
  spec.w_delta = range(0.0, 1.0);
  spec.w_deltad = range(0.0, 1.0);
  spec.w_h = range(0.1, 5.0);
  spec.w_g = range(0.1, 50.0);
  spec.psi_max = range(0.1, 0.5);
  spec.b_max = range(0.5, 2.0);
  spec.log_barrier = log_barrier;
  auto & ctx = inst.ctx;
  ctx.dt = 0.5;
  ctx.length = range(3.5, 5.5);
  ctx.width = range(1.6, 2.2);
  ctx.lambda = range(0.0, 2.0);
  ctx.valid.assign(static_cast<size_t>(frames), 1);
  if (frames > 3 && uni(rng) < 0.3) ctx.valid[1] = 0;

  // Reference: a gently curving polyline.
  Polyline ref;
  const double curv = range(-0.05, 0.05);
  double x = -10.0;
  double y = 0.0;
  double h = range(-0.3, 0.3);
  for (int k = 0; k < 80; ++k) {
    ref.push_back({x, y, wrap_angle(h)});
    x += std::cos(h);
    y += std::sin(h);
    h += curv;
  }
  const std::vector<Polyline> candidates{ref};

  Matrix states(frames, kMotionDim);
  for (int f = 0; f < frames; ++f) {
    const bool slow = uni(rng) < 0.15;
    states(f, kPx) = range(0.0, 30.0);
    states(f, kPy) = range(-3.0, 3.0);
    states(f, kPsi) = range(-0.9, 0.9);
    states(f, kSpeed) = slow ? range(0.0, 0.3) : range(1.0, 12.0);
  }
  ControlSequence u;
  u.wheelbase = spec.wheelbase_ratio * ctx.length;
  for (int i = 0; i + 1 < frames; ++i) {
    u.accel.push_back(range(-3.0, 3.0));
    u.steer.push_back(range(-0.4, 0.4));
  }
  inst.decision = pack_decision(states, u);
  for (int f = 0; f < frames; ++f) {
    ctx.refs.push_back(nearest_reference({states(f, kPx), states(f, kPy)}, candidates));
  }
  for (int o = 0; o < others; ++o) {
    OtherAgentTrack tr;
    tr.length = range(3.5, 5.5);
    tr.width = range(1.6, 2.2);
    tr.states = Matrix(frames, kMotionDim);
    tr.active.assign(static_cast<size_t>(frames), 1);
    for (int f = 0; f < frames; ++f) {
      tr.states(f, kPx) = states(f, kPx) + range(-5.0, 5.0);
      tr.states(f, kPy) = states(f, kPy) + range(-2.5, 2.5);
      tr.states(f, kPsi) = range(-1.0, 1.0);
      tr.states(f, kSpeed) = range(0.0, 10.0);
      if (uni(rng) < 0.2) tr.active[static_cast<size_t>(f)] = 0;
    }
    ctx.others.push_back(std::move(tr));
  }
  if (uni(rng) < 0.5) {
    AnchoredState as;
    as.frame = frames - 1;
    as.state = {states(frames - 1, kPx) + range(-1, 1), states(frames - 1, kPy) + range(-1, 1),
                states(frames - 1, kPsi) + range(-0.2, 0.2), states(frames - 1, kSpeed) + range(-1, 1)};
    spec.anchored_states.push_back(as);
  }
  return inst;
}

/// Max over coordinates of |a - b| / max(|a|, |b|, 1) between an analytic
/// gradient and central differences of `f`.
inline double max_fd_relative_error(
  const std::function<double(const Vector &)> & f, const Vector & x, const Vector & analytic,
  const double h = 1e-5)
{
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector p = x;
    Vector m = x;
    p(i) += h;
    m(i) -= h;
    const double fd = (f(p) - f(m)) / (2.0 * h);
    const double a = analytic(i);
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0}));
  }
  return worst;
}

}  // namespace omega::testing

#endif  // OMEGA_TESTS__SUPPORT_HPP_

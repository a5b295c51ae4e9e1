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

#ifndef OMEGA__TOY_HPP_
#define OMEGA__TOY_HPP_

#include "omega/diffusion.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace omega
{

/// Five-mode planar mixture with a single guidance point.
struct ToyWorld
{
  GaussianMixture target;
  Vector guidance_point;
  double reward_scale{1.0};
  double mode_std{0.25};

  /// R(x) = -0.5 * s * |x - g|^2.
  double reward(const Vector & x) const
  {
    return -0.5 * reward_scale * (x - guidance_point).squaredNorm();
  }
  Vector reward_gradient(const Vector & x) const { return -reward_scale * (x - guidance_point); }

  /// Index of the mode whose mean is nearest the guidance point.
  int guided_mode() const
  {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < target.size(); ++k) {
      const double d = (target.means[k] - guidance_point).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    return best;
  }
};

struct ToyWorldConfig
{
  double ring_radius{2.0};
  double mode_std{0.25};
  double guidance_radius{3.5};
  double guidance_offset{0.2};
  double reward_scale{1.0};
};

inline ToyWorld make_toy_world(const uint64_t seed = 0, const ToyWorldConfig & cfg = {})
{
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  const double rotation = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi / 5.0)(rng);
  ToyWorld world;
  world.mode_std = cfg.mode_std;
  world.reward_scale = cfg.reward_scale;
  for (int k = 0; k < 5; ++k) {
    const double angle = rotation + 2.0 * std::numbers::pi * k / 5.0 + jitter(rng);
    Vector mean(2);
    mean << cfg.ring_radius * std::cos(angle), cfg.ring_radius * std::sin(angle);
    world.target.weights.push_back(0.2);
    world.target.means.push_back(mean);
    world.target.covariances.push_back(Matrix::Identity(2, 2) * cfg.mode_std * cfg.mode_std);
  }
  const double g_angle = std::atan2(world.target.means[0](1), world.target.means[0](0)) +
                         cfg.guidance_offset;
  world.guidance_point.resize(2);
  world.guidance_point << cfg.guidance_radius * std::cos(g_angle),
    cfg.guidance_radius * std::sin(g_angle);
  world.target.validate();
  return world;
}

/// Draws n points from the mixture; returns a dim x n matrix.
inline Matrix sample_mixture(const GaussianMixture & gmm, const int n, Rng & rng)
{
  gmm.validate();
  std::discrete_distribution<int> pick(gmm.weights.begin(), gmm.weights.end());
  std::vector<Matrix> chol;
  for (const auto & cov : gmm.covariances) chol.push_back(Eigen::LLT<Matrix>(cov).matrixL());
  Matrix out(gmm.dim(), n);
  for (int i = 0; i < n; ++i) {
    const int k = pick(rng);
    out.col(i) = gmm.means[static_cast<size_t>(k)] + chol[static_cast<size_t>(k)] * standard_normal(rng, gmm.dim());
  }
  return out;
}

/// Nearest mode within `radius_sigmas` Mahalanobis units, or -1 when the
/// point lies outside every mode.
inline int assign_mode(const GaussianMixture & gmm, const Vector & x, const double radius_sigmas = 3.0)
{
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < gmm.size(); ++k) {
    const Vector r = x - gmm.means[k];
    const double m = std::sqrt(r.dot(Eigen::LLT<Matrix>(gmm.covariances[k]).solve(r)));
    if (m <= radius_sigmas && m < best_d) {
      best_d = m;
      best = static_cast<int>(k);
    }
  }
  return best;
}

struct ModeStats
{
  std::vector<double> mass;
  double drift_fraction{0.0};
  double within_fraction{0.0};
  int total{0};
};

inline ModeStats mode_stats(const GaussianMixture & gmm, const Matrix & samples)
{
  ModeStats s;
  s.mass.assign(gmm.size(), 0.0);
  s.total = static_cast<int>(samples.cols());
  if (s.total == 0) return s;
  int drift = 0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const int k = assign_mode(gmm, samples.col(i));
    if (k < 0) {
      ++drift;
    } else {
      s.mass[static_cast<size_t>(k)] += 1.0;
    }
  }
  for (double & m : s.mass) m /= s.total;
  s.drift_fraction = static_cast<double>(drift) / s.total;
  s.within_fraction = 1.0 - s.drift_fraction;
  return s;
}

}  // namespace omega

#endif  // OMEGA__TOY_HPP_

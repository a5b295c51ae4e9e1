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

#ifndef OMEGA__SOLVER_HPP_
#define OMEGA__SOLVER_HPP_

#include "omega/diffusion.hpp"
#include "omega/guidance.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace omega
{

struct TrustRegionParams
{
  /// KL budget per step. Infinity removes the ball.
  double kappa{0.5};
  /// Weight of the smoothness reward.
  double lambda{1.0};
  /// Explicit Euclidean radius; supersedes kappa when set.
  std::optional<double> rho;

  void validate() const
  {
    if (!(kappa >= 0.0) || std::isnan(kappa)) throw std::invalid_argument("kappa must be >= 0");
    if (!std::isfinite(lambda) || lambda < 0.0) throw std::invalid_argument("lambda must be finite and >= 0");
    if (rho && !(*rho >= 0.0)) throw std::invalid_argument("rho must be >= 0");
  }
};

struct SolverConfig
{
  int max_iters{200};
  double grad_tol{1e-6};
  double step_init{1.0};
  double backtrack_factor{0.5};
  double armijo{1e-4};
  int max_backtracks{50};
  /// Include the -c |x - x~|^2 stabilizer with c = A^2 / (2 sigma^2).
  bool use_stabilizer{true};
  /// At sigma = 0 without an explicit radius, return the anchor unchanged.
  bool skip_zero_sigma{true};
};

/// A_t^2 / (2 sigma_t^2) |a - b|^2.
inline double kernel_kl(const Vector & a, const Vector & b, const int t, const DiffusionSchedule & sched)
{
  check_same_shape(a, b, "kernel_kl");
  sched.check_step(t);
  const double sigma = sched.sigma(t);
  if (!(sigma > 0.0)) throw std::invalid_argument("kernel_kl: sigma_t = 0, KL undefined");
  const double a_t = sched.a_coef(t);
  return a_t * a_t / (2.0 * sigma * sigma) * (a - b).squaredNorm();
}

/// KL between N(mu_a, sigma^2 I) and N(mu_b, sigma^2 I).
inline double gaussian_kl_equal_cov(const Vector & mu_a, const Vector & mu_b, const double sigma)
{
  check_same_shape(mu_a, mu_b, "gaussian_kl_equal_cov");
  const Vector d = mu_a - mu_b;
  return 0.5 * d.dot(d / (sigma * sigma));
}

inline double trust_radius(const int t, const TrustRegionParams & params, const DiffusionSchedule & sched)
{
  if (params.rho) return *params.rho;
  sched.check_step(t);
  const double sigma = sched.sigma(t);
  if (!(sigma > 0.0)) throw std::invalid_argument("trust_radius: sigma_t = 0 needs an explicit rho");
  if (std::isinf(params.kappa)) return std::numeric_limits<double>::infinity();
  return std::sqrt(2.0 * params.kappa) * sigma / std::abs(sched.a_coef(t));
}

/// Objective over z = [anchor; aux]. `lambda` scales the smoothness reward,
/// `record` requests residual groups.
using AnchorObjective = std::function<ObjectiveReport(const Vector & z, double lambda, bool record)>;

struct AnchorProblem
{
  Vector anchor;
  Vector aux;
  /// Anchor entries held at their initial value (empty: all free).
  std::vector<uint8_t> frozen;
  AnchorObjective objective;
  /// Penalty settings for multiplier estimates.
  double w_g{0.0};
  bool log_barrier{false};
  double barrier_epsilon{0.05};
};

struct ReanchorResult
{
  Vector x_hat;
  Vector aux;
  /// Guidance value minus stabilizer at the solution.
  double objective_value{0.0};
  /// Same quantity at the initialization.
  double initial_value{0.0};
  /// Guidance part only.
  double guidance_value{0.0};
  double stabilizer{0.0};
  double kl_used{0.0};
  double radius{0.0};
  ResidualGroups residuals;
  ResidualGroups multipliers;
  int iterations{0};
  bool converged{false};
  bool skipped{false};
};

/// mu = w_g * pen'(g) for every inequality residual; zero when inactive under
/// the hinge.
inline ResidualGroups estimate_multipliers(
  const ResidualGroups & residuals, const double w_g, const bool log_barrier = false,
  const double barrier_epsilon = 0.05)
{
  GuidanceSpec shape;
  shape.log_barrier = log_barrier;
  shape.barrier_epsilon = barrier_epsilon;
  ResidualGroups mu;
  auto fill = [&](const std::vector<ResidualEntry> & src, std::vector<ResidualEntry> & dst) {
    for (const auto & e : src) dst.push_back({e.frame, e.index, w_g * inequality_penalty(e.value, shape).slope});
  };
  fill(residuals.head, mu.head);
  fill(residuals.road, mu.road);
  fill(residuals.safe, mu.safe);
  fill(residuals.pair, mu.pair);
  return mu;
}

/// Maximizes objective(z) - c |x - x~|^2 over |x - x~| <= radius by projected
/// gradient ascent with Barzilai-Borwein steps and Armijo backtracking.
/// Starts at x~, so the returned value never falls below the initial one.
inline ReanchorResult solve_anchor(
  const AnchorProblem & problem, const double stabilizer, const double radius, const double lambda,
  const SolverConfig & cfg)
{
  const Eigen::Index n = problem.anchor.size();
  const Eigen::Index m = problem.aux.size();
  if (!problem.frozen.empty() && static_cast<Eigen::Index>(problem.frozen.size()) != n) {
    throw std::invalid_argument("frozen mask length differs from anchor length");
  }
  if (!problem.objective) throw std::invalid_argument("anchor problem has no objective");
  if (!(radius >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  const Vector & x0 = problem.anchor;

  auto project = [&](Vector & z) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!problem.frozen.empty() && problem.frozen[static_cast<size_t>(i)]) z(i) = x0(i);
    }
    if (std::isfinite(radius)) {
      const double norm = (z.head(n) - x0).norm();
      if (norm > radius) z.head(n) = x0 + (z.head(n) - x0) * (radius / norm);
    }
  };
  struct Eval
  {
    double value;
    double guidance;
    Vector grad;
  };
  auto evaluate = [&](const Vector & z) {
    ObjectiveReport rep = problem.objective(z, lambda, false);
    if (!std::isfinite(rep.value)) throw std::runtime_error("reanchor: non-finite objective value");
    if (rep.gradient.size() != n + m) throw std::runtime_error("reanchor: gradient length mismatch");
    const Vector d = z.head(n) - x0;
    Eval e{rep.value - stabilizer * d.squaredNorm(), rep.value, std::move(rep.gradient)};
    e.grad.head(n) -= 2.0 * stabilizer * d;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!problem.frozen.empty() && problem.frozen[static_cast<size_t>(i)]) e.grad(i) = 0.0;
    }
    return e;
  };

  ReanchorResult res;
  res.radius = radius;
  Vector z(n + m);
  z << x0, problem.aux;
  Eval cur = evaluate(z);
  res.initial_value = cur.value;

  if (radius > 0.0) {
    double step = cfg.step_init;
    Vector prev_z;
    Vector prev_g;
    for (int it = 0; it < cfg.max_iters; ++it) {
      Vector probe = z + cur.grad;
      project(probe);
      if ((probe - z).lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
        res.converged = true;
        break;
      }
      if (it > 0) {
        const Vector dz = z - prev_z;
        const Vector dg = cur.grad - prev_g;
        const double curv = -dz.dot(dg);
        if (curv > 0.0) step = std::clamp(dz.squaredNorm() / curv, 1e-10, 1e6);
      }
      bool accepted = false;
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
        Vector cand = z + step * cur.grad;
        project(cand);
        const Vector move = cand - z;
        Eval next = evaluate(cand);
        if (next.value >= cur.value + cfg.armijo * cur.grad.dot(move) && next.value >= cur.value) {
          prev_z = z;
          prev_g = cur.grad;
          z = std::move(cand);
          cur = std::move(next);
          accepted = true;
          break;
        }
        step *= cfg.backtrack_factor;
      }
      res.iterations = it + 1;
      if (!accepted) {
        // No ascent step found: stationary up to numerical precision.
        res.converged = true;
        break;
      }
    }
  } else {
    res.converged = true;
  }

  res.x_hat = z.head(n);
  res.aux = z.tail(m);
  const ObjectiveReport final_rep = problem.objective(z, lambda, true);
  const double d2 = (res.x_hat - x0).squaredNorm();
  res.guidance_value = final_rep.value;
  res.stabilizer = stabilizer;
  res.objective_value = final_rep.value - stabilizer * d2;
  res.kl_used = stabilizer * d2;
  res.residuals = final_rep.residuals;
  res.multipliers =
    estimate_multipliers(res.residuals, problem.w_g, problem.log_barrier, problem.barrier_epsilon);
  return res;
}

/// KL-bounded re-anchoring at diffusion step t.
inline ReanchorResult reanchor(
  const AnchorProblem & problem, const int t, const DiffusionSchedule & sched,
  const TrustRegionParams & params, const SolverConfig & cfg = {})
{
  params.validate();
  sched.check_step(t);
  const double sigma = sched.sigma(t);
  if (!(sigma > 0.0) && !params.rho && cfg.skip_zero_sigma && cfg.use_stabilizer) {
    ReanchorResult res;
    res.x_hat = problem.anchor;
    res.aux = problem.aux;
    Vector z(problem.anchor.size() + problem.aux.size());
    z << problem.anchor, problem.aux;
    const auto rep = problem.objective(z, params.lambda, true);
    res.objective_value = res.initial_value = res.guidance_value = rep.value;
    res.residuals = rep.residuals;
    res.multipliers =
      estimate_multipliers(res.residuals, problem.w_g, problem.log_barrier, problem.barrier_epsilon);
    res.converged = true;
    res.skipped = true;
    return res;
  }
  double radius = std::numeric_limits<double>::infinity();
  if (params.rho) {
    radius = *params.rho;
  } else if (sigma > 0.0) {
    radius = trust_radius(t, params, sched);
  } else if (!std::isinf(params.kappa)) {
    throw std::invalid_argument("reanchor: sigma_t = 0 with a finite KL budget needs rho");
  }
  double c = 0.0;
  if (cfg.use_stabilizer && sigma > 0.0) {
    const double a_t = sched.a_coef(t);
    c = a_t * a_t / (2.0 * sigma * sigma);
  }
  ReanchorResult res = solve_anchor(problem, c, radius, params.lambda, cfg);
  if (sigma > 0.0) res.kl_used = kernel_kl(res.x_hat, problem.anchor, t, sched);
  return res;
}

/// One diagnostics row: phase, step, agent, kl_used, value, max_violation,
/// iterations.
inline void write_diagnostic_row(
  std::ostream & out, const std::string & phase, const int step, const int agent,
  const ReanchorResult & r)
{
  out << phase << ',' << step << ',' << agent << ',' << r.kl_used << ',' << r.objective_value << ','
      << r.residuals.max_violation() << ',' << r.iterations << '\n';
}

}  // namespace omega

#endif  // OMEGA__SOLVER_HPP_

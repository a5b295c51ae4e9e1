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

#ifndef OMEGA__TWO_PHASE_HPP_
#define OMEGA__TWO_PHASE_HPP_

#include "omega/diffusion.hpp"
#include "omega/solver.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omega
{

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-frame step indices after the rolling update of physical index `tau`
/// (1-based): frames 1..tau at 0, the rest at t_low.
inline std::vector<int> rolling_schedule(const int tau, const int t_low, const int frames)
{
  if (frames < 1) throw std::invalid_argument("rolling_schedule: horizon must be >= 1");
  if (tau < 1 || tau > frames) {
    throw std::invalid_argument(
      "rolling_schedule: tau " + std::to_string(tau) + " outside [1, " + std::to_string(frames) + "]");
  }
  if (t_low < 0) throw std::invalid_argument("rolling_schedule: t_low must be >= 0");
  std::vector<int> out(static_cast<size_t>(frames), t_low);
  for (int f = 0; f < tau; ++f) out[static_cast<size_t>(f)] = 0;
  return out;
}

/// ceil(0.1 T), at least 1.
inline int default_t_low(const int steps) { return std::max(1, static_cast<int>(std::ceil(0.1 * steps))); }

enum class Phase { kWarmup, kRolling };

inline const char * to_string(const Phase p) { return p == Phase::kWarmup ? "warmup" : "rolling"; }

/// Known entries (columns = agents, rows = denoiser coordinates) and their
/// clean values.
struct InpaintingContext
{
  Matrix known;
  Mask mask;

  static InpaintingContext none(const Eigen::Index dim, const Eigen::Index agents)
  {
    return {Matrix::Zero(dim, agents), Mask::Constant(dim, agents, false)};
  }

  void validate(const Eigen::Index dim) const
  {
    if (known.rows() != dim || mask.rows() != dim || known.cols() != mask.cols() || known.cols() < 1) {
      throw std::invalid_argument("inpainting context shape does not match the denoiser");
    }
    if (!known.allFinite()) throw std::invalid_argument("inpainting context holds non-finite values");
  }
};

struct GuidanceQuery
{
  Phase phase;
  /// Diffusion level used for the prediction (t in warmup, t_low or the
  /// current frame level in rolling).
  int t;
  /// 1-based rolling index; 0 in warmup.
  int tau;
  int agent;
  /// Clean estimates of every agent at this step.
  const Matrix * anchors;
  const DiffusionSchedule * sched;
  const TrustRegionParams * trust;
  const SolverConfig * solver;
  /// Frozen anchor entries of any agent at this step.
  std::function<std::vector<uint8_t>(int)> frozen_for;
};

/// Objective and settings for one agent's anchor problem. The sampler owns
/// the anchor itself.
struct AgentGuidance
{
  AnchorObjective objective;
  Vector aux;
  double w_g{0.0};
  bool log_barrier{false};
  double barrier_epsilon{0.05};
  /// Result computed by the provider itself (joint solves).
  std::optional<ReanchorResult> solved;
};

class GuidanceProvider
{
public:
  virtual ~GuidanceProvider() = default;
  /// Empty when the agent is not guided at this step.
  virtual std::optional<AgentGuidance> prepare(const GuidanceQuery & query) = 0;
  /// Called once per rolling index before any agent is prepared.
  virtual void begin_step(Phase, int /*t*/, int /*tau*/, const Matrix & /*anchors*/) {}
};

struct SamplerConfig
{
  /// 0 selects ceil(0.1 T).
  int t_low{0};
  TrustRegionParams warmup_trust;
  TrustRegionParams rolling_trust;
  SolverConfig solver;
  bool guide_warmup{true};
  bool guide_rolling{true};
  /// Several ancestral updates per rolling frame instead of one jump.
  bool multi_update{false};

  int resolved_t_low(const DiffusionSchedule & sched) const
  {
    const int t = t_low == 0 ? default_t_low(sched.steps()) : t_low;
    if (t < 1 || t > sched.steps()) {
      throw std::invalid_argument(
        "t_low " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps()) + "]");
    }
    return t;
  }

  void validate(const DiffusionSchedule & sched) const
  {
    resolved_t_low(sched);
    warmup_trust.validate();
    rolling_trust.validate();
    if (solver.max_iters < 0) throw std::invalid_argument("solver max_iters must be >= 0");
  }
};

struct DiagnosticRow
{
  Phase phase;
  int step;
  int agent;
  double kl_used;
  double value;
  double max_violation;
  int iterations;
  bool converged;
};

struct SamplerDiagnostics
{
  std::vector<DiagnosticRow> rows;
  int nonconverged{0};

  void write_csv(std::ostream & out) const
  {
    out << "phase,step,agent,kl_used,value,max_violation,iterations,converged\n";
    for (const auto & r : rows) {
      out << to_string(r.phase) << ',' << r.step << ',' << r.agent << ',' << r.kl_used << ',' << r.value
          << ',' << r.max_violation << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
  }

  double total_kl() const
  {
    double s = 0.0;
    for (const auto & r : rows) s += r.kl_used;
    return s;
  }
};

namespace detail
{
/// Known entries of column `a` at level t (clean at t = 0). Noise is drawn
/// only for columns with known entries.
inline void impose_known(
  Matrix & x, const InpaintingContext & ctx, const Eigen::Index a, const int t,
  const DiffusionSchedule & sched, Rng & rng, const std::vector<uint8_t> * rows = nullptr)
{
  bool any = false;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    any = any || (ctx.mask(i, a) && (!rows || (*rows)[static_cast<size_t>(i)]));
  }
  if (!any) return;
  const double bar = sched.alpha_bar(t);
  Vector eps;
  if (t > 0) eps = standard_normal(rng, x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!ctx.mask(i, a) || (rows && !(*rows)[static_cast<size_t>(i)])) continue;
    x(i, a) = t > 0 ? std::sqrt(bar) * ctx.known(i, a) + std::sqrt(1.0 - bar) * eps(i) : ctx.known(i, a);
  }
}

inline Vector clamp_known(Vector anchor, const InpaintingContext & ctx, const Eigen::Index a)
{
  for (Eigen::Index i = 0; i < anchor.size(); ++i) {
    if (ctx.mask(i, a)) anchor(i) = ctx.known(i, a);
  }
  return anchor;
}

/// Runs the solver for one agent, or returns the anchor unchanged.
inline Vector guided_anchor(
  GuidanceProvider * provider, const GuidanceQuery & query, const Vector & anchor,
  std::vector<uint8_t> frozen, const DiffusionSchedule & sched, const TrustRegionParams & trust,
  const SolverConfig & solver, SamplerDiagnostics * diag)
{
  if (!provider) return anchor;
  bool any_free = false;
  for (const auto f : frozen) any_free = any_free || !f;
  if (!any_free) return anchor;
  auto guidance = provider->prepare(query);
  if (!guidance) return anchor;
  auto record = [&](const ReanchorResult & r) {
    if (!diag) return;
    diag->rows.push_back(
      {query.phase, query.phase == Phase::kWarmup ? query.t : query.tau, query.agent, r.kl_used,
       r.objective_value, r.residuals.max_violation(), r.iterations, r.converged});
    if (!r.converged) ++diag->nonconverged;
  };
  if (guidance->solved) {
    if (guidance->solved->x_hat.size() != anchor.size()) throw std::runtime_error("provider result has the wrong size");
    record(*guidance->solved);
    return guidance->solved->x_hat;
  }
  AnchorProblem problem;
  problem.anchor = anchor;
  problem.aux = std::move(guidance->aux);
  problem.frozen = std::move(frozen);
  problem.objective = std::move(guidance->objective);
  problem.w_g = guidance->w_g;
  problem.log_barrier = guidance->log_barrier;
  problem.barrier_epsilon = guidance->barrier_epsilon;
  const ReanchorResult r = reanchor(problem, query.t, sched, trust, solver);
  record(r);
  return r.x_hat;
}

inline std::vector<uint8_t> known_frozen(const InpaintingContext & ctx, const Eigen::Index a)
{
  std::vector<uint8_t> frozen(static_cast<size_t>(ctx.mask.rows()));
  for (Eigen::Index i = 0; i < ctx.mask.rows(); ++i) frozen[static_cast<size_t>(i)] = ctx.mask(i, a);
  return frozen;
}
}  // namespace detail

/// Initial noise x_T, column by column.
inline Matrix initial_noise(const Eigen::Index dim, const Eigen::Index agents, Rng & rng)
{
  Matrix x(dim, agents);
  for (Eigen::Index a = 0; a < agents; ++a) x.col(a) = standard_normal(rng, dim);
  return x;
}

/// Full-horizon refinement from level T down to t_low. Each step predicts
/// x~0 per agent, re-anchors under single-agent guidance, takes the reverse
/// step and re-imposes known entries at the new level.
inline Matrix warmup_phase(
  Matrix x, const InpaintingContext & ctx, const Denoiser & denoiser, const DiffusionSchedule & sched,
  const SamplerConfig & cfg, GuidanceProvider * provider, Rng & rng, SamplerDiagnostics * diag = nullptr)
{
  cfg.validate(sched);
  ctx.validate(denoiser.dim());
  if (x.rows() != denoiser.dim() || x.cols() != ctx.known.cols()) {
    throw std::invalid_argument("warmup: scene state shape mismatch");
  }
  const int t_low = cfg.resolved_t_low(sched);
  const Eigen::Index agents = x.cols();
  for (int t = sched.steps(); t > t_low; --t) {
    Matrix anchors(x.rows(), agents);
    for (Eigen::Index a = 0; a < agents; ++a) {
      anchors.col(a) = detail::clamp_known(denoiser.predict_clean(Vector(x.col(a)), t, sched), ctx, a);
    }
    if (provider && cfg.guide_warmup) provider->begin_step(Phase::kWarmup, t, 0, anchors);
    for (Eigen::Index a = 0; a < agents; ++a) {
      const GuidanceQuery q{
        Phase::kWarmup, t, 0, static_cast<int>(a), &anchors, &sched, &cfg.warmup_trust, &cfg.solver,
        [&ctx](int b) { return detail::known_frozen(ctx, b); }};
      const Vector x_hat = detail::guided_anchor(
        cfg.guide_warmup ? provider : nullptr, q, anchors.col(a), detail::known_frozen(ctx, a), sched,
        cfg.warmup_trust, cfg.solver, diag);
      x.col(a) = reverse_step(Vector(x.col(a)), x_hat, t, sched, rng);
      detail::impose_known(x, ctx, a, t - 1, sched, rng);
    }
  }
  return x;
}

/// Frame-wise refinement from level t_low to 0. At rolling index tau every
/// agent's trajectory is predicted under the current per-frame levels
/// (frames before tau clean, the rest at t_low), re-anchored against the
/// other agents' current clean estimates, and frame tau is finalized.
inline Matrix rolling_zero_phase(
  Matrix x, const InpaintingContext & ctx, const Denoiser & denoiser, const DiffusionSchedule & sched,
  const SamplerConfig & cfg, GuidanceProvider * provider, Rng & rng, SamplerDiagnostics * diag = nullptr)
{
  cfg.validate(sched);
  ctx.validate(denoiser.dim());
  if (x.rows() != denoiser.dim() || x.cols() != ctx.known.cols()) {
    throw std::invalid_argument("rolling: scene state shape mismatch");
  }
  const int t_low = cfg.resolved_t_low(sched);
  const int frames = denoiser.frames();
  const int channels = denoiser.channels();
  const Eigen::Index agents = x.cols();
  GuidanceProvider * active = cfg.guide_rolling ? provider : nullptr;

  for (int tau = 1; tau <= frames; ++tau) {
    const int f = tau - 1;
    std::vector<uint8_t> in_frame(static_cast<size_t>(x.rows()), 0);
    for (int c = 0; c < channels; ++c) in_frame[static_cast<size_t>(f * channels + c)] = 1;
    const int updates = cfg.multi_update ? t_low : 1;
    for (int u = 0; u < updates; ++u) {
      const int level = t_low - u;
      std::vector<int> steps(static_cast<size_t>(frames), t_low);
      for (int g = 0; g < f; ++g) steps[static_cast<size_t>(g)] = 0;
      steps[static_cast<size_t>(f)] = level;
      Matrix anchors(x.rows(), agents);
      for (Eigen::Index a = 0; a < agents; ++a) {
        anchors.col(a) = detail::clamp_known(denoiser.predict_clean(Vector(x.col(a)), steps, sched), ctx, a);
      }
      if (active) active->begin_step(Phase::kRolling, level, tau, anchors);
      Matrix x_hat(x.rows(), agents);
      for (Eigen::Index a = 0; a < agents; ++a) {
        const auto frozen_for = [&ctx, f, channels](int b) {
          auto fr = detail::known_frozen(ctx, b);
          for (int g = 0; g < f * channels; ++g) fr[static_cast<size_t>(g)] = 1;
          return fr;
        };
        auto frozen = frozen_for(static_cast<int>(a));
        const GuidanceQuery q{
          Phase::kRolling, level, tau, static_cast<int>(a), &anchors, &sched, &cfg.rolling_trust, &cfg.solver,
          frozen_for};
        x_hat.col(a) = detail::guided_anchor(
          active, q, anchors.col(a), std::move(frozen), sched, cfg.rolling_trust, cfg.solver, diag);
      }
      for (Eigen::Index a = 0; a < agents; ++a) {
        const auto rows = Eigen::seqN(static_cast<Eigen::Index>(f) * channels, channels);
        if (cfg.multi_update) {
          const Vector mean = sched.a_coef(level) * x_hat.col(a)(rows) + sched.c_coef(level) * x.col(a)(rows);
          const double sigma = sched.sigma(level);
          x.col(a)(rows) = sigma > 0.0 ? Vector(mean + sigma * standard_normal(rng, channels)) : mean;
          detail::impose_known(x, ctx, a, level - 1, sched, rng, &in_frame);
        } else {
          x.col(a)(rows) = x_hat.col(a)(rows);
          detail::impose_known(x, ctx, a, 0, sched, rng, &in_frame);
        }
      }
    }
  }
  return x;
}

struct TwoPhaseResult
{
  Matrix x0;
  Matrix x_low;
  SamplerDiagnostics diagnostics;
};

/// Warmup then Rolling-Zero from fresh noise. Known entries of the result
/// equal the context exactly.
inline TwoPhaseResult sample_two_phase(
  const Denoiser & denoiser, const DiffusionSchedule & sched, const InpaintingContext & ctx,
  const SamplerConfig & cfg, GuidanceProvider * provider, Rng & rng)
{
  ctx.validate(denoiser.dim());
  TwoPhaseResult res;
  Matrix x = initial_noise(denoiser.dim(), ctx.known.cols(), rng);
  for (Eigen::Index a = 0; a < x.cols(); ++a) detail::impose_known(x, ctx, a, sched.steps(), sched, rng);
  res.x_low = warmup_phase(std::move(x), ctx, denoiser, sched, cfg, provider, rng, &res.diagnostics);
  res.x0 = rolling_zero_phase(res.x_low, ctx, denoiser, sched, cfg, provider, rng, &res.diagnostics);
  res.x0 = ctx.mask.select(ctx.known, res.x0);
  return res;
}

}  // namespace omega

#endif  // OMEGA__TWO_PHASE_HPP_

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

#ifndef OMEGA__DIFFUSION_HPP_
#define OMEGA__DIFFUSION_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omega
{
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Reverse-step variance choice.
enum class VarianceKind { kPosterior, kBeta };

inline VarianceKind parse_variance_kind(std::string_view name)
{
  if (name == "posterior") return VarianceKind::kPosterior;
  if (name == "beta") return VarianceKind::kBeta;
  throw std::invalid_argument("unknown variance kind: " + std::string(name));
}

/// Linear-beta DDPM schedule with the anchored reverse-kernel coefficients.
///
/// All per-step arrays are indexed by the diffusion step t in [0, T]. Index 0
/// only carries the clean-data convention alpha_bar(0) = 1; the remaining
/// quantities at t = 0 are the identity kernel (A = 1, C = 0, sigma = 0).
class DiffusionSchedule
{
public:
  DiffusionSchedule() = default;

  DiffusionSchedule(
    const int steps, const double beta_min, const double beta_max,
    const VarianceKind kind = VarianceKind::kPosterior)
  : kind_(kind)
  {
    if (steps < 1) {
      throw std::invalid_argument("diffusion schedule needs at least one step");
    }
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || !(beta_min <= beta_max)) {
      throw std::invalid_argument("betas must satisfy 0 < beta_min <= beta_max < 1");
    }
    const auto n = static_cast<size_t>(steps) + 1;
    betas_.assign(n, 0.0);
    alphas_.assign(n, 1.0);
    alpha_bars_.assign(n, 1.0);
    sigmas_.assign(n, 0.0);
    a_coef_.assign(n, 1.0);
    c_coef_.assign(n, 0.0);
    // 1 - alpha_bar accumulated directly; subtracting from 1 loses the
    // leading digits at small t.
    double one_minus_prev = 0.0;
    for (int t = 1; t <= steps; ++t) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
      const double beta = beta_min + (beta_max - beta_min) * frac;
      betas_[t] = beta;
      alphas_[t] = 1.0 - beta;
      alpha_bars_[t] = alpha_bars_[t - 1] * alphas_[t];
      const double one_minus_bar = one_minus_prev + alpha_bars_[t - 1] * beta;
      a_coef_[t] = beta * std::sqrt(alpha_bars_[t - 1]) / one_minus_bar;
      c_coef_[t] = std::sqrt(alphas_[t]) * one_minus_prev / one_minus_bar;
      const double var =
        kind == VarianceKind::kPosterior ? one_minus_prev / one_minus_bar * beta : beta;
      sigmas_[t] = std::sqrt(var);
      one_minus_prev = one_minus_bar;
    }
  }

  int steps() const { return static_cast<int>(betas_.size()) - 1; }
  VarianceKind variance_kind() const { return kind_; }

  double beta(const int t) const { return betas_.at(t); }
  double alpha(const int t) const { return alphas_.at(t); }
  double alpha_bar(const int t) const { return alpha_bars_.at(t); }
  double sigma(const int t) const { return sigmas_.at(t); }
  double a_coef(const int t) const { return a_coef_.at(t); }
  double c_coef(const int t) const { return c_coef_.at(t); }

  void check_step(const int t) const
  {
    if (t < 0 || t > steps()) {
      throw std::out_of_range(
        "diffusion step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    }
  }

private:
  VarianceKind kind_{VarianceKind::kPosterior};
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> sigmas_;
  std::vector<double> a_coef_;
  std::vector<double> c_coef_;
};

inline DiffusionSchedule build_schedule(
  const int steps, const double beta_min, const double beta_max,
  const VarianceKind kind = VarianceKind::kPosterior)
{
  return DiffusionSchedule(steps, beta_min, beta_max, kind);
}

inline void check_same_shape(const Vector & a, const Vector & b, const char * what)
{
  if (a.size() != b.size()) {
    throw std::invalid_argument(
      std::string(what) + ": shape mismatch (" + std::to_string(a.size()) + " vs " +
      std::to_string(b.size()) + ")");
  }
}

/// Per-coordinate sqrt(alpha_bar) and sqrt(1 - alpha_bar) for a frame-major
/// layout where frame f owns coordinates [f * channels, (f + 1) * channels).
struct NoiseScales
{
  Vector signal;
  Vector noise;
};

inline NoiseScales noise_scales(
  std::span<const int> frame_steps, const int channels, const DiffusionSchedule & sched)
{
  NoiseScales out;
  const auto n = static_cast<Eigen::Index>(frame_steps.size()) * channels;
  out.signal.resize(n);
  out.noise.resize(n);
  for (size_t f = 0; f < frame_steps.size(); ++f) {
    sched.check_step(frame_steps[f]);
    const double bar = sched.alpha_bar(frame_steps[f]);
    for (int c = 0; c < channels; ++c) {
      const auto i = static_cast<Eigen::Index>(f) * channels + c;
      out.signal(i) = std::sqrt(bar);
      out.noise(i) = std::sqrt(1.0 - bar);
    }
  }
  return out;
}

inline Vector forward_sample(
  const Vector & x0, const int t, const Vector & noise, const DiffusionSchedule & sched)
{
  check_same_shape(x0, noise, "forward_sample");
  sched.check_step(t);
  const double bar = sched.alpha_bar(t);
  return std::sqrt(bar) * x0 + std::sqrt(1.0 - bar) * noise;
}

/// Forward sample with an independent step index per frame.
inline Vector forward_sample(
  const Vector & x0, std::span<const int> frame_steps, const int channels, const Vector & noise,
  const DiffusionSchedule & sched)
{
  check_same_shape(x0, noise, "forward_sample");
  const auto s = noise_scales(frame_steps, channels, sched);
  check_same_shape(x0, s.signal, "forward_sample(frames)");
  return (s.signal.array() * x0.array() + s.noise.array() * noise.array()).matrix();
}

inline Vector predict_x0(
  const Vector & x_t, const Vector & eps_hat, const int t, const DiffusionSchedule & sched)
{
  check_same_shape(x_t, eps_hat, "predict_x0");
  sched.check_step(t);
  const double bar = sched.alpha_bar(t);
  return (x_t - std::sqrt(1.0 - bar) * eps_hat) / std::sqrt(bar);
}

inline Vector predict_x0(
  const Vector & x_t, const Vector & eps_hat, std::span<const int> frame_steps, const int channels,
  const DiffusionSchedule & sched)
{
  check_same_shape(x_t, eps_hat, "predict_x0");
  const auto s = noise_scales(frame_steps, channels, sched);
  check_same_shape(x_t, s.signal, "predict_x0(frames)");
  return ((x_t.array() - s.noise.array() * eps_hat.array()) / s.signal.array()).matrix();
}

/// Mean of the anchored reverse kernel: A_t * anchor + C_t * x_t.
inline Vector reverse_kernel_mean(
  const Vector & anchor, const Vector & x_t, const int t, const DiffusionSchedule & sched)
{
  check_same_shape(anchor, x_t, "reverse_kernel_mean");
  sched.check_step(t);
  return sched.a_coef(t) * anchor + sched.c_coef(t) * x_t;
}

inline Vector standard_normal(Rng & rng, const Eigen::Index n)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

/// One ancestral step x_{t-1} ~ N(A_t anchor + C_t x_t, sigma_t^2 I). No draw
/// is consumed when sigma_t = 0.
inline Vector reverse_step(
  const Vector & x_t, const Vector & anchor, const int t, const DiffusionSchedule & sched,
  Rng & rng)
{
  Vector mean = reverse_kernel_mean(anchor, x_t, t, sched);
  const double sigma = sched.sigma(t);
  if (sigma == 0.0) return mean;
  return mean + sigma * standard_normal(rng, mean.size());
}

// ---------------------------------------------------------------------------
// Gaussian mixtures and the analytic posterior-mean oracle.

struct GaussianMixture
{
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
  size_t size() const { return weights.size(); }

  void validate() const
  {
    if (weights.empty()) throw std::invalid_argument("mixture has no components");
    if (means.size() != weights.size() || covariances.size() != weights.size()) {
      throw std::invalid_argument("mixture component arrays differ in length");
    }
    double total = 0.0;
    for (const double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("mixture weight must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("mixture weights must sum to one");
    }
    const auto d = dim();
    for (size_t k = 0; k < size(); ++k) {
      if (means[k].size() != d || covariances[k].rows() != d || covariances[k].cols() != d) {
        throw std::invalid_argument("mixture component " + std::to_string(k) + " has wrong shape");
      }
      if (!covariances[k].isApprox(covariances[k].transpose(), 1e-12)) {
        throw std::invalid_argument("covariance " + std::to_string(k) + " is not symmetric");
      }
      Eigen::LLT<Matrix> llt(covariances[k]);
      if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("covariance " + std::to_string(k) + " is not positive definite");
      }
    }
  }
};

/// Exact E[x0 | x_t] when x_t = signal .* x0 + noise .* eps and x0 follows
/// the mixture. Responsibilities are normalized in the log domain.
inline Vector gmm_posterior_mean(
  const Vector & x_t, const Vector & signal, const Vector & noise, const GaussianMixture & gmm)
{
  const auto d = gmm.dim();
  if (x_t.size() != d || signal.size() != d || noise.size() != d) {
    throw std::invalid_argument("gmm_posterior_mean: dimension mismatch");
  }
  const size_t k_count = gmm.size();
  std::vector<double> log_resp(k_count);
  std::vector<Vector> cond_means(k_count);
  for (size_t k = 0; k < k_count; ++k) {
    const Matrix & cov = gmm.covariances[k];
    Matrix marginal = signal.asDiagonal() * cov * signal.asDiagonal();
    marginal.diagonal() += noise.array().square().matrix();
    Eigen::LLT<Matrix> llt(marginal);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("gmm_posterior_mean: marginal covariance not positive definite");
    }
    const Vector resid = x_t - signal.cwiseProduct(gmm.means[k]);
    const Vector solved = llt.solve(resid);
    const Matrix l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    log_resp[k] = std::log(gmm.weights[k]) - 0.5 * (resid.dot(solved) + log_det);
    cond_means[k] = gmm.means[k] + cov * signal.cwiseProduct(solved);
  }
  const double top = *std::max_element(log_resp.begin(), log_resp.end());
  double norm = 0.0;
  for (double & lr : log_resp) {
    lr = std::exp(lr - top);
    norm += lr;
  }
  Vector out = Vector::Zero(d);
  for (size_t k = 0; k < k_count; ++k) out += (log_resp[k] / norm) * cond_means[k];
  return out;
}

inline Vector gmm_posterior_mean(
  const Vector & x_t, const int t, const GaussianMixture & gmm, const DiffusionSchedule & sched)
{
  sched.check_step(t);
  const auto d = gmm.dim();
  const double bar = sched.alpha_bar(t);
  return gmm_posterior_mean(
    x_t, Vector::Constant(d, std::sqrt(bar)), Vector::Constant(d, std::sqrt(1.0 - bar)), gmm);
}

// ---------------------------------------------------------------------------
// Denoisers.

/// epsilon-prediction network over a frame-major block of `frames() *
/// channels()` coordinates, each frame carrying its own diffusion step.
class Denoiser
{
public:
  virtual ~Denoiser() = default;

  virtual std::string_view kind() const = 0;
  virtual int frames() const = 0;
  virtual int channels() const = 0;

  virtual Vector predict_noise(
    const Vector & x_t, std::span<const int> frame_steps,
    const DiffusionSchedule & sched) const = 0;

  /// Clean estimate x~0. Frames at step 0 are returned unchanged.
  virtual Vector predict_clean(
    const Vector & x_t, std::span<const int> frame_steps, const DiffusionSchedule & sched) const
  {
    const Vector eps = predict_noise(x_t, frame_steps, sched);
    return predict_x0(x_t, eps, frame_steps, channels(), sched);
  }

  Vector predict_noise(const Vector & x_t, const int t, const DiffusionSchedule & sched) const
  {
    const std::vector<int> steps(static_cast<size_t>(frames()), t);
    return predict_noise(x_t, steps, sched);
  }

  Vector predict_clean(const Vector & x_t, const int t, const DiffusionSchedule & sched) const
  {
    const std::vector<int> steps(static_cast<size_t>(frames()), t);
    return predict_clean(x_t, steps, sched);
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(frames()) * channels(); }
};

/// Analytic denoiser for data drawn from a known Gaussian mixture.
class GmmDenoiser : public Denoiser
{
public:
  GmmDenoiser(GaussianMixture gmm, const int frames = 1)
  : gmm_(std::move(gmm)), frames_(frames)
  {
    gmm_.validate();
    if (frames_ < 1 || gmm_.dim() % frames_ != 0) {
      throw std::invalid_argument("mixture dimension is not a multiple of the frame count");
    }
  }

  using Denoiser::predict_clean;
  using Denoiser::predict_noise;

  std::string_view kind() const override { return "gmm_oracle"; }
  int frames() const override { return frames_; }
  int channels() const override { return static_cast<int>(gmm_.dim()) / frames_; }
  const GaussianMixture & mixture() const { return gmm_; }

  Vector predict_clean(
    const Vector & x_t, std::span<const int> frame_steps,
    const DiffusionSchedule & sched) const override
  {
    const auto s = noise_scales(frame_steps, channels(), sched);
    return gmm_posterior_mean(x_t, s.signal, s.noise, gmm_);
  }

  Vector predict_noise(
    const Vector & x_t, std::span<const int> frame_steps,
    const DiffusionSchedule & sched) const override
  {
    const auto s = noise_scales(frame_steps, channels(), sched);
    const Vector clean = gmm_posterior_mean(x_t, s.signal, s.noise, gmm_);
    Vector eps = Vector::Zero(x_t.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
      if (s.noise(i) > 0.0) eps(i) = (x_t(i) - s.signal(i) * clean(i)) / s.noise(i);
    }
    return eps;
  }

private:
  GaussianMixture gmm_;
  int frames_;
};

/// Plain ancestral sampling from x_T ~ N(0, I) using the denoiser's clean
/// estimate as the anchor.
inline Vector sample_unguided(const Denoiser & denoiser, const DiffusionSchedule & sched, Rng & rng)
{
  Vector x = standard_normal(rng, denoiser.dim());
  for (int t = sched.steps(); t >= 1; --t) {
    const Vector anchor = denoiser.predict_clean(x, t, sched);
    x = reverse_step(x, anchor, t, sched, rng);
  }
  return x;
}

}  // namespace omega

#endif  // OMEGA__DIFFUSION_HPP_

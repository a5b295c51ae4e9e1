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

#ifndef OMEGA__GUIDANCE_HPP_
#define OMEGA__GUIDANCE_HPP_

#include "omega/diffusion.hpp"
#include "omega/geometry.hpp"
#include "omega/routes.hpp"
#include "omega/scene.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omega
{

struct ControlSequence
{
  std::vector<double> accel;
  std::vector<double> steer;
  double wheelbase{2.7};

  void validate(const int frames) const
  {
    const auto n = static_cast<size_t>(std::max(frames - 1, 0));
    if (accel.size() != n || steer.size() != n) {
      throw std::invalid_argument("control sequence length must equal frames - 1");
    }
    if (!(wheelbase > 0.0)) throw std::invalid_argument("wheelbase must be positive");
  }
};

struct AnchoredState
{
  int frame{0};
  std::array<double, 4> state{};
};

struct GuidanceSpec
{
  double w_a{0.05};
  double w_ad{0.2};
  double w_delta{0.5};
  double w_deltad{2.0};
  double w_h{5.0};
  double w_g{20.0};
  double psi_max{0.35};
  double b_max{1.75};
  double clearance{0.1};
  double speed_threshold{0.5};
  double wheelbase_ratio{0.6};
  bool smoothness{true};
  bool kinematic{true};
  bool state{true};
  bool heading{true};
  bool road{true};
  bool safety{true};
  /// Replaces the hinge [g]_+^2 with a smoothed log barrier.
  bool log_barrier{false};
  double barrier_epsilon{0.05};
  std::vector<AnchoredState> anchored_states;

  void validate() const
  {
    for (const double w : {w_a, w_ad, w_delta, w_deltad, w_h, w_g}) {
      if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("guidance weights must be finite and >= 0");
    }
    if (!(psi_max > 0.0 && psi_max < std::numbers::pi)) {
      throw std::invalid_argument("psi_max must lie in (0, pi)");
    }
    if (!(b_max > 0.0)) throw std::invalid_argument("b_max must be positive");
    if (!(clearance >= 0.0) || !(wheelbase_ratio > 0.0) || !(barrier_epsilon > 0.0)) {
      throw std::invalid_argument("clearance, wheelbase_ratio and barrier_epsilon out of range");
    }
  }

  double safety_radius(const double width) const { return 0.5 * width + clearance; }
};

// ---------------------------------------------------------------------------
// Residual bookkeeping.

struct ResidualEntry
{
  int frame{0};
  int index{0};
  double value{0.0};
};

struct ResidualGroups
{
  std::vector<ResidualEntry> kin;
  std::vector<ResidualEntry> state;
  std::vector<ResidualEntry> head;
  std::vector<ResidualEntry> road;
  std::vector<ResidualEntry> safe;
  std::vector<ResidualEntry> pair;

  static constexpr std::array<const char *, 6> kNames{"kin", "state", "head", "road", "safe", "pair"};

  const std::vector<ResidualEntry> & group(const size_t i) const
  {
    switch (i) {
      case 0:
        return kin;
      case 1:
        return state;
      case 2:
        return head;
      case 3:
        return road;
      case 4:
        return safe;
      default:
        return pair;
    }
  }

  static bool is_inequality(const size_t i) { return i >= 2; }

  /// Largest positive inequality residual (0 when feasible).
  double max_violation() const
  {
    double m = 0.0;
    for (size_t g = 2; g < kNames.size(); ++g) {
      for (const auto & e : group(g)) m = std::max(m, e.value);
    }
    return m;
  }

  double equality_sq_norm() const
  {
    double s = 0.0;
    for (const auto & e : kin) s += e.value * e.value;
    for (const auto & e : state) s += e.value * e.value;
    return s;
  }
};

struct ActiveEntry
{
  const char * group{""};
  int frame{0};
  int index{0};
  double value{0.0};
};

struct ObjectiveReport
{
  double value{0.0};
  Vector gradient;
  ResidualGroups residuals;
  std::vector<ActiveEntry> active_set;
};

/// Writes residual groups as CSV rows (frame, group, index, value).
inline void write_residual_csv(std::ostream & out, const ResidualGroups & r, const bool header = true)
{
  if (header) out << "frame,group,index,value\n";
  out.precision(17);
  for (size_t g = 0; g < ResidualGroups::kNames.size(); ++g) {
    for (const auto & e : r.group(g)) {
      out << e.frame << ',' << ResidualGroups::kNames[g] << ',' << e.index << ',' << e.value << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Penalty shapes.

/// Penalty value and derivative for one inequality residual g.
struct Penalty
{
  double value{0.0};
  double slope{0.0};
};

inline Penalty inequality_penalty(const double g, const GuidanceSpec & spec)
{
  if (!spec.log_barrier) {
    if (g <= 0.0) return {};
    return {g * g, 2.0 * g};
  }
  // -log(-g) for g <= -eps, continued quadratically past -eps.
  const double e = spec.barrier_epsilon;
  if (g <= -e) return {-std::log(-g), -1.0 / g};
  const double d = g + e;
  const double v0 = -std::log(e);
  const double d1 = 1.0 / e;
  const double d2 = 1.0 / (e * e);
  return {v0 + d1 * d + 0.5 * d2 * d * d, d1 + d2 * d};
}

// ---------------------------------------------------------------------------
// Individual terms.

inline double smoothness_cost(const ControlSequence & u, const GuidanceSpec & spec)
{
  double cost = 0.0;
  const size_t n = u.accel.size();
  for (size_t i = 0; i < n; ++i) {
    cost += spec.w_a * u.accel[i] * u.accel[i] + spec.w_delta * u.steer[i] * u.steer[i];
    if (i + 1 < n) {
      const double da = u.accel[i + 1] - u.accel[i];
      const double dd = u.steer[i + 1] - u.steer[i];
      cost += spec.w_ad * da * da + spec.w_deltad * dd * dd;
    }
  }
  return cost;
}

/// Euler bicycle residuals per transition tau -> tau + 1. `states` is
/// frames x 4 (px, py, psi, v).
inline std::vector<std::array<double, 4>> kinematic_residuals(
  const Matrix & states, const ControlSequence & u, const double dt)
{
  const auto frames = static_cast<int>(states.rows());
  if (frames < 2) throw std::invalid_argument("kinematic residuals need at least two frames");
  u.validate(frames);
  std::vector<std::array<double, 4>> out(static_cast<size_t>(frames - 1));
  for (int f = 0; f + 1 < frames; ++f) {
    const double v = states(f, kSpeed);
    const double psi = states(f, kPsi);
    auto & r = out[static_cast<size_t>(f)];
    r[0] = states(f + 1, kPx) - states(f, kPx) - dt * v * std::cos(psi);
    r[1] = states(f + 1, kPy) - states(f, kPy) - dt * v * std::sin(psi);
    r[2] = wrap_angle(
      states(f + 1, kPsi) - psi - dt * v / u.wheelbase * std::tan(u.steer[static_cast<size_t>(f)]));
    r[3] = states(f + 1, kSpeed) - v - dt * u.accel[static_cast<size_t>(f)];
  }
  return out;
}

/// Forward Euler rollout of the bicycle model.
inline Matrix rollout_states(
  const std::array<double, 4> & initial, const ControlSequence & u, const double dt)
{
  const int frames = static_cast<int>(u.accel.size()) + 1;
  u.validate(frames);
  Matrix s(frames, kMotionDim);
  for (int c = 0; c < kMotionDim; ++c) s(0, c) = initial[static_cast<size_t>(c)];
  for (int f = 0; f + 1 < frames; ++f) {
    const double v = s(f, kSpeed);
    const double psi = s(f, kPsi);
    s(f + 1, kPx) = s(f, kPx) + dt * v * std::cos(psi);
    s(f + 1, kPy) = s(f, kPy) + dt * v * std::sin(psi);
    s(f + 1, kPsi) = psi + dt * v / u.wheelbase * std::tan(u.steer[static_cast<size_t>(f)]);
    s(f + 1, kSpeed) = v + dt * u.accel[static_cast<size_t>(f)];
  }
  return s;
}

/// Controls that reproduce the speed and heading changes of `states` under
/// the bicycle model; steering is zero below `min_speed`.
inline ControlSequence infer_controls(
  const Matrix & states, const double dt, const double wheelbase, const double max_steer = 0.6,
  const double min_speed = 0.5)
{
  ControlSequence u;
  u.wheelbase = wheelbase;
  for (Eigen::Index f = 0; f + 1 < states.rows(); ++f) {
    u.accel.push_back((states(f + 1, kSpeed) - states(f, kSpeed)) / dt);
    const double v = states(f, kSpeed);
    double steer = 0.0;
    if (v > min_speed) {
      const double dpsi = wrap_angle(states(f + 1, kPsi) - states(f, kPsi));
      steer = std::atan(wheelbase * dpsi / (dt * v));
    }
    u.steer.push_back(std::clamp(steer, -max_steer, max_steer));
  }
  return u;
}

/// Safety-circle centers at +/- length / 4 along the heading.
inline std::array<Point2, 2> circle_centers(const double x, const double y, const double psi, const double length)
{
  const double q = 0.25 * length;
  return {{{x + q * std::cos(psi), y + q * std::sin(psi)}, {x - q * std::cos(psi), y - q * std::sin(psi)}}};
}

/// Residual r_i + r_j - |c_i - c_j| for each of the four circle pairs and the
/// gradients with respect to (x, y, psi) of both agents.
struct CirclePairTerms
{
  std::array<double, 4> value{};
  std::array<std::array<double, 3>, 4> grad_i{};
  std::array<std::array<double, 3>, 4> grad_j{};
};

inline CirclePairTerms circle_pair_terms(
  const double xi, const double yi, const double psii, const double len_i, const double ri,
  const double xj, const double yj, const double psij, const double len_j, const double rj)
{
  CirclePairTerms out;
  const double qi = 0.25 * len_i;
  const double qj = 0.25 * len_j;
  const double ci = std::cos(psii);
  const double si = std::sin(psii);
  const double cj = std::cos(psij);
  const double sj = std::sin(psij);
  int k = 0;
  for (const double sa : {1.0, -1.0}) {
    for (const double sb : {1.0, -1.0}) {
      const double ax = xi + sa * qi * ci;
      const double ay = yi + sa * qi * si;
      const double bx = xj + sb * qj * cj;
      const double by = yj + sb * qj * sj;
      const double dx = ax - bx;
      const double dy = ay - by;
      const double d = std::hypot(dx, dy);
      out.value[static_cast<size_t>(k)] = ri + rj - d;
      if (d > 1e-12) {
        const double ux = dx / d;
        const double uy = dy / d;
        // d(-d)/d(a) = -u, d(-d)/d(b) = +u.
        out.grad_i[static_cast<size_t>(k)] = {-ux, -uy, -(ux * (-sa * qi * si) + uy * (sa * qi * ci))};
        out.grad_j[static_cast<size_t>(k)] = {ux, uy, ux * (-sb * qj * sj) + uy * (sb * qj * cj)};
      }
      ++k;
    }
  }
  return out;
}

/// Another agent's states used by the interaction terms.
struct OtherAgentTrack
{
  Matrix states;  // frames x 4
  double length{4.5};
  double width{1.9};
  std::vector<uint8_t> active;  // frames at which the pair is checked
};

/// Everything the objective needs beyond the decision vector.
struct GuidanceContext
{
  double dt{0.5};
  double length{4.5};
  double width{1.9};
  std::vector<uint8_t> valid;          // per frame
  std::vector<ReferencePoint> refs;    // per frame; candidate < 0 means none
  std::vector<OtherAgentTrack> others;
  double lambda{1.0};

  int frames() const { return static_cast<int>(valid.size()); }
  double wheelbase(const GuidanceSpec & spec) const { return spec.wheelbase_ratio * length; }
};

/// Decision layout: frames x 4 states (frame-major), then frames-1 accels,
/// then frames-1 steering angles.
inline Eigen::Index decision_size(const int frames)
{
  return static_cast<Eigen::Index>(frames) * kMotionDim + 2 * static_cast<Eigen::Index>(frames - 1);
}

inline Vector pack_decision(const Matrix & states, const ControlSequence & u)
{
  const auto frames = static_cast<int>(states.rows());
  Vector z(decision_size(frames));
  for (int f = 0; f < frames; ++f) {
    for (int c = 0; c < kMotionDim; ++c) z(f * kMotionDim + c) = states(f, c);
  }
  const Eigen::Index off = static_cast<Eigen::Index>(frames) * kMotionDim;
  for (int i = 0; i + 1 < frames; ++i) {
    z(off + i) = u.accel[static_cast<size_t>(i)];
    z(off + frames - 1 + i) = u.steer[static_cast<size_t>(i)];
  }
  return z;
}

inline Matrix unpack_states(const Vector & z, const int frames)
{
  Matrix s(frames, kMotionDim);
  for (int f = 0; f < frames; ++f) {
    for (int c = 0; c < kMotionDim; ++c) s(f, c) = z(f * kMotionDim + c);
  }
  return s;
}

inline ControlSequence unpack_controls(const Vector & z, const int frames, const double wheelbase)
{
  ControlSequence u;
  u.wheelbase = wheelbase;
  const Eigen::Index off = static_cast<Eigen::Index>(frames) * kMotionDim;
  for (int i = 0; i + 1 < frames; ++i) {
    u.accel.push_back(z(off + i));
    u.steer.push_back(z(off + frames - 1 + i));
  }
  return u;
}

/// Heading, road and safety residuals for one agent.
inline ResidualGroups rule_and_safety_residuals(
  const Matrix & states, const GuidanceContext & ctx, const GuidanceSpec & spec)
{
  ResidualGroups out;
  const int frames = static_cast<int>(states.rows());
  const double ri = spec.safety_radius(ctx.width);
  for (int f = 0; f < frames; ++f) {
    if (!ctx.valid[static_cast<size_t>(f)]) continue;
    const bool moving = states(f, kSpeed) >= spec.speed_threshold;
    const auto & ref = ctx.refs.empty() ? ReferencePoint{} : ctx.refs[static_cast<size_t>(f)];
    if (moving && ref.candidate >= 0) {
      if (spec.heading) {
        out.head.push_back({f, 0, std::abs(wrap_angle(states(f, kPsi) - ref.heading)) - spec.psi_max});
      }
      if (spec.road) {
        const double lat = -std::sin(ref.heading) * (states(f, kPx) - ref.x) +
                           std::cos(ref.heading) * (states(f, kPy) - ref.y);
        out.road.push_back({f, 0, std::abs(lat) - spec.b_max});
      }
    }
    if (!spec.safety) continue;
    for (size_t o = 0; o < ctx.others.size(); ++o) {
      const auto & other = ctx.others[o];
      if (!other.active[static_cast<size_t>(f)]) continue;
      const auto t = circle_pair_terms(
        states(f, kPx), states(f, kPy), states(f, kPsi), ctx.length, ri, other.states(f, kPx),
        other.states(f, kPy), other.states(f, kPsi), other.length, spec.safety_radius(other.width));
      for (int k = 0; k < 4; ++k) {
        out.safe.push_back({f, static_cast<int>(o) * 4 + k, t.value[static_cast<size_t>(k)]});
      }
    }
  }
  return out;
}

namespace detail
{
inline void check_finite(const double v, const char * term)
{
  if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in guidance term '") + term + "'");
}
}  // namespace detail

/// Penalty-form guidance value
///   lambda * (-smoothness) - w_h * sum |h|^2 - w_g * sum pen(g)
/// and its exact gradient with respect to the decision vector.
inline ObjectiveReport assemble_objective(
  const Vector & decision, const GuidanceSpec & spec, const GuidanceContext & ctx,
  const bool record_residuals = true)
{
  const int frames = ctx.frames();
  if (frames < 2 || decision.size() != decision_size(frames)) {
    throw std::invalid_argument("decision vector does not match the frame count");
  }
  if (!ctx.refs.empty() && static_cast<int>(ctx.refs.size()) != frames) {
    throw std::invalid_argument("reference list length differs from frame count");
  }
  ObjectiveReport rep;
  rep.gradient = Vector::Zero(decision.size());
  Vector & g = rep.gradient;
  const Eigen::Index off_a = static_cast<Eigen::Index>(frames) * kMotionDim;
  const Eigen::Index off_d = off_a + frames - 1;
  const double dt = ctx.dt;
  const double wb = ctx.wheelbase(spec);
  auto sx = [&](int f, int c) { return decision(f * kMotionDim + c); };
  auto gi = [&](int f, int c) -> double & { return g(f * kMotionDim + c); };
  auto valid = [&](int f) { return ctx.valid[static_cast<size_t>(f)] != 0; };

  // Smoothness reward.
  if (spec.smoothness && ctx.lambda != 0.0) {
    double cost = 0.0;
    for (int i = 0; i + 1 < frames; ++i) {
      const double a = decision(off_a + i);
      const double d = decision(off_d + i);
      cost += spec.w_a * a * a + spec.w_delta * d * d;
      g(off_a + i) -= ctx.lambda * 2.0 * spec.w_a * a;
      g(off_d + i) -= ctx.lambda * 2.0 * spec.w_delta * d;
      if (i + 2 < frames) {
        const double da = decision(off_a + i + 1) - a;
        const double dd = decision(off_d + i + 1) - d;
        cost += spec.w_ad * da * da + spec.w_deltad * dd * dd;
        g(off_a + i + 1) -= ctx.lambda * 2.0 * spec.w_ad * da;
        g(off_a + i) += ctx.lambda * 2.0 * spec.w_ad * da;
        g(off_d + i + 1) -= ctx.lambda * 2.0 * spec.w_deltad * dd;
        g(off_d + i) += ctx.lambda * 2.0 * spec.w_deltad * dd;
      }
    }
    detail::check_finite(cost, "smoothness");
    rep.value -= ctx.lambda * cost;
  }

  // Kinematic equalities.
  if (spec.kinematic) {
    double sum = 0.0;
    for (int f = 0; f + 1 < frames; ++f) {
      if (!valid(f) || !valid(f + 1)) continue;
      const double v = sx(f, kSpeed);
      const double psi = sx(f, kPsi);
      const double a = decision(off_a + f);
      const double d = decision(off_d + f);
      const double c = std::cos(psi);
      const double s = std::sin(psi);
      const double tn = std::tan(d);
      const std::array<double, 4> r{
        sx(f + 1, kPx) - sx(f, kPx) - dt * v * c, sx(f + 1, kPy) - sx(f, kPy) - dt * v * s,
        wrap_angle(sx(f + 1, kPsi) - psi - dt * v / wb * tn), sx(f + 1, kSpeed) - v - dt * a};
      const double k = -2.0 * spec.w_h;
      gi(f + 1, kPx) += k * r[0];
      gi(f, kPx) -= k * r[0];
      gi(f, kSpeed) -= k * r[0] * dt * c;
      gi(f, kPsi) += k * r[0] * dt * v * s;
      gi(f + 1, kPy) += k * r[1];
      gi(f, kPy) -= k * r[1];
      gi(f, kSpeed) -= k * r[1] * dt * s;
      gi(f, kPsi) -= k * r[1] * dt * v * c;
      gi(f + 1, kPsi) += k * r[2];
      gi(f, kPsi) -= k * r[2];
      gi(f, kSpeed) -= k * r[2] * dt * tn / wb;
      g(off_d + f) -= k * r[2] * dt * v / wb * (1.0 + tn * tn);
      gi(f + 1, kSpeed) += k * r[3];
      gi(f, kSpeed) -= k * r[3];
      g(off_a + f) -= k * r[3] * dt;
      for (int i = 0; i < 4; ++i) {
        sum += r[static_cast<size_t>(i)] * r[static_cast<size_t>(i)];
        if (record_residuals) rep.residuals.kin.push_back({f, i, r[static_cast<size_t>(i)]});
      }
    }
    detail::check_finite(sum, "kin");
    rep.value -= spec.w_h * sum;
  }

  // Anchored state equalities.
  if (spec.state) {
    double sum = 0.0;
    for (const auto & as : spec.anchored_states) {
      if (as.frame < 0 || as.frame >= frames) throw std::invalid_argument("anchored state frame out of range");
      for (int c = 0; c < kMotionDim; ++c) {
        double r = sx(as.frame, c) - as.state[static_cast<size_t>(c)];
        if (c == kPsi) r = wrap_angle(r);
        sum += r * r;
        gi(as.frame, c) -= 2.0 * spec.w_h * r;
        if (record_residuals) rep.residuals.state.push_back({as.frame, c, r});
      }
    }
    detail::check_finite(sum, "state");
    rep.value -= spec.w_h * sum;
  }

  auto add_inequality = [&](std::vector<ResidualEntry> & group, const char * name, const int f,
                            const int index, const double gv) -> double {
    if (record_residuals) {
      group.push_back({f, index, gv});
      if (gv > 0.0) rep.active_set.push_back({name, f, index, gv});
    }
    const Penalty p = inequality_penalty(gv, spec);
    rep.value -= spec.w_g * p.value;
    return -spec.w_g * p.slope;
  };

  // Heading and road.
  if ((spec.heading || spec.road) && !ctx.refs.empty()) {
    for (int f = 0; f < frames; ++f) {
      const auto & ref = ctx.refs[static_cast<size_t>(f)];
      if (!valid(f) || ref.candidate < 0 || sx(f, kSpeed) < spec.speed_threshold) continue;
      if (spec.heading) {
        const double e = wrap_angle(sx(f, kPsi) - ref.heading);
        const double k = add_inequality(rep.residuals.head, "head", f, 0, std::abs(e) - spec.psi_max);
        gi(f, kPsi) += k * (e >= 0.0 ? 1.0 : -1.0);
      }
      if (spec.road) {
        const double nx = -std::sin(ref.heading);
        const double ny = std::cos(ref.heading);
        const double lat = nx * (sx(f, kPx) - ref.x) + ny * (sx(f, kPy) - ref.y);
        const double k = add_inequality(rep.residuals.road, "road", f, 0, std::abs(lat) - spec.b_max);
        const double sg = lat >= 0.0 ? 1.0 : -1.0;
        gi(f, kPx) += k * sg * nx;
        gi(f, kPy) += k * sg * ny;
      }
    }
    detail::check_finite(rep.value, "head/road");
  }

  // Safety circles.
  if (spec.safety) {
    const double ri = spec.safety_radius(ctx.width);
    for (int f = 0; f < frames; ++f) {
      if (!valid(f)) continue;
      for (size_t o = 0; o < ctx.others.size(); ++o) {
        const auto & other = ctx.others[o];
        if (!other.active[static_cast<size_t>(f)]) continue;
        const auto t = circle_pair_terms(
          sx(f, kPx), sx(f, kPy), sx(f, kPsi), ctx.length, ri, other.states(f, kPx),
          other.states(f, kPy), other.states(f, kPsi), other.length, spec.safety_radius(other.width));
        for (size_t k = 0; k < 4; ++k) {
          const double w = add_inequality(rep.residuals.safe, "safe", f, static_cast<int>(o) * 4 + static_cast<int>(k), t.value[k]);
          if (w == 0.0) continue;
          gi(f, kPx) += w * t.grad_i[k][0];
          gi(f, kPy) += w * t.grad_i[k][1];
          gi(f, kPsi) += w * t.grad_i[k][2];
        }
      }
    }
    detail::check_finite(rep.value, "safe");
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g(i))) throw std::runtime_error("non-finite guidance gradient");
  }
  return rep;
}

}  // namespace omega

#endif  // OMEGA__GUIDANCE_HPP_

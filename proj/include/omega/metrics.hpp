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

#ifndef OMEGA__METRICS_HPP_
#define OMEGA__METRICS_HPP_

#include "omega/geometry.hpp"
#include "omega/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omega
{

// ---------------------------------------------------------------------------
// Histograms and JSD.

enum class Statistic { kSpeed, kNearestDist, kLateralDev, kAngularDev };

inline Statistic parse_statistic(std::string_view name)
{
  if (name == "speed") return Statistic::kSpeed;
  if (name == "nearest_dist") return Statistic::kNearestDist;
  if (name == "lateral_dev") return Statistic::kLateralDev;
  if (name == "angular_dev") return Statistic::kAngularDev;
  throw std::invalid_argument("unknown statistic '" + std::string(name) + "'");
}

inline const char * to_string(const Statistic s)
{
  switch (s) {
    case Statistic::kSpeed:
      return "speed";
    case Statistic::kNearestDist:
      return "nearest_dist";
    case Statistic::kLateralDev:
      return "lateral_dev";
    case Statistic::kAngularDev:
      return "angular_dev";
  }
  return "?";
}

struct HistogramSpec
{
  Statistic statistic{Statistic::kSpeed};
  int bin_count{64};
  double lo{0.0};
  double hi{1.0};

  void validate() const
  {
    if (bin_count < 2) throw std::invalid_argument("histogram needs at least 2 bins");
    if (!(lo < hi)) throw std::invalid_argument("histogram range must satisfy lo < hi");
  }

  /// Fixed default ranges so JSD values are comparable across runs.
  static HistogramSpec defaults(const Statistic s)
  {
    switch (s) {
      case Statistic::kSpeed:
        return {s, 64, 0.0, 30.0};
      case Statistic::kNearestDist:
        return {s, 64, 0.0, 50.0};
      case Statistic::kLateralDev:
        return {s, 64, 0.0, 3.5};
      case Statistic::kAngularDev:
        return {s, 64, 0.0, std::numbers::pi / 2};
    }
    return {};
  }
};

struct Histogram
{
  HistogramSpec spec;
  std::vector<double> counts;

  double bin_lo(const int i) const { return spec.lo + (spec.hi - spec.lo) * i / spec.bin_count; }
  double bin_hi(const int i) const { return bin_lo(i + 1); }

  void write_csv(std::ostream & out) const
  {
    out << "bin_lo,bin_hi,count\n";
    for (int i = 0; i < spec.bin_count; ++i) out << bin_lo(i) << ',' << bin_hi(i) << ',' << counts[static_cast<size_t>(i)] << '\n';
  }
};

/// Values outside the range land in the edge bins.
inline Histogram make_histogram(const std::vector<double> & values, const HistogramSpec & spec)
{
  spec.validate();
  Histogram h{spec, std::vector<double>(static_cast<size_t>(spec.bin_count), 0.0)};
  for (const double v : values) {
    if (!std::isfinite(v)) continue;
    const double u = (v - spec.lo) / (spec.hi - spec.lo) * spec.bin_count;
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, spec.bin_count - 1);
    h.counts[static_cast<size_t>(i)] += 1.0;
  }
  return h;
}

/// Jensen-Shannon divergence in bits between two histograms with equal
/// binning.
inline double jsd(const std::vector<double> & p, const std::vector<double> & q)
{
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("jsd: histograms differ in binning");
  double sp = 0.0;
  double sq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw std::invalid_argument("jsd: negative or non-finite count");
    sp += p[i];
    sq += q[i];
  }
  if (!(sp > 0.0) || !(sq > 0.0)) throw std::invalid_argument("jsd: all-zero histogram");
  double out = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] / sp;
    const double b = q[i] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) out += 0.5 * a * std::log2(a / m);
    if (b > 0.0) out += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(out, 0.0, 1.0);
}

inline double jsd(const Histogram & p, const Histogram & q)
{
  if (p.spec.bin_count != q.spec.bin_count || p.spec.lo != q.spec.lo || p.spec.hi != q.spec.hi) {
    throw std::invalid_argument("jsd: histograms differ in binning");
  }
  return jsd(p.counts, q.counts);
}

namespace detail
{
struct LaneFoot
{
  double distance{std::numeric_limits<double>::infinity()};
  double heading{0.0};
};

inline LaneFoot nearest_lane(const CorridorMap & map, const Point2 & p)
{
  LaneFoot best;
  for (const auto & lane : map.lanes) {
    for (size_t k = 0; k + 1 < lane.size(); ++k) {
      const auto proj = project_to_segment(p, {lane[k].x, lane[k].y}, {lane[k + 1].x, lane[k + 1].y});
      if (proj.distance < best.distance) {
        best.distance = proj.distance;
        best.heading = std::atan2(lane[k + 1].y - lane[k].y, lane[k + 1].x - lane[k].x);
      }
    }
  }
  return best;
}
}  // namespace detail

/// Per-(agent, frame) values of a statistic over valid entries. With
/// `moving_only`, frames below 0.5 m/s are skipped.
inline std::vector<double> collect_statistic(
  const Scene & scene, const Statistic stat, const bool moving_only = false)
{
  const auto & t = scene.tensor;
  std::vector<double> out;
  for (int a = 0; a < t.num_agents(); ++a) {
    for (int f = 0; f < t.num_steps(); ++f) {
      if (!t.valid(a, f)) continue;
      if (moving_only && std::abs(t.at(a, f, kSpeed)) < 0.5) continue;
      const Point2 p{t.at(a, f, kPx), t.at(a, f, kPy)};
      switch (stat) {
        case Statistic::kSpeed:
          out.push_back(std::abs(t.at(a, f, kSpeed)));
          break;
        case Statistic::kNearestDist: {
          double best = std::numeric_limits<double>::infinity();
          for (int b = 0; b < t.num_agents(); ++b) {
            if (b == a || !t.valid(b, f)) continue;
            best = std::min(best, distance(p, {t.at(b, f, kPx), t.at(b, f, kPy)}));
          }
          if (std::isfinite(best)) out.push_back(best);
          break;
        }
        case Statistic::kLateralDev:
          if (!scene.map.lanes.empty()) out.push_back(detail::nearest_lane(scene.map, p).distance);
          break;
        case Statistic::kAngularDev:
          if (!scene.map.lanes.empty()) {
            out.push_back(std::abs(wrap_angle(t.at(a, f, kPsi) - detail::nearest_lane(scene.map, p).heading)));
          }
          break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-scene checks.

struct CollisionReport
{
  std::vector<uint8_t> agent;
  bool any{false};
  /// (frame, a, b) of every overlapping pair.
  std::vector<std::array<int, 3>> events;
};

inline CollisionReport collision_report(const SceneTensor & t)
{
  CollisionReport r;
  r.agent.assign(static_cast<size_t>(t.num_agents()), 0);
  for (int f = 0; f < t.num_steps(); ++f) {
    for (int a = 0; a < t.num_agents(); ++a) {
      if (!t.valid(a, f)) continue;
      const auto ba = t.box(a, f);
      for (int b = a + 1; b < t.num_agents(); ++b) {
        if (!t.valid(b, f) || !boxes_overlap(ba, t.box(b, f))) continue;
        r.agent[static_cast<size_t>(a)] = 1;
        r.agent[static_cast<size_t>(b)] = 1;
        r.events.push_back({f, a, b});
        r.any = true;
      }
    }
  }
  return r;
}

struct OffroadReport
{
  std::vector<uint8_t> agent;
  bool any{false};
};

/// Agent center farther than `b_max` from every lane centerline (or any box
/// corner with `footprint`).
inline OffroadReport offroad_report(const Scene & scene, const double b_max, const bool footprint = false)
{
  const auto & t = scene.tensor;
  OffroadReport r;
  r.agent.assign(static_cast<size_t>(t.num_agents()), 0);
  for (int a = 0; a < t.num_agents(); ++a) {
    for (int f = 0; f < t.num_steps() && !r.agent[static_cast<size_t>(a)]; ++f) {
      if (!t.valid(a, f)) continue;
      std::vector<Point2> pts{{t.at(a, f, kPx), t.at(a, f, kPy)}};
      if (footprint) {
        const auto c = t.box(a, f).corners();
        pts.assign(c.begin(), c.end());
      }
      for (const auto & p : pts) {
        if (scene.map.centerline_distance(p) > b_max) {
          r.agent[static_cast<size_t>(a)] = 1;
          r.any = true;
          break;
        }
      }
    }
  }
  return r;
}

struct KinematicLimits
{
  double speed{30.0};
  double accel{6.0};
  double jerk{20.0};
  double yaw_rate{1.5};
  double lateral_accel{8.0};
  double curvature{0.5};
  /// Curvature is only checked above this speed.
  double curvature_min_speed{0.5};
  double tolerance{1e-9};
};

struct KinematicReport
{
  std::vector<uint8_t> feasible;
  bool all{true};
  /// Name of the first violated quantity per agent (empty when feasible).
  std::vector<std::string> reason;
};

inline KinematicReport kinematic_report(const SceneTensor & t, const KinematicLimits & lim = {})
{
  if (t.num_steps() < 3) throw std::invalid_argument("kinematic_report needs at least 3 frames");
  const double dt = t.dt();
  KinematicReport r;
  r.feasible.assign(static_cast<size_t>(t.num_agents()), 1);
  r.reason.assign(static_cast<size_t>(t.num_agents()), "");
  for (int a = 0; a < t.num_agents(); ++a) {
    auto fail = [&](const char * what) {
      if (!r.feasible[static_cast<size_t>(a)]) return;
      r.feasible[static_cast<size_t>(a)] = 0;
      r.reason[static_cast<size_t>(a)] = what;
      r.all = false;
    };
    for (int f = 0; f < t.num_steps(); ++f) {
      if (!t.valid(a, f)) continue;
      const double v = t.at(a, f, kSpeed);
      if (std::abs(v) > lim.speed + lim.tolerance) fail("speed");
      if (f + 1 >= t.num_steps() || !t.valid(a, f + 1)) continue;
      const double acc = (t.at(a, f + 1, kSpeed) - v) / dt;
      if (std::abs(acc) > lim.accel + lim.tolerance) fail("accel");
      const double yaw = wrap_angle(t.at(a, f + 1, kPsi) - t.at(a, f, kPsi)) / dt;
      if (std::abs(yaw) > lim.yaw_rate + lim.tolerance) fail("yaw_rate");
      if (std::abs(v * yaw) > lim.lateral_accel + lim.tolerance) fail("lateral_accel");
      if (std::abs(v) >= lim.curvature_min_speed && std::abs(yaw / v) > lim.curvature + lim.tolerance) {
        fail("curvature");
      }
      if (f + 2 < t.num_steps() && t.valid(a, f + 2)) {
        const double acc2 = (t.at(a, f + 2, kSpeed) - t.at(a, f + 1, kSpeed)) / dt;
        if (std::abs(acc2 - acc) / dt > lim.jerk + lim.tolerance) fail("jerk");
      }
    }
  }
  return r;
}

struct TtcProfile
{
  /// Per frame; frames where the ego is invalid hold NaN.
  std::vector<double> ttc;
  double lt1{0.0};
  double lt2{0.0};
  double lt3{0.0};
  double mean{0.0};
};

/// Earliest t in [0, horizon] with |d + w t| <= r, or +inf.
inline double contact_time(const double dx, const double dy, const double wx, const double wy, const double r)
{
  const double c = dx * dx + dy * dy - r * r;
  if (c <= 0.0) return 0.0;
  const double a = wx * wx + wy * wy;
  const double b = 2.0 * (dx * wx + dy * wy);
  if (a == 0.0 || b >= 0.0) return std::numeric_limits<double>::infinity();
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  return (-b - std::sqrt(disc)) / (2.0 * a);
}

/// Constant-velocity time to contact between the ego's safety circles
/// (radius width / 2 at +/- length / 4) and every other agent's.
inline TtcProfile ttc_profile(const SceneTensor & t, const int ego, const double horizon = 10.0)
{
  if (ego < 0 || ego >= t.num_agents()) throw std::invalid_argument("ttc_profile: ego index out of range");
  TtcProfile p;
  int counted = 0;
  double sum = 0.0;
  for (int f = 0; f < t.num_steps(); ++f) {
    if (!t.valid(ego, f)) {
      p.ttc.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double best = horizon;
    auto circles = [&](int a) {
      const double q = 0.25 * t.at(a, f, kLength);
      const double c = std::cos(t.at(a, f, kPsi));
      const double s = std::sin(t.at(a, f, kPsi));
      const double v = t.at(a, f, kSpeed);
      const double x = t.at(a, f, kPx);
      const double y = t.at(a, f, kPy);
      return std::array<std::array<double, 4>, 2>{{{x + q * c, y + q * s, v * c, v * s}, {x - q * c, y - q * s, v * c, v * s}}};
    };
    const auto ce = circles(ego);
    const double re = 0.5 * t.at(ego, f, kWidth);
    for (int b = 0; b < t.num_agents(); ++b) {
      if (b == ego || !t.valid(b, f)) continue;
      const auto cb = circles(b);
      const double r = re + 0.5 * t.at(b, f, kWidth);
      for (const auto & i : ce) {
        for (const auto & j : cb) {
          best = std::min(best, contact_time(j[0] - i[0], j[1] - i[1], j[2] - i[2], j[3] - i[3], r));
        }
      }
    }
    p.ttc.push_back(best);
    ++counted;
    sum += best;
    p.lt1 += best < 1.0 ? 1.0 : 0.0;
    p.lt2 += best < 2.0 ? 1.0 : 0.0;
    p.lt3 += best < 3.0 ? 1.0 : 0.0;
  }
  if (counted > 0) {
    p.lt1 /= counted;
    p.lt2 /= counted;
    p.lt3 /= counted;
    p.mean = sum / counted;
  }
  return p;
}

struct MotionIntensity
{
  double accel_mean{0.0};
  double jerk_mean{0.0};
};

inline MotionIntensity ego_motion_intensity(const SceneTensor & t, const int ego)
{
  if (t.num_steps() < 3) throw std::invalid_argument("ego_motion_intensity needs at least 3 frames");
  if (ego < 0 || ego >= t.num_agents()) throw std::invalid_argument("ego index out of range");
  const double dt = t.dt();
  MotionIntensity m;
  int na = 0;
  int nj = 0;
  for (int f = 0; f + 1 < t.num_steps(); ++f) {
    if (!t.valid(ego, f) || !t.valid(ego, f + 1)) continue;
    const double a = (t.at(ego, f + 1, kSpeed) - t.at(ego, f, kSpeed)) / dt;
    m.accel_mean += std::abs(a);
    ++na;
    if (f + 2 < t.num_steps() && t.valid(ego, f + 2)) {
      const double a2 = (t.at(ego, f + 2, kSpeed) - t.at(ego, f + 1, kSpeed)) / dt;
      m.jerk_mean += std::abs(a2 - a) / dt;
      ++nj;
    }
  }
  if (na == 0) throw std::invalid_argument("ego has no consecutive valid frames");
  m.accel_mean /= na;
  m.jerk_mean = nj > 0 ? m.jerk_mean / nj : 0.0;
  return m;
}

/// True iff the ego's first collision is with an agent whose center lies in
/// the ego's rear sector (bearing beyond `rear_half_angle` from straight
/// back is excluded) while the ego is not reversing.
inline bool nonresponsible_collision(
  const SceneTensor & t, const int ego, const double rear_half_angle = std::numbers::pi / 4)
{
  const auto rep = collision_report(t);
  for (const auto & ev : rep.events) {
    const int f = ev[0];
    if (ev[1] != ego && ev[2] != ego) continue;
    const int other = ev[1] == ego ? ev[2] : ev[1];
    if (t.at(ego, f, kSpeed) < 0.0) return false;
    const double bearing = wrap_angle(
      std::atan2(t.at(other, f, kPy) - t.at(ego, f, kPy), t.at(other, f, kPx) - t.at(ego, f, kPx)) -
      t.at(ego, f, kPsi));
    return std::abs(bearing) >= std::numbers::pi - rear_half_angle;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Scene report.

struct MetricsConfig
{
  KinematicLimits limits;
  /// Off-road threshold; negative uses the map half width.
  double b_max{-1.0};
  bool footprint_offroad{false};
  double ttc_horizon{10.0};
};

struct SceneReport
{
  std::string scene_id;
  std::vector<uint8_t> collided;
  std::vector<uint8_t> offroad;
  std::vector<uint8_t> kin_feasible;
  bool any_collision{false};
  bool any_offroad{false};
  bool all_feasible{true};
  bool valid{false};
  /// Fraction of agents involved in a collision.
  double collision_rate{0.0};
  TtcProfile ttc;
  MotionIntensity ego_motion;
  bool nonresponsible{false};
};

inline SceneReport evaluate_scene(const Scene & scene, const MetricsConfig & cfg = {}, std::string id = "")
{
  const auto & t = scene.tensor;
  SceneReport r;
  r.scene_id = std::move(id);
  const auto col = collision_report(t);
  const auto off =
    offroad_report(scene, cfg.b_max < 0.0 ? scene.map.half_width : cfg.b_max, cfg.footprint_offroad);
  const auto kin = kinematic_report(t, cfg.limits);
  r.collided = col.agent;
  r.offroad = off.agent;
  r.kin_feasible = kin.feasible;
  r.any_collision = col.any;
  r.any_offroad = off.any;
  r.all_feasible = kin.all;
  r.valid = !r.any_collision && !r.any_offroad && r.all_feasible;
  double n = 0.0;
  for (const auto c : col.agent) n += c;
  r.collision_rate = t.num_agents() > 0 ? n / t.num_agents() : 0.0;
  r.ttc = ttc_profile(t, scene.ego_index, cfg.ttc_horizon);
  r.ego_motion = ego_motion_intensity(t, scene.ego_index);
  r.nonresponsible = nonresponsible_collision(t, scene.ego_index);
  return r;
}

inline void write_report_csv(std::ostream & out, const std::vector<SceneReport> & reports)
{
  out << "scene_id,collided,offroad,kin_feasible,valid,ttc_mean,ttc_lt1,ttc_lt2,ttc_lt3,accel_mean,jerk_mean,nc\n";
  double sums[11] = {};
  for (const auto & r : reports) {
    const double row[11] = {
      r.any_collision ? 1.0 : 0.0, r.any_offroad ? 1.0 : 0.0, r.all_feasible ? 1.0 : 0.0, r.valid ? 1.0 : 0.0,
      r.ttc.mean, r.ttc.lt1, r.ttc.lt2, r.ttc.lt3, r.ego_motion.accel_mean, r.ego_motion.jerk_mean,
      r.nonresponsible ? 1.0 : 0.0};
    out << r.scene_id;
    for (int i = 0; i < 11; ++i) {
      out << ',' << row[i];
      sums[i] += row[i];
    }
    out << '\n';
  }
  out << "ALL";
  for (const double s : sums) out << ',' << (reports.empty() ? 0.0 : s / static_cast<double>(reports.size()));
  out << '\n';
}

/// Exact sign test: one-sided p-value for `wins` successes out of
/// `wins + losses` non-tied pairs under p = 1/2.
inline double sign_test_p_value(const int wins, const int losses)
{
  const int n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace omega

#endif  // OMEGA__METRICS_HPP_

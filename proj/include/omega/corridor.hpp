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

#ifndef OMEGA__CORRIDOR_HPP_
#define OMEGA__CORRIDOR_HPP_

#include "omega/diffusion.hpp"
#include "omega/geometry.hpp"
#include "omega/routes.hpp"
#include "omega/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omega
{

enum class MapKind { kStraight, kCurve, kMerge };

inline MapKind parse_map_kind(std::string_view name)
{
  if (name == "straight") return MapKind::kStraight;
  if (name == "curve") return MapKind::kCurve;
  if (name == "merge") return MapKind::kMerge;
  throw std::invalid_argument("unknown map kind: " + std::string(name));
}

inline std::string to_string(const MapKind kind)
{
  switch (kind) {
    case MapKind::kStraight:
      return "straight";
    case MapKind::kCurve:
      return "curve";
    case MapKind::kMerge:
      return "merge";
  }
  return "?";
}

struct MapSpec
{
  MapKind kind{MapKind::kStraight};
  int lanes{2};
  double length{400.0};
  double lane_width{3.5};
  double curve_radius{200.0};
  double lead_in{40.0};
  double spacing{2.0};
};

namespace detail
{
inline Polyline straight_lane(
  const double x0, const double x1, const double y, const double spacing)
{
  Polyline out;
  const int n = std::max(1, static_cast<int>(std::ceil((x1 - x0) / spacing)));
  for (int i = 0; i <= n; ++i) out.push_back({x0 + (x1 - x0) * i / n, y, 0.0});
  return out;
}
}  // namespace detail

/// Builds one of the synthetic corridors. Lanes run in +x at the start.
///
/// - straight: `lanes` parallel lanes.
/// - curve: a straight lead-in followed by a left-hand arc.
/// - merge: lane 0 (main, split at the merge point into 0 and 1), lane 2
///   (left lane before the fork) with successors 3 (left continuation) and
///   4 (connector merging into lane 1).
inline CorridorMap make_map(const MapSpec & spec)
{
  if (spec.lanes < 1) throw std::invalid_argument("map needs at least one lane");
  CorridorMap map;
  map.half_width = 0.5 * spec.lane_width;
  const double w = spec.lane_width;
  switch (spec.kind) {
    case MapKind::kStraight:
      for (int i = 0; i < spec.lanes; ++i) {
        map.lanes.push_back(detail::straight_lane(0.0, spec.length, i * w, spec.spacing));
      }
      map.successors.assign(map.lanes.size(), {});
      break;
    case MapKind::kCurve: {
      const double r0 = spec.curve_radius;
      const double arc_len = std::max(spec.length - spec.lead_in, 10.0);
      const double sweep = arc_len / r0;
      for (int i = 0; i < spec.lanes; ++i) {
        const double offset = i * w;
        const double r = r0 - offset;
        Polyline lane = detail::straight_lane(0.0, spec.lead_in, offset, spec.spacing);
        const int n = std::max(2, static_cast<int>(std::ceil(sweep * r / spec.spacing)));
        for (int k = 1; k <= n; ++k) {
          const double phi = sweep * k / n;
          lane.push_back({spec.lead_in + r * std::sin(phi), r0 - r * std::cos(phi), wrap_angle(phi)});
        }
        map.lanes.push_back(std::move(lane));
      }
      map.successors.assign(map.lanes.size(), {});
      break;
    }
    case MapKind::kMerge: {
      const double fork = 90.0;
      const double join = 130.0;
      map.lanes.push_back(detail::straight_lane(0.0, join, 0.0, spec.spacing));
      map.lanes.push_back(detail::straight_lane(join, spec.length, 0.0, spec.spacing));
      map.lanes.push_back(detail::straight_lane(0.0, fork, w, spec.spacing));
      map.lanes.push_back(detail::straight_lane(fork, spec.length, w, spec.spacing));
      Polyline connector;
      const int n = std::max(2, static_cast<int>(std::ceil((join - fork) / spec.spacing)));
      for (int k = 0; k <= n; ++k) {
        const double u = static_cast<double>(k) / n;
        const double x = fork + u * (join - fork);
        const double y = 0.5 * w * (1.0 + std::cos(std::numbers::pi * u));
        const double dydx = -0.5 * w * std::numbers::pi * std::sin(std::numbers::pi * u) / (join - fork);
        connector.push_back({x, y, std::atan(dydx)});
      }
      map.lanes.push_back(std::move(connector));
      map.successors = {{1}, {}, {3, 4}, {}, {1}};
      break;
    }
  }
  map.validate();
  return map;
}

// ---------------------------------------------------------------------------
// Arc-length parameterized path used by the traffic simulator.

class LanePath
{
public:
  LanePath() = default;

  explicit LanePath(Polyline line) : line_(std::move(line))
  {
    if (line_.size() < 2) throw std::invalid_argument("path needs at least two points");
    s_.assign(line_.size(), 0.0);
    for (size_t k = 1; k < line_.size(); ++k) {
      s_[k] = s_[k - 1] + std::hypot(line_[k].x - line_[k - 1].x, line_[k].y - line_[k - 1].y);
    }
  }

  double length() const { return s_.back(); }
  const Polyline & line() const { return line_; }

  /// Pose at arc length s, extrapolated straight past either end, shifted
  /// `offset` metres to the left.
  Pose2 at(const double s, const double offset = 0.0) const
  {
    size_t k = 0;
    if (s >= s_.back()) {
      k = line_.size() - 2;
    } else if (s > 0.0) {
      k = static_cast<size_t>(std::upper_bound(s_.begin(), s_.end(), s) - s_.begin()) - 1;
      k = std::min(k, line_.size() - 2);
    }
    const double seg = s_[k + 1] - s_[k];
    const double u = seg > 0.0 ? (s - s_[k]) / seg : 0.0;
    const auto & a = line_[k];
    const auto & b = line_[k + 1];
    const double heading = std::atan2(b.y - a.y, b.x - a.x);
    const double h = u <= 0.0 ? a.heading : (u >= 1.0 ? b.heading : wrap_angle(a.heading + u * wrap_angle(b.heading - a.heading)));
    const double x = a.x + u * (b.x - a.x) - offset * std::sin(heading);
    const double y = a.y + u * (b.y - a.y) + offset * std::cos(heading);
    return {x, y, h};
  }

  /// Arc length and lateral offset of `p`, searching near `s_hint`.
  std::pair<double, double> locate(const Point2 & p, const double s_hint, const double window) const
  {
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    double best_lat = 0.0;
    const auto lo = std::lower_bound(s_.begin(), s_.end(), s_hint - window) - s_.begin();
    const auto hi = std::upper_bound(s_.begin(), s_.end(), s_hint + window) - s_.begin();
    const size_t k0 = static_cast<size_t>(std::max<long>(0, lo - 1));
    const size_t k1 = std::min(line_.size() - 1, static_cast<size_t>(hi));
    for (size_t k = k0; k < k1; ++k) {
      const auto proj = project_to_segment(p, {line_[k].x, line_[k].y}, {line_[k + 1].x, line_[k + 1].y});
      if (proj.distance < best_d) {
        best_d = proj.distance;
        best_s = s_[k] + proj.fraction * (s_[k + 1] - s_[k]);
        best_lat = proj.distance;
      }
    }
    return {best_s, best_lat};
  }

  /// Arc length of the projection of `p` onto the whole path.
  double project(const Point2 & p) const { return locate(p, 0.5 * length(), length()).first; }

private:
  Polyline line_;
  std::vector<double> s_;
};

inline LanePath lane_sequence_path(const CorridorMap & map, const std::vector<int> & ids)
{
  Polyline line;
  for (const int id : ids) {
    for (const auto & q : map.lanes.at(static_cast<size_t>(id))) {
      if (!line.empty() && std::hypot(q.x - line.back().x, q.y - line.back().y) < 1e-9) continue;
      line.push_back(q);
    }
  }
  return LanePath(std::move(line));
}

// ---------------------------------------------------------------------------
// IDM traffic.

struct TrafficConfig
{
  double dt{0.5};
  int history_steps{4};
  int future_steps{16};
  double sim_dt{0.1};
  double speed_min{6.0};
  double speed_max{14.0};
  double max_accel{1.5};
  double comfort_decel{2.0};
  double max_decel{6.0};
  double min_gap{2.0};
  double headway_min{1.0};
  double headway_max{1.8};
  double brake_probability{0.3};
  double lateral_jitter{0.25};
  double length_min{4.2};
  double length_max{5.0};
  double width_min{1.8};
  double width_max{2.0};
  double leader_lateral{2.5};
  int placement_retries{400};
};

struct SimAgent
{
  LanePath path;
  double s{0.0};
  double v{0.0};
  double desired{10.0};
  double headway{1.5};
  double offset{0.0};
  double length{4.5};
  double width{1.9};
  double brake_start{1e9};
  double brake_end{1e9};
  double brake_target{0.0};
};

/// Intelligent-driver-model rollout along fixed lane paths.
class TrafficSimulator
{
public:
  TrafficSimulator(std::vector<SimAgent> agents, TrafficConfig cfg)
  : agents_(std::move(agents)), cfg_(cfg)
  {
  }

  const std::vector<SimAgent> & agents() const { return agents_; }

  void step(const double time)
  {
    const size_t n = agents_.size();
    std::vector<double> accel(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const auto & me = agents_[i];
      const double desired =
        (time >= me.brake_start && time < me.brake_end) ? me.brake_target : me.desired;
      double free_term = desired > 0.1 ? std::pow(me.v / desired, 4.0) : (me.v > 0.0 ? 1e3 : 0.0);
      double interaction = 0.0;
      const Pose2 pose = me.path.at(me.s, me.offset);
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto & other = agents_[j];
        const Pose2 op = other.path.at(other.s, other.offset);
        const double dist = std::hypot(op.x - pose.x, op.y - pose.y);
        if (dist > 80.0) continue;
        const auto [s_other, lat] = me.path.locate({op.x, op.y}, me.s + dist, 12.0);
        if (lat > cfg_.leader_lateral || s_other <= me.s) continue;
        const double gap = std::max(s_other - me.s - 0.5 * (me.length + other.length), 0.1);
        const double dv = me.v - other.v;
        const double s_star = cfg_.min_gap + std::max(
          0.0, me.v * me.headway + me.v * dv / (2.0 * std::sqrt(cfg_.max_accel * cfg_.comfort_decel)));
        interaction = std::max(interaction, (s_star / gap) * (s_star / gap));
      }
      double a = cfg_.max_accel * (1.0 - free_term - interaction);
      accel[i] = std::clamp(a, -cfg_.max_decel, cfg_.max_accel);
    }
    for (size_t i = 0; i < n; ++i) {
      auto & me = agents_[i];
      const double v_next = std::max(0.0, me.v + accel[i] * cfg_.sim_dt);
      me.s += 0.5 * (me.v + v_next) * cfg_.sim_dt;
      me.v = v_next;
    }
  }

private:
  std::vector<SimAgent> agents_;
  TrafficConfig cfg_;
};

// ---------------------------------------------------------------------------
// Scenes.

struct CorridorSceneSpec
{
  MapSpec map;
  int num_agents{8};
  TrafficConfig traffic;
  /// Merge maps only: place the ego on the main lane just upstream of the
  /// connector and a neighbour ahead on the left lane.
  bool adversarial_layout{false};
};

namespace detail
{
inline std::vector<std::vector<int>> entry_routes(const CorridorMap & map)
{
  std::vector<int> has_pred(map.lanes.size(), 0);
  for (const auto & succ : map.successors) {
    for (const int s : succ) has_pred[static_cast<size_t>(s)] = 1;
  }
  std::vector<std::vector<int>> routes;
  for (size_t lane = 0; lane < map.lanes.size(); ++lane) {
    if (has_pred[lane]) continue;
    for (auto & r : enumerate_lane_paths(map, static_cast<int>(lane), 8)) routes.push_back(std::move(r));
  }
  return routes;
}

inline bool placement_clear(
  const std::vector<SimAgent> & placed, const SimAgent & cand, const double margin)
{
  const Pose2 p = cand.path.at(cand.s, cand.offset);
  const OrientedBox box{p.x, p.y, p.heading, cand.length + 2.0 * margin, cand.width + 0.4};
  for (const auto & o : placed) {
    const Pose2 q = o.path.at(o.s, o.offset);
    const OrientedBox ob{q.x, q.y, q.heading, o.length + 2.0 * margin, o.width + 0.4};
    if (boxes_overlap(box, ob)) return false;
  }
  return true;
}
}  // namespace detail

/// Simulates a corridor scene. History frames are context (all channels in
/// the inpainting mask); future frames hold the simulated log and are free.
inline Scene make_corridor_scene(const CorridorSceneSpec & spec, Rng & rng)
{
  const auto & tc = spec.traffic;
  if (spec.num_agents < 1) throw std::invalid_argument("num_agents must be >= 1");
  if (tc.history_steps < 1) throw std::invalid_argument("history_steps must be >= 1");
  if (tc.future_steps < 0) throw std::invalid_argument("future_steps must be >= 0");
  if (spec.adversarial_layout && spec.map.kind != MapKind::kMerge) {
    throw std::invalid_argument("adversarial layout requires a merge map");
  }
  Scene scene;
  scene.map = make_map(spec.map);
  const auto routes = detail::entry_routes(scene.map);
  std::vector<LanePath> paths;
  for (const auto & r : routes) paths.push_back(lane_sequence_path(scene.map, r));

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto range = [&](const double lo, const double hi) { return lo + (hi - lo) * uni(rng); };
  const double spacing_margin = 2.0;

  std::vector<SimAgent> placed;
  for (int a = 0; a < spec.num_agents; ++a) {
    bool ok = false;
    for (int attempt = 0; attempt < tc.placement_retries && !ok; ++attempt) {
      SimAgent cand;
      size_t route = std::uniform_int_distribution<size_t>(0, paths.size() - 1)(rng);
      // Leave room to drive the whole horizon without leaving the lane.
      const double travel = (tc.history_steps + tc.future_steps) * tc.dt * (tc.speed_max + 2.0) + 10.0;
      double s_lo = 5.0;
      double s_hi = std::min(150.0, paths[route].length() - travel);
      if (spec.adversarial_layout && a < 2) {
        // Route 0 follows the main lane, the left-lane route that keeps
        // straight is the attacker's logged behaviour.
        const std::vector<int> want = a == 0 ? std::vector<int>{0, 1} : std::vector<int>{2, 3};
        route = static_cast<size_t>(std::find(routes.begin(), routes.end(), want) - routes.begin());
        if (route >= routes.size()) throw std::logic_error("merge map lacks the expected routes");
        if (a == 0) {
          s_lo = 62.0;
          s_hi = 75.0;
        } else {
          const double ego_s = placed[0].s;
          s_lo = ego_s + 1.0;
          s_hi = ego_s + 8.0;
        }
      }
      cand.path = paths[route];
      cand.s = range(s_lo, std::max(s_lo, s_hi));
      cand.length = range(tc.length_min, tc.length_max);
      cand.width = range(tc.width_min, tc.width_max);
      cand.offset = range(-tc.lateral_jitter, tc.lateral_jitter);
      cand.desired = range(tc.speed_min, tc.speed_max);
      cand.v = std::clamp(cand.desired + range(-2.0, 2.0), 0.0, tc.speed_max + 2.0);
      if (spec.adversarial_layout && a == 1) {
        cand.desired = placed[0].desired + range(-0.5, 0.5);
        cand.v = placed[0].v + range(-0.5, 0.5);
      }
      cand.headway = range(tc.headway_min, tc.headway_max);
      if (uni(rng) < tc.brake_probability) {
        cand.brake_start = range(1.5, 7.0);
        cand.brake_end = cand.brake_start + range(1.5, 4.0);
        cand.brake_target = range(0.0, 0.5) * cand.desired;
      }
      if (detail::placement_clear(placed, cand, spacing_margin)) {
        placed.push_back(std::move(cand));
        ok = true;
      }
    }
    if (!ok) {
      throw std::runtime_error(
        "corridor placement failed for agent " + std::to_string(a) + "; reduce num_agents");
    }
  }

  const int frames = tc.history_steps + tc.future_steps;
  scene.tensor = SceneTensor(spec.num_agents, frames, tc.dt);
  TrafficSimulator sim(std::move(placed), tc);
  const int sub = std::max(1, static_cast<int>(std::lround(tc.dt / tc.sim_dt)));
  double time = 0.0;
  for (int f = 0; f < frames; ++f) {
    if (f > 0) {
      for (int k = 0; k < sub; ++k) {
        sim.step(time);
        time += tc.sim_dt;
      }
    }
    for (int a = 0; a < spec.num_agents; ++a) {
      const auto & ag = sim.agents()[static_cast<size_t>(a)];
      const Pose2 p = ag.path.at(ag.s, ag.offset);
      auto & t = scene.tensor;
      t.at(a, f, kPx) = p.x;
      t.at(a, f, kPy) = p.y;
      t.at(a, f, kPsi) = wrap_angle(p.heading);
      t.at(a, f, kSpeed) = ag.v;
      t.at(a, f, kLength) = ag.length;
      t.at(a, f, kWidth) = ag.width;
      t.set_valid(a, f, true);
      t.set_inpaint_frame(a, f, f < tc.history_steps);
    }
  }
  scene.ego_index = 0;
  scene.attacker_index = spec.adversarial_layout && spec.num_agents > 1 ? 1 : -1;
  scene.tensor.validate();
  return scene;
}

/// Marks the final-frame motion channels of `agent` as context holding
/// `goal` = (px, py, psi, v).
inline Scene set_goal_condition(Scene scene, const int agent, const std::array<double, 4> & goal)
{
  auto & t = scene.tensor;
  if (agent < 0 || agent >= t.num_agents()) {
    throw std::invalid_argument("goal agent index " + std::to_string(agent) + " out of range");
  }
  const int last = t.num_steps() - 1;
  if (!t.valid(agent, last)) throw std::invalid_argument("goal agent is not valid at the final step");
  for (const double g : goal) {
    if (!std::isfinite(g)) throw std::invalid_argument("goal state must be finite");
  }
  t.at(agent, last, kPx) = goal[0];
  t.at(agent, last, kPy) = goal[1];
  t.at(agent, last, kPsi) = wrap_angle(goal[2]);
  t.at(agent, last, kSpeed) = goal[3];
  t.set_inpaint_frame(agent, last, true);
  return scene;
}

/// Number of leading frames in which every motion channel of `agent` is
/// context.
inline int history_length(const SceneTensor & t, const int agent)
{
  int h = 0;
  while (h < t.num_steps()) {
    bool all = t.valid(agent, h);
    for (int c = 0; c < kMotionDim && all; ++c) all = t.inpaint(agent, h, c);
    if (!all) break;
    ++h;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Agent-centric trajectory codec.

/// Maps an agent's (px, py, psi, v) trajectory to the normalized,
/// frame-major vector the denoiser works on: positions and heading are
/// expressed in the frame of the agent pose at `anchor_frame`, then each
/// (frame, channel) is standardized.
class TrajectoryCodec
{
public:
  TrajectoryCodec() = default;

  TrajectoryCodec(const int frames, const int anchor_frame, Vector mean, Vector scale)
  : frames_(frames), anchor_(anchor_frame), mean_(std::move(mean)), scale_(std::move(scale))
  {
    if (frames_ < 1 || anchor_ < 0 || anchor_ >= frames_) {
      throw std::invalid_argument("codec anchor frame outside the horizon");
    }
    if (mean_.size() != dim() || scale_.size() != dim() || (scale_.array() <= 0.0).any()) {
      throw std::invalid_argument("codec statistics have the wrong shape or non-positive scale");
    }
  }

  int frames() const { return frames_; }
  int anchor_frame() const { return anchor_; }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(frames_) * kMotionDim; }
  const Vector & mean() const { return mean_; }
  const Vector & scale() const { return scale_; }

  /// Local coordinates of `states` (frames x 4, physical) around `origin`.
  static Vector to_local(const Matrix & states, const Pose2 & origin)
  {
    const double c = std::cos(origin.heading);
    const double s = std::sin(origin.heading);
    Vector out(states.rows() * kMotionDim);
    for (Eigen::Index f = 0; f < states.rows(); ++f) {
      const double dx = states(f, kPx) - origin.x;
      const double dy = states(f, kPy) - origin.y;
      out(f * kMotionDim + kPx) = c * dx + s * dy;
      out(f * kMotionDim + kPy) = -s * dx + c * dy;
      out(f * kMotionDim + kPsi) = wrap_angle(states(f, kPsi) - origin.heading);
      out(f * kMotionDim + kSpeed) = states(f, kSpeed);
    }
    return out;
  }

  Vector encode(const Matrix & states, const Pose2 & origin) const
  {
    check_rows(states.rows());
    return ((to_local(states, origin) - mean_).array() / scale_.array()).matrix();
  }

  /// Physical states (frames x 4). Heading is left unwrapped.
  Matrix decode(const Vector & z, const Pose2 & origin) const
  {
    if (z.size() != dim()) throw std::invalid_argument("codec decode: wrong vector size");
    const Vector local = mean_ + scale_.cwiseProduct(z);
    const double c = std::cos(origin.heading);
    const double s = std::sin(origin.heading);
    Matrix out(frames_, kMotionDim);
    for (int f = 0; f < frames_; ++f) {
      const double lx = local(f * kMotionDim + kPx);
      const double ly = local(f * kMotionDim + kPy);
      out(f, kPx) = origin.x + c * lx - s * ly;
      out(f, kPy) = origin.y + s * lx + c * ly;
      out(f, kPsi) = origin.heading + local(f * kMotionDim + kPsi);
      out(f, kSpeed) = local(f * kMotionDim + kSpeed);
    }
    return out;
  }

  /// Gradient with respect to z given the gradient with respect to the
  /// decoded physical states (frames x 4, flattened frame-major).
  Vector pullback(const Vector & grad_states, const Pose2 & origin) const
  {
    if (grad_states.size() != dim()) throw std::invalid_argument("codec pullback: wrong size");
    const double c = std::cos(origin.heading);
    const double s = std::sin(origin.heading);
    Vector out(dim());
    for (int f = 0; f < frames_; ++f) {
      const Eigen::Index i = static_cast<Eigen::Index>(f) * kMotionDim;
      const double gx = grad_states(i + kPx);
      const double gy = grad_states(i + kPy);
      out(i + kPx) = scale_(i + kPx) * (c * gx + s * gy);
      out(i + kPy) = scale_(i + kPy) * (-s * gx + c * gy);
      out(i + kPsi) = scale_(i + kPsi) * grad_states(i + kPsi);
      out(i + kSpeed) = scale_(i + kSpeed) * grad_states(i + kSpeed);
    }
    return out;
  }

  /// Fits per-(frame, channel) statistics to local trajectories (one per
  /// column) with a floor on the scale.
  static TrajectoryCodec fit(const Matrix & local, const int frames, const int anchor_frame,
                             const double min_scale = 0.05)
  {
    if (local.cols() == 0) throw std::invalid_argument("codec fit: empty dataset");
    const Vector mean = local.rowwise().mean();
    Vector scale(local.rows());
    for (Eigen::Index r = 0; r < local.rows(); ++r) {
      const double var = (local.row(r).array() - mean(r)).square().mean();
      scale(r) = std::max(std::sqrt(var), min_scale);
    }
    return TrajectoryCodec(frames, anchor_frame, mean, scale);
  }

  nlohmann::json to_json() const
  {
    return {
      {"frames", frames_},
      {"anchor_frame", anchor_},
      {"mean", std::vector<double>(mean_.begin(), mean_.end())},
      {"scale", std::vector<double>(scale_.begin(), scale_.end())}};
  }

  static TrajectoryCodec from_json(const nlohmann::json & j)
  {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("scale").get<std::vector<double>>();
    return TrajectoryCodec(
      j.at("frames").get<int>(), j.at("anchor_frame").get<int>(),
      Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size())),
      Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size())));
  }

private:
  void check_rows(const Eigen::Index rows) const
  {
    if (rows != frames_) throw std::invalid_argument("codec: trajectory has the wrong frame count");
  }

  int frames_{1};
  int anchor_{0};
  Vector mean_;
  Vector scale_;
};

/// Motion states of one agent as a frames x 4 matrix.
inline Matrix agent_states(const SceneTensor & t, const int agent)
{
  Matrix out(t.num_steps(), kMotionDim);
  for (int f = 0; f < t.num_steps(); ++f) {
    for (int c = 0; c < kMotionDim; ++c) out(f, c) = t.at(agent, f, c);
  }
  return out;
}

/// Local (un-normalized) trajectories of every fully valid agent in
/// `count` simulated scenes, one per column. Map kinds cycle through
/// straight, curve and merge.
inline Matrix corridor_training_trajectories(
  const CorridorSceneSpec & base, const int count, Rng & rng)
{
  std::vector<Vector> cols;
  const std::array<MapKind, 3> kinds{MapKind::kStraight, MapKind::kCurve, MapKind::kMerge};
  for (int i = 0; i < count; ++i) {
    CorridorSceneSpec spec = base;
    spec.map.kind = kinds[static_cast<size_t>(i) % kinds.size()];
    spec.adversarial_layout = false;
    const Scene scene = make_corridor_scene(spec, rng);
    const int anchor = spec.traffic.history_steps - 1;
    for (int a = 0; a < scene.tensor.num_agents(); ++a) {
      cols.push_back(TrajectoryCodec::to_local(agent_states(scene.tensor, a), scene.tensor.pose(a, anchor)));
    }
  }
  Matrix out(cols.empty() ? 0 : cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

}  // namespace omega

#endif  // OMEGA__CORRIDOR_HPP_

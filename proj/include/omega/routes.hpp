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

#ifndef OMEGA__ROUTES_HPP_
#define OMEGA__ROUTES_HPP_

#include "omega/geometry.hpp"
#include "omega/scene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace omega
{

/// Resamples a polyline so consecutive points are at most `spacing` apart.
/// Headings are interpolated along the shorter arc.
inline Polyline densify(const Polyline & line, const double spacing)
{
  if (line.size() < 2 || !(spacing > 0.0)) return line;
  Polyline out;
  out.push_back(line.front());
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const auto & a = line[k];
    const auto & b = line[k + 1];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
    const double dh = wrap_angle(b.heading - a.heading);
    for (int i = 1; i <= pieces; ++i) {
      const double u = static_cast<double>(i) / pieces;
      out.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), wrap_angle(a.heading + u * dh)});
    }
  }
  return out;
}

struct PolylineProjection
{
  size_t segment{0};
  double fraction{0.0};
  double distance{std::numeric_limits<double>::infinity()};
  Point2 foot;
  double heading{0.0};
};

inline PolylineProjection project_to_polyline(const Polyline & line, const Point2 & p)
{
  PolylineProjection best;
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const auto proj = project_to_segment(p, {line[k].x, line[k].y}, {line[k + 1].x, line[k + 1].y});
    if (proj.distance < best.distance) {
      best.segment = k;
      best.fraction = proj.fraction;
      best.distance = proj.distance;
      best.foot = proj.foot;
      best.heading = wrap_angle(
        line[k].heading + proj.fraction * wrap_angle(line[k + 1].heading - line[k].heading));
    }
  }
  return best;
}

struct RouteOptions
{
  int depth_limit{4};
  /// Lanes farther than this from the pose are not route starts.
  double capture_radius{3.5};
  /// Start lanes whose direction differs more than this from the pose heading
  /// are skipped.
  double max_heading_error{0.5 * std::numbers::pi};
  double spacing{1.0};
};

/// Lane-id sequences reachable from `start` by simple paths of at most
/// `depth_limit` lanes; a path stops early at lanes without successors.
inline std::vector<std::vector<int>> enumerate_lane_paths(
  const CorridorMap & map, const int start, const int depth_limit)
{
  std::vector<std::vector<int>> out;
  std::vector<int> path{start};
  std::function<void()> dfs = [&]() {
    const int lane = path.back();
    bool extended = false;
    if (static_cast<int>(path.size()) < depth_limit) {
      for (const int next : map.successors[static_cast<size_t>(lane)]) {
        if (std::find(path.begin(), path.end(), next) != path.end()) continue;
        path.push_back(next);
        dfs();
        path.pop_back();
        extended = true;
      }
    }
    if (!extended) out.push_back(path);
  };
  if (depth_limit >= 1) dfs();
  return out;
}

/// Reference polylines for an agent at `pose`: every successor-graph path
/// from each nearby, direction-consistent lane, trimmed at the projection of
/// the pose and densified. Empty when no lane is within the capture radius.
inline std::vector<Polyline> route_candidates(
  const CorridorMap & map, const Pose2 & pose, const RouteOptions & opt = {})
{
  std::vector<Polyline> out;
  std::vector<std::vector<int>> seen;
  const Point2 p{pose.x, pose.y};
  for (size_t lane = 0; lane < map.lanes.size(); ++lane) {
    const auto proj = project_to_polyline(map.lanes[lane], p);
    if (proj.distance > opt.capture_radius) continue;
    if (std::abs(wrap_angle(proj.heading - pose.heading)) > opt.max_heading_error) continue;
    for (const auto & ids : enumerate_lane_paths(map, static_cast<int>(lane), opt.depth_limit)) {
      if (std::find(seen.begin(), seen.end(), ids) != seen.end()) continue;
      seen.push_back(ids);
      Polyline line;
      line.push_back({proj.foot.x, proj.foot.y, proj.heading});
      const auto & first = map.lanes[lane];
      for (size_t k = proj.segment + 1; k < first.size(); ++k) line.push_back(first[k]);
      for (size_t i = 1; i < ids.size(); ++i) {
        const auto & next = map.lanes[static_cast<size_t>(ids[i])];
        for (const auto & q : next) {
          const auto & back = line.back();
          if (std::hypot(q.x - back.x, q.y - back.y) < 1e-9) continue;
          line.push_back(q);
        }
      }
      if (line.size() < 2) line.push_back(first.back());
      Polyline dense = densify(line, opt.spacing);
      Polyline clean;
      for (const auto & q : dense) {
        if (!clean.empty() && std::hypot(q.x - clean.back().x, q.y - clean.back().y) < 1e-9) continue;
        clean.push_back(q);
      }
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Polyline & o) {
        if (o.size() != clean.size()) return false;
        for (size_t k = 0; k < o.size(); ++k) {
          if (std::hypot(o[k].x - clean[k].x, o[k].y - clean[k].y) > 1e-6) return false;
        }
        return true;
      });
      if (!duplicate) out.push_back(std::move(clean));
    }
  }
  return out;
}

/// Closest reference point over all candidates.
struct ReferencePoint
{
  int candidate{-1};
  int index{-1};
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  /// Perpendicular offset |n . (p - c)| with n the reference normal.
  double lateral{0.0};
  /// Signed version of `lateral` (left positive).
  double signed_lateral{0.0};
};

inline ReferencePoint nearest_reference(const Point2 & p, const std::vector<Polyline> & candidates)
{
  ReferencePoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < candidates.size(); ++c) {
    for (size_t k = 0; k < candidates[c].size(); ++k) {
      const auto & q = candidates[c][k];
      const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
      if (d2 < best_d2) {
        best_d2 = d2;
        best.candidate = static_cast<int>(c);
        best.index = static_cast<int>(k);
        best.x = q.x;
        best.y = q.y;
        best.heading = q.heading;
      }
    }
  }
  if (best.candidate >= 0) {
    best.signed_lateral =
      -std::sin(best.heading) * (p.x - best.x) + std::cos(best.heading) * (p.y - best.y);
    best.lateral = std::abs(best.signed_lateral);
  }
  return best;
}

}  // namespace omega

#endif  // OMEGA__ROUTES_HPP_

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

#ifndef OMEGA__GEOMETRY_HPP_
#define OMEGA__GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace omega
{

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(const double angle)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  a -= std::numbers::pi;
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

struct Pose2
{
  double x{0.0};
  double y{0.0};
  double heading{0.0};
};

struct Point2
{
  double x{0.0};
  double y{0.0};
};

inline double distance(const Point2 & a, const Point2 & b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct OrientedBox
{
  double cx{0.0};
  double cy{0.0};
  double heading{0.0};
  double length{1.0};
  double width{1.0};

  std::array<Point2, 4> corners() const
  {
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    const double hl = 0.5 * length;
    const double hw = 0.5 * width;
    return {{
      {cx + c * hl - s * hw, cy + s * hl + c * hw},
      {cx - c * hl - s * hw, cy - s * hl + c * hw},
      {cx - c * hl + s * hw, cy - s * hl - c * hw},
      {cx + c * hl + s * hw, cy + s * hl - c * hw},
    }};
  }

  bool contains(const Point2 & p, const double tol = 0.0) const
  {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    const double lon = std::cos(heading) * dx + std::sin(heading) * dy;
    const double lat = -std::sin(heading) * dx + std::cos(heading) * dy;
    return std::abs(lon) <= 0.5 * length + tol && std::abs(lat) <= 0.5 * width + tol;
  }
};

/// Largest projected gap between two rectangles over the four separating
/// axes. Positive means separated; non-positive means touching or overlap.
inline double box_separation(const OrientedBox & a, const OrientedBox & b)
{
  const auto ca = a.corners();
  const auto cb = b.corners();
  double best = -std::numeric_limits<double>::infinity();
  for (const double heading : {a.heading, b.heading}) {
    for (const double angle : {heading, heading + 0.5 * std::numbers::pi}) {
      const double ux = std::cos(angle);
      const double uy = std::sin(angle);
      double a_lo = std::numeric_limits<double>::infinity();
      double a_hi = -a_lo;
      double b_lo = a_lo;
      double b_hi = -a_lo;
      for (const auto & p : ca) {
        const double v = p.x * ux + p.y * uy;
        a_lo = std::min(a_lo, v);
        a_hi = std::max(a_hi, v);
      }
      for (const auto & p : cb) {
        const double v = p.x * ux + p.y * uy;
        b_lo = std::min(b_lo, v);
        b_hi = std::max(b_hi, v);
      }
      best = std::max(best, std::max(b_lo - a_hi, a_lo - b_hi));
    }
  }
  return best;
}

inline bool boxes_overlap(const OrientedBox & a, const OrientedBox & b)
{
  return box_separation(a, b) <= 0.0;
}

/// Projection of a point onto a segment [a, b].
struct SegmentProjection
{
  double distance{0.0};
  double fraction{0.0};
  Point2 foot;
};

inline SegmentProjection project_to_segment(const Point2 & p, const Point2 & a, const Point2 & b)
{
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const Point2 foot{a.x + u * dx, a.y + u * dy};
  return {distance(p, foot), u, foot};
}

/// True when `p` lies within the forward sector of `origin`.
inline bool in_forward_sector(
  const Pose2 & origin, const Point2 & p, const double half_angle, const double range)
{
  const double dx = p.x - origin.x;
  const double dy = p.y - origin.y;
  const double r = std::hypot(dx, dy);
  if (r > range || r == 0.0) return false;
  const double bearing = wrap_angle(std::atan2(dy, dx) - origin.heading);
  return std::abs(bearing) <= half_angle;
}

}  // namespace omega

#endif  // OMEGA__GEOMETRY_HPP_

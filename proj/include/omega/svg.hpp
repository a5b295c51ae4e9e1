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

#ifndef OMEGA__SVG_HPP_
#define OMEGA__SVG_HPP_

#include "omega/scene.hpp"
#include "omega/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>

namespace omega
{

namespace svg
{

struct Rgb
{
  double r, g, b;
};

inline std::string hex(const Rgb & c)
{
  auto q = [](double v) { return static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", q(c.r), q(c.g), q(c.b));
  return buf;
}

/// Role base color, darkened at low speed and bright at high speed.
inline Rgb speed_color(const Rgb & base, const double speed, const double v_max)
{
  const double s = v_max > 0.0 ? std::clamp(speed / v_max, 0.0, 1.0) : 1.0;
  const double k = 0.35 + 0.65 * s;
  return {base.r * k, base.g * k, base.b * k};
}

inline constexpr Rgb kEgo{0.90, 0.10, 0.10};
inline constexpr Rgb kAttacker{0.95, 0.80, 0.05};
inline constexpr Rgb kOther{0.15, 0.35, 0.90};

struct Bounds
{
  double x0{std::numeric_limits<double>::infinity()};
  double y0{std::numeric_limits<double>::infinity()};
  double x1{-std::numeric_limits<double>::infinity()};
  double y1{-std::numeric_limits<double>::infinity()};

  void add(const double x, const double y)
  {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  bool empty() const { return !(x0 <= x1 && y0 <= y1); }
};

/// World to pixel map with y flipped.
class Canvas
{
public:
  Canvas(Bounds b, const double pad, const double width_px)
  {
    if (b.empty()) b = {-1.0, -1.0, 1.0, 1.0};
    b.x0 -= pad;
    b.y0 -= pad;
    b.x1 += pad;
    b.y1 += pad;
    b_ = b;
    scale_ = width_px / std::max(b.x1 - b.x0, 1e-9);
    width_ = width_px;
    height_ = std::max(1.0, (b.y1 - b.y0) * scale_);
  }

  double x(const double wx) const { return (wx - b_.x0) * scale_; }
  double y(const double wy) const { return (b_.y1 - wy) * scale_; }
  double len(const double w) const { return w * scale_; }
  double width() const { return width_; }
  double height() const { return height_; }

private:
  Bounds b_;
  double scale_{1.0};
  double width_{0.0};
  double height_{0.0};
};

inline std::string header(const Canvas & c)
{
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width() << "\" height=\"" << c.height()
    << "\" viewBox=\"0 0 " << c.width() << ' ' << c.height() << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  return o.str();
}

}  // namespace svg

struct SceneSvgOptions
{
  double width_px{1200.0};
  double pad{5.0};
  /// Speed at which colors saturate.
  double v_max{15.0};
  /// Frame whose boxes are drawn; -1 draws the last valid frame.
  int box_frame{-1};
};

/// Static rendering: road bands, per-agent trajectories colored by speed,
/// and footprints at one frame.
inline std::string render_scene_svg(const Scene & scene, const SceneSvgOptions & opt = {})
{
  const auto & t = scene.tensor;
  svg::Bounds b;
  for (const auto & lane : scene.map.lanes) {
    for (const auto & p : lane) b.add(p.x, p.y);
  }
  for (int a = 0; a < t.num_agents(); ++a) {
    for (int f = 0; f < t.num_steps(); ++f) {
      if (t.valid(a, f)) b.add(t.at(a, f, kPx), t.at(a, f, kPy));
    }
  }
  const svg::Canvas c(b, opt.pad, opt.width_px);
  std::ostringstream o;
  o.precision(6);
  o << svg::header(c);

  o << "<g id=\"road\" fill=\"none\" stroke-linecap=\"round\" stroke-linejoin=\"round\">\n";
  for (const auto & lane : scene.map.lanes) {
    std::ostringstream pts;
    pts.precision(6);
    for (const auto & p : lane) pts << c.x(p.x) << ',' << c.y(p.y) << ' ';
    o << "<polyline points=\"" << pts.str() << "\" stroke=\"#d9d9d9\" stroke-width=\""
      << c.len(2.0 * scene.map.half_width) << "\"/>\n";
    o << "<polyline points=\"" << pts.str() << "\" stroke=\"#ffffff\" stroke-width=\"1\" stroke-dasharray=\"6,6\"/>\n";
  }
  o << "</g>\n";

  auto base = [&scene](int a) {
    if (a == scene.ego_index) return svg::kEgo;
    if (a == scene.attacker_index) return svg::kAttacker;
    return svg::kOther;
  };

  o << "<g id=\"agents\" stroke-linecap=\"round\">\n";
  for (int a = 0; a < t.num_agents(); ++a) {
    const svg::Rgb role = base(a);
    o << "<g id=\"agent" << t.id(a) << "\">\n";
    for (int f = 0; f + 1 < t.num_steps(); ++f) {
      if (!t.valid(a, f) || !t.valid(a, f + 1)) continue;
      const double v = 0.5 * (t.at(a, f, kSpeed) + t.at(a, f + 1, kSpeed));
      o << "<line x1=\"" << c.x(t.at(a, f, kPx)) << "\" y1=\"" << c.y(t.at(a, f, kPy)) << "\" x2=\""
        << c.x(t.at(a, f + 1, kPx)) << "\" y2=\"" << c.y(t.at(a, f + 1, kPy)) << "\" stroke=\""
        << svg::hex(svg::speed_color(role, std::abs(v), opt.v_max)) << "\" stroke-width=\"2.5\"/>\n";
    }
    int bf = opt.box_frame;
    if (bf < 0) {
      for (int f = t.num_steps() - 1; f >= 0 && bf < 0; --f) {
        if (t.valid(a, f)) bf = f;
      }
    }
    if (bf >= 0 && bf < t.num_steps() && t.valid(a, bf)) {
      const auto box = t.box(a, bf);
      const double deg = -box.heading * 180.0 / std::numbers::pi;
      o << "<rect x=\"" << c.x(box.cx) - 0.5 * c.len(box.length) << "\" y=\"" << c.y(box.cy) - 0.5 * c.len(box.width)
        << "\" width=\"" << c.len(box.length) << "\" height=\"" << c.len(box.width) << "\" transform=\"rotate("
        << deg << ' ' << c.x(box.cx) << ' ' << c.y(box.cy) << ")\" fill=\"" << svg::hex(role)
        << "\" fill-opacity=\"0.6\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
    }
    o << "</g>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

/// Toy scatter: samples, 3-sigma mode circles and the guidance star.
inline std::string render_toy_svg(const ToyWorld & world, const Matrix & samples, const double width_px = 600.0)
{
  if (samples.rows() != 2 && samples.cols() > 0) throw std::invalid_argument("toy scatter needs 2-D samples");
  svg::Bounds b;
  for (const auto & m : world.target.means) {
    b.add(m(0) - 3.0 * world.mode_std, m(1) - 3.0 * world.mode_std);
    b.add(m(0) + 3.0 * world.mode_std, m(1) + 3.0 * world.mode_std);
  }
  b.add(world.guidance_point(0), world.guidance_point(1));
  // Keep far drifting samples from shrinking the modes to dots.
  const double limit = 3.0 * std::max({std::abs(b.x0), std::abs(b.x1), std::abs(b.y0), std::abs(b.y1)});
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    b.add(std::clamp(samples(0, j), -limit, limit), std::clamp(samples(1, j), -limit, limit));
  }
  const svg::Canvas c(b, 0.3, width_px);
  std::ostringstream o;
  o.precision(6);
  o << svg::header(c);
  o << "<g id=\"samples\" fill=\"#1f4fd1\" fill-opacity=\"0.35\">\n";
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double x = samples(0, j);
    const double y = samples(1, j);
    if (std::abs(x) > limit || std::abs(y) > limit) continue;
    o << "<circle cx=\"" << c.x(x) << "\" cy=\"" << c.y(y) << "\" r=\"1.5\"/>\n";
  }
  o << "</g>\n<g id=\"modes\" fill=\"none\" stroke=\"#333333\">\n";
  for (const auto & m : world.target.means) {
    o << "<circle cx=\"" << c.x(m(0)) << "\" cy=\"" << c.y(m(1)) << "\" r=\"" << c.len(3.0 * world.mode_std)
      << "\" stroke-dasharray=\"4,3\"/>\n";
    o << "<circle cx=\"" << c.x(m(0)) << "\" cy=\"" << c.y(m(1)) << "\" r=\"2\" fill=\"#333333\"/>\n";
  }
  o << "</g>\n";
  std::ostringstream star;
  star.precision(6);
  const double gx = c.x(world.guidance_point(0));
  const double gy = c.y(world.guidance_point(1));
  for (int k = 0; k < 10; ++k) {
    const double r = k % 2 == 0 ? 10.0 : 4.0;
    const double ang = -std::numbers::pi / 2.0 + k * std::numbers::pi / 5.0;
    star << gx + r * std::cos(ang) << ',' << gy + r * std::sin(ang) << ' ';
  }
  o << "<polygon id=\"guidance\" points=\"" << star.str() << "\" fill=\"#e6b800\" stroke=\"#000000\"/>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace omega

#endif  // OMEGA__SVG_HPP_

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

#include "omega/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace
{

using omega::Scene;
using omega::SceneTensor;

SceneTensor blank(const int agents, const int frames, const double dt = 0.5, const double len = 4.5, const double wid = 2.0)
{
  SceneTensor t(agents, frames, dt);
  for (int a = 0; a < agents; ++a) {
    for (int f = 0; f < frames; ++f) {
      t.set_valid(a, f, true);
      t.at(a, f, omega::kLength) = len;
      t.at(a, f, omega::kWidth) = wid;
    }
  }
  return t;
}

void place(SceneTensor & t, const int a, const int f, const double x, const double y, const double psi, const double v)
{
  t.at(a, f, omega::kPx) = x;
  t.at(a, f, omega::kPy) = y;
  t.at(a, f, omega::kPsi) = psi;
  t.at(a, f, omega::kSpeed) = v;
}

omega::CorridorMap straight_map(const double half_width = 1.75)
{
  omega::CorridorMap m;
  m.lanes = {{{-50.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {200.0, 0.0, 0.0}}};
  m.successors = {{}};
  m.half_width = half_width;
  return m;
}

TEST(Jsd, WorkedExamples)
{
  EXPECT_NEAR(omega::jsd({0.5, 0.5}, {1.0, 0.0}), 0.3112781, 1e-7);
  EXPECT_NEAR(omega::jsd({1.0, 0.0}, {0.0, 1.0}), 1.0, 1e-15);
  EXPECT_EQ(omega::jsd({3.0, 1.0, 2.0}, {3.0, 1.0, 2.0}), 0.0);
  // Counts are normalized.
  EXPECT_NEAR(omega::jsd({5.0, 5.0}, {7.0, 0.0}), 0.3112781, 1e-7);
}

TEST(Jsd, SymmetricAndBounded)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> p(16);
    std::vector<double> q(16);
    for (size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng) < 0.3 ? 0.0 : u(rng);
      q[i] = u(rng) < 0.3 ? 0.0 : u(rng);
    }
    p[0] += 0.1;
    q[1] += 0.1;
    const double a = omega::jsd(p, q);
    EXPECT_NEAR(a, omega::jsd(q, p), 1e-12);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_NEAR(omega::jsd(p, p), 0.0, 1e-12);
  }
}

TEST(Jsd, RejectsBadInput)
{
  EXPECT_THROW(omega::jsd({1.0, 2.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(omega::jsd({0.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(omega::jsd({-1.0, 2.0}, {1.0, 0.0}), std::invalid_argument);
  const auto h1 = omega::make_histogram({1.0}, {omega::Statistic::kSpeed, 4, 0.0, 4.0});
  const auto h2 = omega::make_histogram({1.0}, {omega::Statistic::kSpeed, 4, 0.0, 5.0});
  EXPECT_THROW(omega::jsd(h1, h2), std::invalid_argument);
  EXPECT_THROW(omega::make_histogram({}, {omega::Statistic::kSpeed, 1, 0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(omega::make_histogram({}, {omega::Statistic::kSpeed, 4, 1.0, 1.0}), std::invalid_argument);
}

TEST(Histogram, BinsAndCsv)
{
  const auto h = omega::make_histogram({-1.0, 0.0, 0.99, 1.0, 3.5, 9.0}, {omega::Statistic::kSpeed, 4, 0.0, 4.0});
  EXPECT_EQ(h.counts, (std::vector<double>{3.0, 1.0, 0.0, 2.0}));
  std::ostringstream out;
  h.write_csv(out);
  EXPECT_EQ(out.str().substr(0, 32), "bin_lo,bin_hi,count\n0,1,3\n1,2,1\n");
  EXPECT_EQ(omega::HistogramSpec::defaults(omega::Statistic::kSpeed).bin_count, 64);
  EXPECT_EQ(omega::parse_statistic("lateral_dev"), omega::Statistic::kLateralDev);
  EXPECT_THROW(omega::parse_statistic("accel"), std::invalid_argument);
}

TEST(Statistics, MovingOnlyAndNearest)
{
  Scene s{blank(2, 3), straight_map(), 0, -1};
  for (int f = 0; f < 3; ++f) {
    place(s.tensor, 0, f, 0.0, 0.0, 0.0, 0.0);
    place(s.tensor, 1, f, 3.0 * f, 1.0, 0.0, 6.0);
  }
  EXPECT_EQ(omega::collect_statistic(s, omega::Statistic::kSpeed).size(), 6u);
  const auto moving = omega::collect_statistic(s, omega::Statistic::kSpeed, true);
  EXPECT_EQ(moving, (std::vector<double>{6.0, 6.0, 6.0}));
  const auto near = omega::collect_statistic(s, omega::Statistic::kNearestDist);
  EXPECT_DOUBLE_EQ(near[0], 1.0);
  const auto lat = omega::collect_statistic(s, omega::Statistic::kLateralDev, true);
  EXPECT_EQ(lat, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Collision, SimpleCases)
{
  auto t = blank(2, 3);
  for (int f = 0; f < 3; ++f) {
    place(t, 0, f, 0.0, 0.0, 0.0, 0.0);
    place(t, 1, f, 100.0, 0.0, 0.0, 0.0);
  }
  EXPECT_FALSE(omega::collision_report(t).any);
  place(t, 1, 2, 0.0, 0.0, 0.0, 0.0);
  const auto r = omega::collision_report(t);
  EXPECT_TRUE(r.any);
  EXPECT_EQ(r.agent, (std::vector<uint8_t>{1, 1}));
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0][0], 2);
  t.set_valid(1, 2, false);
  EXPECT_FALSE(omega::collision_report(t).any);
}

TEST(Collision, CornerTouchAt45Degrees)
{
  // Unit square at the origin and a unit square rotated by 45 degrees whose
  // left vertex sits on the first square's right edge.
  const omega::OrientedBox a{0.0, 0.0, 0.0, 1.0, 1.0};
  const double h = std::sqrt(0.5);
  for (const double gap : {-1e-3, 0.0, 1e-3}) {
    const omega::OrientedBox b{0.5 + h + gap, 0.0, std::numbers::pi / 4, 1.0, 1.0};
    EXPECT_EQ(omega::boxes_overlap(a, b), omega::testing::dense_overlap_oracle(a, b)) << gap;
  }
}

TEST(Collision, AgreesWithDenseOracle)
{
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> len(1.0, 5.0);
  std::uniform_real_distribution<double> wid(0.5, 2.5);
  int hits = 0;
  for (int k = 0; k < 300; ++k) {
    const omega::OrientedBox a{pos(rng), pos(rng), ang(rng), len(rng), wid(rng)};
    const omega::OrientedBox b{pos(rng), pos(rng), ang(rng), len(rng), wid(rng)};
    const bool v = omega::boxes_overlap(a, b);
    hits += v;
    EXPECT_EQ(v, omega::testing::dense_overlap_oracle(a, b)) << k;
  }
  EXPECT_GT(hits, 30);
  EXPECT_LT(hits, 270);
}

TEST(Offroad, BoundaryAndFootprint)
{
  Scene s{blank(1, 3), straight_map(), 0, -1};
  for (int f = 0; f < 3; ++f) place(s.tensor, 0, f, 5.0 * f, 0.0, 0.0, 10.0);
  EXPECT_FALSE(omega::offroad_report(s, 1.75).any);
  place(s.tensor, 0, 1, 5.0, 1.75, 0.0, 10.0);
  EXPECT_FALSE(omega::offroad_report(s, 1.75).any);
  EXPECT_TRUE(omega::offroad_report(s, 1.75, true).any);
  place(s.tensor, 0, 1, 5.0, 1.76, 0.0, 10.0);
  EXPECT_TRUE(omega::offroad_report(s, 1.75).any);
}

TEST(Offroad, CurvedCorridorMatchesDenseOracle)
{
  omega::CorridorMap m;
  omega::Polyline arc;
  for (int k = 0; k <= 24; ++k) {
    const double th = k * std::numbers::pi / 48;
    arc.push_back({40.0 * std::sin(th), 40.0 * (1.0 - std::cos(th)), th});
  }
  m.lanes = {arc};
  m.successors = {{}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double th = u(rng) * std::numbers::pi / 2;
    const double r = 40.0 + (u(rng) - 0.5) * 6.0;
    const omega::Point2 p{r * std::sin(th), 40.0 - r * std::cos(th)};
    const double exact = m.centerline_distance(p);
    const double dense = omega::testing::dense_centerline_distance(m, p);
    EXPECT_NEAR(exact, dense, 1e-3);
    if (std::abs(dense - m.half_width) < 2e-3) continue;
    Scene s{blank(1, 1), m, 0, -1};
    place(s.tensor, 0, 0, p.x, p.y, th, 5.0);
    EXPECT_EQ(omega::offroad_report(s, m.half_width).any, dense > m.half_width);
  }
}

TEST(Kinematics, StationaryAndJump)
{
  auto t = blank(1, 4);
  EXPECT_TRUE(omega::kinematic_report(t).all);
  for (int f = 1; f < 4; ++f) t.at(0, f, omega::kSpeed) = 20.0;
  const auto r = omega::kinematic_report(t);
  EXPECT_FALSE(r.all);
  EXPECT_EQ(r.reason[0], "accel");
  EXPECT_THROW(omega::kinematic_report(blank(1, 2)), std::invalid_argument);
}

TEST(Kinematics, CircleAtCurvatureLimit)
{
  const double dt = 0.1;
  for (const double kappa : {0.5, 0.51}) {
    const double v = 2.4;
    auto t = blank(1, 30, dt);
    for (int f = 0; f < 30; ++f) {
      const double psi = omega::wrap_angle(v * kappa * dt * f);
      place(t, 0, f, std::sin(psi) / kappa, (1.0 - std::cos(psi)) / kappa, psi, v);
    }
    const auto r = omega::kinematic_report(t);
    EXPECT_EQ(r.all, kappa <= 0.5) << kappa << ' ' << r.reason[0];
  }
}

TEST(Kinematics, EachLimitTriggers)
{
  omega::KinematicLimits lim;
  auto base = [] {
    auto t = blank(1, 4, 1.0);
    for (int f = 0; f < 4; ++f) place(t, 0, f, 10.0 * f, 0.0, 0.0, 10.0);
    return t;
  };
  auto t = base();
  EXPECT_TRUE(omega::kinematic_report(t, lim).all);
  t.at(0, 0, omega::kSpeed) = 31.0;
  EXPECT_EQ(omega::kinematic_report(t, lim).reason[0], "speed");
  t = base();
  t.at(0, 2, omega::kPsi) = 1.0;
  t.at(0, 3, omega::kPsi) = 1.0;
  EXPECT_EQ(omega::kinematic_report(t, lim).reason[0], "lateral_accel");
  t = base();
  t.at(0, 3, omega::kPsi) = 1.6;
  EXPECT_EQ(omega::kinematic_report(t, lim).reason[0], "yaw_rate");
  // |a| = 6 exactly, jerk = 24.
  auto j = blank(1, 4, 0.5);
  for (int f = 0; f < 4; ++f) j.at(0, f, omega::kSpeed) = 10.0 + 3.0 * (f % 2);
  EXPECT_EQ(omega::kinematic_report(j, lim).reason[0], "jerk");
}

TEST(Ttc, WorkedExamples)
{
  auto t = blank(2, 2, 0.5, 0.0, 0.0);
  place(t, 0, 0, 0.0, 0.0, 0.0, 10.0);
  place(t, 1, 0, 30.0, 0.0, 0.0, 0.0);
  place(t, 0, 1, 5.0, 0.0, 0.0, 10.0);
  place(t, 1, 1, 30.0, 0.0, 0.0, 0.0);
  const auto p = omega::ttc_profile(t, 0);
  EXPECT_NEAR(p.ttc[0], 3.0, 1e-12);
  EXPECT_NEAR(p.ttc[1], 2.5, 1e-12);
  EXPECT_DOUBLE_EQ(p.lt3, 0.5);
  EXPECT_DOUBLE_EQ(p.lt2, 0.0);

  auto lone = blank(1, 3);
  EXPECT_EQ(omega::ttc_profile(lone, 0).ttc, (std::vector<double>{10.0, 10.0, 10.0}));
  auto div = blank(2, 1);
  place(div, 0, 0, 0.0, 0.0, std::numbers::pi, 5.0);
  place(div, 1, 0, 20.0, 0.0, 0.0, 5.0);
  EXPECT_DOUBLE_EQ(omega::ttc_profile(div, 0).ttc[0], 10.0);
  EXPECT_THROW(omega::ttc_profile(div, 2), std::invalid_argument);
}

TEST(Ttc, OverlapIsZeroAndMonotoneInClosingSpeed)
{
  auto t = blank(2, 1);
  place(t, 0, 0, 0.0, 0.0, 0.0, 0.0);
  place(t, 1, 0, 1.0, 0.0, 0.0, 0.0);
  EXPECT_EQ(omega::ttc_profile(t, 0).ttc[0], 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (const double v : {2.0, 4.0, 8.0, 16.0}) {
    place(t, 0, 0, 0.0, 0.0, 0.0, v);
    place(t, 1, 0, 40.0, 0.5, 0.1, 0.0);
    const double ttc = omega::ttc_profile(t, 0, 100.0).ttc[0];
    EXPECT_LE(ttc, prev);
    prev = ttc;
  }
}

TEST(EgoMotion, WorkedExamples)
{
  auto t = blank(1, 4);
  for (int f = 0; f < 4; ++f) t.at(0, f, omega::kSpeed) = f;
  auto m = omega::ego_motion_intensity(t, 0);
  EXPECT_DOUBLE_EQ(m.accel_mean, 2.0);
  EXPECT_DOUBLE_EQ(m.jerk_mean, 0.0);
  for (int f = 0; f < 4; ++f) t.at(0, f, omega::kSpeed) = f % 2;
  m = omega::ego_motion_intensity(t, 0);
  EXPECT_DOUBLE_EQ(m.accel_mean, 2.0);
  EXPECT_DOUBLE_EQ(m.jerk_mean, 8.0);
  EXPECT_THROW(omega::ego_motion_intensity(blank(1, 2), 0), std::invalid_argument);
}

TEST(NonResponsible, RearEndCases)
{
  auto t = blank(2, 4);
  for (int f = 0; f < 4; ++f) {
    place(t, 0, f, 0.0, 0.0, 0.0, 0.0);
    place(t, 1, f, -12.0 + 4.0 * f, 0.0, 0.0, 8.0);
  }
  EXPECT_TRUE(omega::nonresponsible_collision(t, 0));
  // Ego drives into a stationary lead.
  for (int f = 0; f < 4; ++f) {
    place(t, 0, f, 4.0 * f, 0.0, 0.0, 8.0);
    place(t, 1, f, 14.0, 0.0, 0.0, 0.0);
  }
  EXPECT_TRUE(omega::collision_report(t).any);
  EXPECT_FALSE(omega::nonresponsible_collision(t, 0));
  for (int f = 0; f < 4; ++f) place(t, 1, f, 100.0, 0.0, 0.0, 0.0);
  EXPECT_FALSE(omega::nonresponsible_collision(t, 0));
}

TEST(SceneReport, ValidIsConjunction)
{
  Scene s{blank(2, 4), straight_map(), 0, -1};
  for (int f = 0; f < 4; ++f) {
    place(s.tensor, 0, f, 5.0 * f, 0.0, 0.0, 10.0);
    place(s.tensor, 1, f, 30.0 + 5.0 * f, 0.0, 0.0, 10.0);
  }
  auto r = omega::evaluate_scene(s, {}, "a");
  EXPECT_TRUE(r.valid);
  EXPECT_DOUBLE_EQ(r.collision_rate, 0.0);
  s.tensor.at(1, 3, omega::kPy) = 3.0;
  r = omega::evaluate_scene(s, {}, "b");
  EXPECT_TRUE(r.any_offroad);
  EXPECT_FALSE(r.valid);
  s.tensor.at(1, 3, omega::kPy) = 0.0;
  s.tensor.at(1, 3, omega::kPx) = 15.0;
  r = omega::evaluate_scene(s, {}, "c");
  EXPECT_TRUE(r.any_collision);
  EXPECT_DOUBLE_EQ(r.collision_rate, 1.0);
  EXPECT_FALSE(r.valid);

  std::ostringstream csv;
  omega::write_report_csv(csv, {omega::evaluate_scene(s, {}, "x"), omega::evaluate_scene(s, {}, "y")});
  const auto text = csv.str();
  EXPECT_EQ(text.rfind("scene_id,collided,offroad,kin_feasible,valid,ttc_mean", 0), 0u);
  EXPECT_NE(text.find("\nALL,1,0,"), std::string::npos);
}

TEST(SignTest, ExactBinomialTail)
{
  EXPECT_DOUBLE_EQ(omega::sign_test_p_value(6, 0), 1.0 / 64.0);
  EXPECT_NEAR(omega::sign_test_p_value(5, 1), 7.0 / 64.0, 1e-15);
  EXPECT_DOUBLE_EQ(omega::sign_test_p_value(0, 0), 1.0);
}

}  // namespace

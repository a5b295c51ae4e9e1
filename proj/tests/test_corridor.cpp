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

#include "omega/corridor.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using omega::MapKind;
using omega::Matrix;
using omega::Vector;

TEST(CorridorMap, KindsValidateAndAreDrivable)
{
  for (const auto kind : {MapKind::kStraight, MapKind::kCurve, MapKind::kMerge}) {
    omega::MapSpec spec;
    spec.kind = kind;
    const auto map = omega::make_map(spec);
    EXPECT_NO_THROW(map.validate());
    for (const auto & lane : map.lanes) {
      for (const auto & p : lane) EXPECT_TRUE(map.drivable({p.x, p.y}));
    }
    EXPECT_FALSE(map.drivable({0.0, 60.0}));
    EXPECT_EQ(omega::parse_map_kind(omega::to_string(kind)), kind);
  }
  EXPECT_THROW(omega::parse_map_kind("roundabout"), std::invalid_argument);
}

TEST(LanePath, ArcLengthAndOffset)
{
  omega::MapSpec spec;
  spec.kind = MapKind::kCurve;
  const auto map = omega::make_map(spec);
  const auto path = omega::lane_sequence_path(map, {0});
  const auto p = path.at(30.0, 1.0);
  EXPECT_NEAR(p.x, 30.0, 1e-9);
  EXPECT_NEAR(p.y, map.lanes[0].front().y + 1.0, 1e-9);
  EXPECT_NEAR(path.project({p.x, p.y}), 30.0, 1e-6);
}

TEST(CorridorScene, DeterministicValidAndCollisionFreeAtStart)
{
  for (const auto kind : {MapKind::kStraight, MapKind::kCurve, MapKind::kMerge}) {
    omega::CorridorSceneSpec spec;
    spec.map.kind = kind;
    omega::Rng a(9);
    omega::Rng b(9);
    const auto s1 = omega::make_corridor_scene(spec, a);
    const auto s2 = omega::make_corridor_scene(spec, b);
    EXPECT_TRUE(s1.tensor == s2.tensor);
    const auto & t = s1.tensor;
    EXPECT_EQ(t.num_agents(), 8);
    EXPECT_EQ(t.num_steps(), 20);
    EXPECT_EQ(s1.attacker_index, -1);
    for (int i = 0; i < t.num_agents(); ++i) {
      EXPECT_EQ(omega::history_length(t, i), 4);
      for (int j = i + 1; j < t.num_agents(); ++j) EXPECT_FALSE(omega::boxes_overlap(t.box(i, 0), t.box(j, 0)));
      for (int f = 0; f < t.num_steps(); ++f) EXPECT_TRUE(s1.map.drivable({t.at(i, f, omega::kPx), t.at(i, f, omega::kPy)}));
    }
  }
}

TEST(CorridorScene, AdversarialLayout)
{
  omega::CorridorSceneSpec spec;
  spec.map.kind = MapKind::kMerge;
  spec.adversarial_layout = true;
  omega::Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto scene = omega::make_corridor_scene(spec, rng);
    EXPECT_EQ(scene.attacker_index, 1);
    const auto & t = scene.tensor;
    const double lateral = std::abs(t.at(1, 3, omega::kPy) - t.at(0, 3, omega::kPy));
    EXPECT_GT(lateral, 2.0);
    EXPECT_LT(lateral, 5.0);
  }
  spec.map.kind = MapKind::kStraight;
  EXPECT_THROW(omega::make_corridor_scene(spec, rng), std::invalid_argument);
}

TEST(CorridorScene, PlacementFailureIsReported)
{
  omega::CorridorSceneSpec spec;
  spec.num_agents = 200;
  spec.traffic.placement_retries = 20;
  omega::Rng rng(1);
  EXPECT_THROW(omega::make_corridor_scene(spec, rng), std::runtime_error);
}

TEST(CorridorScene, GoalCondition)
{
  omega::CorridorSceneSpec spec;
  omega::Rng rng(4);
  const auto scene = omega::make_corridor_scene(spec, rng);
  const auto goal = omega::set_goal_condition(scene, 2, {50.0, 1.0, 0.1, 8.0});
  const int last = goal.tensor.num_steps() - 1;
  EXPECT_EQ(goal.tensor.at(2, last, omega::kPx), 50.0);
  for (int c = 0; c < omega::kMotionDim; ++c) EXPECT_TRUE(goal.tensor.inpaint(2, last, c));
  EXPECT_THROW(omega::set_goal_condition(scene, 9, {0, 0, 0, 0}), std::invalid_argument);
}

TEST(TrajectoryCodec, RoundTripAndPullback)
{
  omega::CorridorSceneSpec spec;
  spec.map.kind = MapKind::kCurve;
  omega::Rng rng(6);
  const Matrix data = omega::corridor_training_trajectories(spec, 6, rng);
  ASSERT_EQ(data.rows(), 80);
  ASSERT_EQ(data.cols(), 48);
  const auto codec = omega::TrajectoryCodec::fit(data, 20, 3);
  EXPECT_GE(codec.scale().minCoeff(), 0.05);

  const auto scene = omega::make_corridor_scene(spec, rng);
  const Matrix states = omega::agent_states(scene.tensor, 3);
  const omega::Pose2 origin = scene.tensor.pose(3, 3);
  const Vector z = codec.encode(states, origin);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(z(12 + c), -codec.mean()(12 + c) / codec.scale()(12 + c), 1e-9);
  const Matrix back = codec.decode(z, origin);
  for (int f = 0; f < 20; ++f) {
    EXPECT_NEAR(back(f, 0), states(f, 0), 1e-9);
    EXPECT_NEAR(back(f, 1), states(f, 1), 1e-9);
    EXPECT_NEAR(omega::wrap_angle(back(f, 2) - states(f, 2)), 0.0, 1e-9);
    EXPECT_NEAR(back(f, 3), states(f, 3), 1e-9);
  }

  // Pullback of a random linear functional of the decoded states.
  const Vector w = omega::standard_normal(rng, 80);
  auto f = [&](const Vector & zz) {
    const Matrix s = codec.decode(zz, origin);
    double acc = 0.0;
    for (int fr = 0; fr < 20; ++fr) {
      for (int c = 0; c < 4; ++c) acc += w(fr * 4 + c) * s(fr, c);
    }
    return acc;
  };
  EXPECT_LT(omega::testing::max_fd_relative_error(f, z, codec.pullback(w, origin)), 1e-6);

  const auto copy = omega::TrajectoryCodec::from_json(codec.to_json());
  EXPECT_EQ(copy.mean(), codec.mean());
  EXPECT_EQ(copy.scale(), codec.scale());
  EXPECT_THROW(codec.encode(states.topRows(5), origin), std::invalid_argument);
}

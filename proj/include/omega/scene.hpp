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

#ifndef OMEGA__SCENE_HPP_
#define OMEGA__SCENE_HPP_

#include "omega/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace omega
{

/// Channel layout of a scene state vector.
enum Channel : int { kPx = 0, kPy = 1, kPsi = 2, kSpeed = 3, kLength = 4, kWidth = 5 };
inline constexpr int kStateDim = 6;
/// Channels that are diffused; the size channels are carried from context.
inline constexpr int kMotionDim = 4;

/// Dense A x T x D scene with validity and inpainting masks.
class SceneTensor
{
public:
  SceneTensor() = default;

  SceneTensor(const int agents, const int steps, const double dt_seconds)
  : agents_(agents), steps_(steps), dt_(dt_seconds)
  {
    if (agents < 0 || steps < 1) throw std::invalid_argument("scene needs agents >= 0 and steps >= 1");
    if (!(dt_seconds > 0.0)) throw std::invalid_argument("scene dt must be positive");
    const auto n = static_cast<size_t>(agents) * steps;
    values_.assign(n * kStateDim, 0.0);
    valid_.assign(n, 0);
    inpaint_.assign(n * kStateDim, 0);
    ids_.resize(static_cast<size_t>(agents));
    for (int a = 0; a < agents; ++a) ids_[static_cast<size_t>(a)] = a;
  }

  int num_agents() const { return agents_; }
  int num_steps() const { return steps_; }
  double dt() const { return dt_; }

  double & at(const int a, const int f, const int c) { return values_[index(a, f, c)]; }
  double at(const int a, const int f, const int c) const { return values_[index(a, f, c)]; }

  bool valid(const int a, const int f) const { return valid_[index(a, f)] != 0; }
  void set_valid(const int a, const int f, const bool v) { valid_[index(a, f)] = v ? 1 : 0; }

  bool inpaint(const int a, const int f, const int c) const { return inpaint_[index(a, f, c)] != 0; }
  void set_inpaint(const int a, const int f, const int c, const bool v)
  {
    inpaint_[index(a, f, c)] = v ? 1 : 0;
  }
  void set_inpaint_frame(const int a, const int f, const bool v)
  {
    for (int c = 0; c < kStateDim; ++c) set_inpaint(a, f, c, v);
  }

  /// Entry belongs to the generation region m * (1 - m~).
  bool generated(const int a, const int f, const int c) const
  {
    return valid(a, f) && !inpaint(a, f, c);
  }

  int id(const int a) const { return ids_.at(static_cast<size_t>(a)); }
  void set_id(const int a, const int id) { ids_.at(static_cast<size_t>(a)) = id; }

  Pose2 pose(const int a, const int f) const { return {at(a, f, kPx), at(a, f, kPy), at(a, f, kPsi)}; }

  OrientedBox box(const int a, const int f) const
  {
    return {at(a, f, kPx), at(a, f, kPy), at(a, f, kPsi), at(a, f, kLength), at(a, f, kWidth)};
  }

  /// Checks the documented invariants and throws with the first offending entry.
  void validate() const
  {
    for (int a = 0; a < agents_; ++a) {
      for (int f = 0; f < steps_; ++f) {
        for (int c = 0; c < kStateDim; ++c) {
          const double v = at(a, f, c);
          if (inpaint(a, f, c) && !std::isfinite(v)) {
            throw std::invalid_argument(where(a, f, c) + ": context value is not finite");
          }
        }
        if (!valid(a, f)) continue;
        const double psi = at(a, f, kPsi);
        if (!(psi > -std::numbers::pi - 1e-12 && psi <= std::numbers::pi + 1e-12)) {
          throw std::invalid_argument(where(a, f, kPsi) + ": heading outside (-pi, pi]");
        }
        if (!(at(a, f, kLength) > 0.0) || !(at(a, f, kWidth) > 0.0)) {
          throw std::invalid_argument(where(a, f, kLength) + ": size must be positive");
        }
      }
    }
  }

  bool operator==(const SceneTensor & o) const = default;

private:
  size_t index(const int a, const int f) const
  {
    if (a < 0 || a >= agents_ || f < 0 || f >= steps_) {
      throw std::out_of_range("scene index (" + std::to_string(a) + ", " + std::to_string(f) + ")");
    }
    return static_cast<size_t>(a) * steps_ + f;
  }
  size_t index(const int a, const int f, const int c) const
  {
    if (c < 0 || c >= kStateDim) throw std::out_of_range("scene channel " + std::to_string(c));
    return index(a, f) * kStateDim + c;
  }
  static std::string where(const int a, const int f, const int c)
  {
    return "agent " + std::to_string(a) + " frame " + std::to_string(f) + " channel " +
           std::to_string(c);
  }

  int agents_{0};
  int steps_{0};
  double dt_{0.5};
  std::vector<double> values_;
  std::vector<uint8_t> valid_;
  std::vector<uint8_t> inpaint_;
  std::vector<int> ids_;
};

using Polyline = std::vector<Pose2>;

/// Lane centerlines with a successor graph and a common half width.
struct CorridorMap
{
  std::vector<Polyline> lanes;
  std::vector<std::vector<int>> successors;
  double half_width{1.75};

  void validate() const
  {
    if (!(half_width > 0.0)) throw std::invalid_argument("map half_width must be positive");
    if (successors.size() != lanes.size()) {
      throw std::invalid_argument("map successor table size differs from lane count");
    }
    for (size_t i = 0; i < lanes.size(); ++i) {
      if (lanes[i].size() < 2) {
        throw std::invalid_argument("lane " + std::to_string(i) + " has fewer than 2 points");
      }
      for (const int s : successors[i]) {
        if (s < 0 || static_cast<size_t>(s) >= lanes.size()) {
          throw std::invalid_argument(
            "lane " + std::to_string(i) + " has unknown successor " + std::to_string(s));
        }
      }
    }
  }

  /// Distance from `p` to the nearest centerline segment of any lane.
  double centerline_distance(const Point2 & p) const
  {
    double best = std::numeric_limits<double>::infinity();
    for (const auto & lane : lanes) {
      for (size_t k = 0; k + 1 < lane.size(); ++k) {
        const auto proj =
          project_to_segment(p, {lane[k].x, lane[k].y}, {lane[k + 1].x, lane[k + 1].y});
        best = std::min(best, proj.distance);
      }
    }
    return best;
  }

  bool drivable(const Point2 & p) const { return centerline_distance(p) <= half_width; }

  bool operator==(const CorridorMap & o) const
  {
    if (half_width != o.half_width || successors != o.successors || lanes.size() != o.lanes.size()) {
      return false;
    }
    for (size_t i = 0; i < lanes.size(); ++i) {
      if (lanes[i].size() != o.lanes[i].size()) return false;
      for (size_t k = 0; k < lanes[i].size(); ++k) {
        const auto & p = lanes[i][k];
        const auto & q = o.lanes[i][k];
        if (p.x != q.x || p.y != q.y || p.heading != q.heading) return false;
      }
    }
    return true;
  }
};

/// A scene tensor together with its map and agent roles.
struct Scene
{
  SceneTensor tensor;
  CorridorMap map;
  int ego_index{0};
  int attacker_index{-1};

  bool operator==(const Scene & o) const = default;
};

// ---------------------------------------------------------------------------
// JSON.

inline nlohmann::json map_to_json(const CorridorMap & map)
{
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto & lane : map.lanes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto & p : lane) pts.push_back({p.x, p.y, p.heading});
    lanes.push_back(std::move(pts));
  }
  nlohmann::json succ = nlohmann::json::object();
  for (size_t i = 0; i < map.successors.size(); ++i) succ[std::to_string(i)] = map.successors[i];
  return {{"lanes", lanes}, {"successors", succ}, {"half_width", map.half_width}};
}

inline CorridorMap map_from_json(const nlohmann::json & j)
{
  CorridorMap map;
  map.half_width = j.at("half_width").get<double>();
  for (const auto & lane : j.at("lanes")) {
    Polyline pl;
    for (const auto & p : lane) {
      if (p.size() != 3) throw std::invalid_argument("lane point must be [x, y, heading]");
      pl.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    map.lanes.push_back(std::move(pl));
  }
  map.successors.assign(map.lanes.size(), {});
  for (const auto & [key, value] : j.at("successors").items()) {
    const int lane = std::stoi(key);
    if (lane < 0 || static_cast<size_t>(lane) >= map.lanes.size()) {
      throw std::invalid_argument("successor key " + key + " is not a lane id");
    }
    map.successors[static_cast<size_t>(lane)] = value.get<std::vector<int>>();
  }
  map.validate();
  return map;
}

inline nlohmann::json scene_to_json(const Scene & scene)
{
  const auto & s = scene.tensor;
  nlohmann::json agents = nlohmann::json::array();
  for (int a = 0; a < s.num_agents(); ++a) {
    nlohmann::json states = nlohmann::json::array();
    nlohmann::json valid = nlohmann::json::array();
    nlohmann::json inpaint = nlohmann::json::array();
    for (int f = 0; f < s.num_steps(); ++f) {
      nlohmann::json row = nlohmann::json::array();
      nlohmann::json mask = nlohmann::json::array();
      for (int c = 0; c < kStateDim; ++c) {
        const double v = s.at(a, f, c);
        if (!std::isfinite(v)) {
          throw std::invalid_argument("cannot serialize non-finite scene value");
        }
        row.push_back(v);
        mask.push_back(s.inpaint(a, f, c));
      }
      states.push_back(std::move(row));
      valid.push_back(s.valid(a, f));
      inpaint.push_back(std::move(mask));
    }
    agents.push_back({{"id", s.id(a)}, {"states", states}, {"valid", valid}, {"inpaint", inpaint}});
  }
  nlohmann::json j = {{"dt_seconds", s.dt()}, {"agents", agents}, {"map", map_to_json(scene.map)}};
  j["ego_index"] = scene.ego_index;
  if (scene.attacker_index >= 0) j["attacker_index"] = scene.attacker_index;
  return j;
}

inline Scene scene_from_json(const nlohmann::json & j)
{
  const auto & agents = j.at("agents");
  if (!agents.is_array()) throw std::invalid_argument("'agents' must be an array");
  const int steps = agents.empty() ? 1 : static_cast<int>(agents.front().at("states").size());
  Scene scene;
  scene.tensor = SceneTensor(static_cast<int>(agents.size()), steps, j.at("dt_seconds").get<double>());
  auto & s = scene.tensor;
  for (int a = 0; a < s.num_agents(); ++a) {
    const auto & agent = agents[static_cast<size_t>(a)];
    const auto & states = agent.at("states");
    const auto & valid = agent.at("valid");
    const auto & inpaint = agent.at("inpaint");
    if (static_cast<int>(states.size()) != steps || static_cast<int>(valid.size()) != steps ||
        static_cast<int>(inpaint.size()) != steps) {
      throw std::invalid_argument("agent " + std::to_string(a) + ": frame count mismatch");
    }
    s.set_id(a, agent.at("id").get<int>());
    for (int f = 0; f < steps; ++f) {
      const auto & row = states[static_cast<size_t>(f)];
      const auto & mask = inpaint[static_cast<size_t>(f)];
      if (row.size() != kStateDim || mask.size() != kStateDim) {
        throw std::invalid_argument(
          "agent " + std::to_string(a) + " frame " + std::to_string(f) + ": expected 6 channels");
      }
      s.set_valid(a, f, valid[static_cast<size_t>(f)].get<bool>());
      for (int c = 0; c < kStateDim; ++c) {
        s.at(a, f, c) = row[static_cast<size_t>(c)].get<double>();
        s.set_inpaint(a, f, c, mask[static_cast<size_t>(c)].get<bool>());
      }
    }
  }
  scene.map = map_from_json(j.at("map"));
  scene.ego_index = j.value("ego_index", 0);
  scene.attacker_index = j.value("attacker_index", -1);
  if (s.num_agents() > 0 && (scene.ego_index < 0 || scene.ego_index >= s.num_agents())) {
    throw std::invalid_argument("ego_index out of range");
  }
  if (scene.attacker_index >= s.num_agents() || scene.attacker_index == scene.ego_index) {
    throw std::invalid_argument("attacker_index out of range or equal to ego_index");
  }
  s.validate();
  return scene;
}

/// Writes through a temporary file and renames it into place.
inline void write_text_atomic(const std::filesystem::path & path, const std::string & text)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_scene(const Scene & scene, const std::filesystem::path & path)
{
  write_text_atomic(path, scene_to_json(scene).dump(1) + "\n");
}

inline Scene load_scene(const std::filesystem::path & path)
{
  try {
    return scene_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const std::exception & e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace omega

#endif  // OMEGA__SCENE_HPP_

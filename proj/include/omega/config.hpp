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

#ifndef OMEGA__CONFIG_HPP_
#define OMEGA__CONFIG_HPP_

#include "omega/metrics.hpp"
#include "omega/scene_sampler.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace omega
{

/// Flat key-value settings with sections (INI). Keys are "section.key".
/// Every key must be consumed by some reader; leftovers are reported.
class Config
{
public:
  Config() = default;

  static Config from_file(const std::filesystem::path & path)
  {
    Config c;
    try {
      boost::property_tree::read_ini(path.string(), c.tree_);
    } catch (const boost::property_tree::ini_parser_error & e) {
      throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
    return c;
  }

  static Config from_string(const std::string & text)
  {
    Config c;
    std::istringstream in(text);
    try {
      boost::property_tree::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error & e) {
      throw std::runtime_error(std::string("config: ") + e.what());
    }
    return c;
  }

  /// "section.key=value".
  void apply_override(const std::string & assignment)
  {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("override '" + assignment + "' is not of the form section.key=value");
    }
    const std::string key = boost::trim_copy(assignment.substr(0, eq));
    if (key.find('.') == std::string::npos) {
      throw std::invalid_argument("override key '" + key + "' needs a section, e.g. sampler." + key);
    }
    tree_.put(key, boost::trim_copy(assignment.substr(eq + 1)));
  }

  void set(const std::string & key, const std::string & value) { tree_.put(key, value); }

  bool has(const std::string & key) const { return static_cast<bool>(tree_.get_optional<std::string>(key)); }

  template <typename T>
  T get(const std::string & key, const T & fallback) const
  {
    used_.insert(key);
    const auto raw = tree_.get_optional<std::string>(key);
    if (!raw) return fallback;
    return convert<T>(key, *raw);
  }

  /// Comma-separated list.
  template <typename T>
  std::vector<T> get_list(const std::string & key, const std::vector<T> & fallback) const
  {
    used_.insert(key);
    const auto raw = tree_.get_optional<std::string>(key);
    if (!raw) return fallback;
    std::vector<std::string> parts;
    boost::split(parts, *raw, boost::is_any_of(","));
    std::vector<T> out;
    for (auto & p : parts) {
      boost::trim(p);
      if (!p.empty()) out.push_back(convert<T>(key, p));
    }
    return out;
  }

  /// Keys present in the file but never read.
  std::vector<std::string> unused_keys() const
  {
    std::vector<std::string> out;
    for (const auto & [section, body] : tree_) {
      if (body.empty()) {
        if (!used_.count(section)) out.push_back(section);
        continue;
      }
      for (const auto & [key, leaf] : body) {
        const std::string full = section + "." + key;
        if (!used_.count(full)) out.push_back(full);
      }
    }
    return out;
  }

  void check_all_used() const
  {
    const auto left = unused_keys();
    if (left.empty()) return;
    std::string msg = "unknown config key";
    msg += left.size() > 1 ? "s: " : ": ";
    for (size_t i = 0; i < left.size(); ++i) msg += (i ? ", " : "") + left[i];
    throw std::invalid_argument(msg);
  }

  /// Canonical "key=value" lines, sorted; used for content hashing.
  std::string canonical() const
  {
    std::vector<std::string> lines;
    for (const auto & [section, body] : tree_) {
      if (body.empty()) {
        lines.push_back(section + "=" + body.data());
        continue;
      }
      for (const auto & [key, leaf] : body) lines.push_back(section + "." + key + "=" + leaf.data());
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto & l : lines) out += l + "\n";
    return out;
  }

private:
  template <typename T>
  static T convert(const std::string & key, const std::string & raw)
  {
    if constexpr (std::is_same_v<T, std::string>) {
      return raw;
    } else if constexpr (std::is_same_v<T, bool>) {
      const auto v = boost::to_lower_copy(raw);
      if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
      if (v == "0" || v == "false" || v == "no" || v == "off") return false;
      throw std::invalid_argument("config key " + key + ": '" + raw + "' is not a boolean");
    } else {
      if constexpr (std::is_floating_point_v<T>) {
        const auto v = boost::to_lower_copy(raw);
        if (v == "inf" || v == "infinity") return std::numeric_limits<T>::infinity();
      }
      try {
        return boost::lexical_cast<T>(raw);
      } catch (const boost::bad_lexical_cast &) {
        throw std::invalid_argument("config key " + key + ": cannot parse '" + raw + "'");
      }
    }
  }

  boost::property_tree::ptree tree_;
  mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Readers. Each fills a struct from its section, keeping current values as
// defaults.

inline void read_schedule(const Config & c, ScheduleSpec & s)
{
  s.steps = c.get("schedule.steps", s.steps);
  s.beta_min = c.get("schedule.beta_min", s.beta_min);
  s.beta_max = c.get("schedule.beta_max", s.beta_max);
  s.variance = parse_variance_kind(
    c.get<std::string>("schedule.variance", s.variance == VarianceKind::kPosterior ? "posterior" : "beta"));
}

inline void read_training(const Config & c, const std::string & section, TrainingConfig & t)
{
  const auto k = [&section](const char * name) { return section + "." + name; };
  t.epochs = c.get(k("epochs"), t.epochs);
  t.batch_size = c.get(k("batch_size"), t.batch_size);
  t.learning_rate = c.get(k("learning_rate"), t.learning_rate);
  t.hidden = c.get_list(k("hidden"), t.hidden);
  t.time_embedding_dim = c.get(k("time_embedding_dim"), t.time_embedding_dim);
  t.nonuniform_fraction = c.get(k("nonuniform_fraction"), t.nonuniform_fraction);
}

inline void read_trust(const Config & c, const std::string & prefix, TrustRegionParams & p)
{
  p.kappa = c.get("sampler.kappa", p.kappa);
  p.kappa = c.get("sampler." + prefix + "_kappa", p.kappa);
  p.lambda = c.get("sampler.lambda", p.lambda);
  p.lambda = c.get("sampler." + prefix + "_lambda", p.lambda);
  const double rho = c.get("sampler." + prefix + "_rho", -1.0);
  if (rho >= 0.0) p.rho = rho;
}

inline void read_sampler(const Config & c, SamplerConfig & s)
{
  s.t_low = c.get("sampler.t_low", s.t_low);
  read_trust(c, "warmup", s.warmup_trust);
  read_trust(c, "rolling", s.rolling_trust);
  s.guide_warmup = c.get("sampler.guide_warmup", s.guide_warmup);
  s.guide_rolling = c.get("sampler.guide_rolling", s.guide_rolling);
  s.multi_update = c.get("sampler.multi_update", s.multi_update);
  auto & v = s.solver;
  v.max_iters = c.get("solver.max_iters", v.max_iters);
  v.grad_tol = c.get("solver.grad_tol", v.grad_tol);
  v.step_init = c.get("solver.step_init", v.step_init);
  v.backtrack_factor = c.get("solver.backtrack_factor", v.backtrack_factor);
  v.armijo = c.get("solver.armijo", v.armijo);
  v.max_backtracks = c.get("solver.max_backtracks", v.max_backtracks);
  v.use_stabilizer = c.get("solver.use_stabilizer", v.use_stabilizer);
}

inline void read_guidance(const Config & c, const std::string & section, GuidanceSpec & g)
{
  // Shared [guidance] keys first, then the phase-specific section.
  for (const std::string & s : {std::string("guidance"), section}) {
    const auto k = [&s](const char * name) { return s + "." + name; };
    g.w_a = c.get(k("w_a"), g.w_a);
    g.w_ad = c.get(k("w_ad"), g.w_ad);
    g.w_delta = c.get(k("w_delta"), g.w_delta);
    g.w_deltad = c.get(k("w_deltad"), g.w_deltad);
    g.w_h = c.get(k("w_h"), g.w_h);
    g.w_g = c.get(k("w_g"), g.w_g);
    g.psi_max = c.get(k("psi_max"), g.psi_max);
    g.b_max = c.get(k("b_max"), g.b_max);
    g.clearance = c.get(k("clearance"), g.clearance);
    g.speed_threshold = c.get(k("speed_threshold"), g.speed_threshold);
    g.wheelbase_ratio = c.get(k("wheelbase_ratio"), g.wheelbase_ratio);
    g.smoothness = c.get(k("smoothness"), g.smoothness);
    g.kinematic = c.get(k("kinematic"), g.kinematic);
    g.state = c.get(k("state"), g.state);
    g.heading = c.get(k("heading"), g.heading);
    g.road = c.get(k("road"), g.road);
    g.safety = c.get(k("safety"), g.safety);
    g.log_barrier = c.get(k("log_barrier"), g.log_barrier);
    g.barrier_epsilon = c.get(k("barrier_epsilon"), g.barrier_epsilon);
  }
  g.validate();
}

inline void read_game(const Config & c, GameConfig & g)
{
  g.alpha = c.get("adversarial.alpha", g.alpha);
  g.max_ibr_iters = c.get("adversarial.max_ibr_iters", g.max_ibr_iters);
  g.anchor_tol = c.get("adversarial.anchor_tol", g.anchor_tol);
  g.ego_index = c.get("adversarial.ego", g.ego_index);
  g.attacker_index = c.get("adversarial.attacker", g.attacker_index);
  g.sector_half_angle = c.get("adversarial.sector_half_angle", g.sector_half_angle);
  g.sector_range = c.get("adversarial.sector_range", g.sector_range);
  g.ego_margin = c.get("adversarial.ego_margin", g.ego_margin);
  g.attacker_margin = c.get("adversarial.attacker_margin", g.attacker_margin);
  g.bias_routes = c.get("adversarial.bias_routes", g.bias_routes);
  g.validate();
}

inline void read_scene_spec(const Config & c, CorridorSceneSpec & s)
{
  s.map.kind = parse_map_kind(c.get<std::string>("scene.map", to_string(s.map.kind)));
  s.map.lanes = c.get("scene.lanes", s.map.lanes);
  s.map.length = c.get("scene.length", s.map.length);
  s.map.lane_width = c.get("scene.lane_width", s.map.lane_width);
  s.map.curve_radius = c.get("scene.curve_radius", s.map.curve_radius);
  s.num_agents = c.get("scene.agents", s.num_agents);
  s.adversarial_layout = c.get("scene.adversarial_layout", s.adversarial_layout);
  auto & t = s.traffic;
  t.dt = c.get("scene.dt", t.dt);
  t.history_steps = c.get("scene.history_steps", t.history_steps);
  t.future_steps = c.get("scene.future_steps", t.future_steps);
  t.speed_min = c.get("scene.speed_min", t.speed_min);
  t.speed_max = c.get("scene.speed_max", t.speed_max);
}

inline void read_metrics(const Config & c, MetricsConfig & m)
{
  auto & l = m.limits;
  l.speed = c.get("metrics.max_speed", l.speed);
  l.accel = c.get("metrics.max_accel", l.accel);
  l.jerk = c.get("metrics.max_jerk", l.jerk);
  l.yaw_rate = c.get("metrics.max_yaw_rate", l.yaw_rate);
  l.lateral_accel = c.get("metrics.max_lateral_accel", l.lateral_accel);
  l.curvature = c.get("metrics.max_curvature", l.curvature);
  m.b_max = c.get("metrics.b_max", m.b_max);
  m.footprint_offroad = c.get("metrics.footprint_offroad", m.footprint_offroad);
  m.ttc_horizon = c.get("metrics.ttc_horizon", m.ttc_horizon);
  if (!(m.ttc_horizon > 0.0)) throw std::invalid_argument("metrics.ttc_horizon must be positive");
}

inline HistogramSpec read_histogram(const Config & c, const Statistic s)
{
  auto h = HistogramSpec::defaults(s);
  h.bin_count = c.get("metrics.bins", h.bin_count);
  const std::string name = to_string(s);
  h.lo = c.get("metrics." + name + "_lo", h.lo);
  h.hi = c.get("metrics." + name + "_hi", h.hi);
  h.validate();
  return h;
}

/// Scene sampler settings: library defaults overlaid with the config.
inline SceneSamplerConfig read_scene_sampler(const Config & c)
{
  auto cfg = SceneSamplerConfig::defaults();
  read_sampler(c, cfg.sampler);
  read_guidance(c, "guidance_warmup", cfg.warmup_spec);
  read_guidance(c, "guidance_rolling", cfg.rolling_spec);
  read_game(c, cfg.game);
  cfg.guided = c.get("gen.guided", cfg.guided);
  cfg.mode = parse_generation_mode(c.get<std::string>("gen.mode", to_string(cfg.mode)));
  return cfg;
}

}  // namespace omega

#endif  // OMEGA__CONFIG_HPP_

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

#ifndef OMEGA__ADVERSARIAL_HPP_
#define OMEGA__ADVERSARIAL_HPP_

#include "omega/geometry.hpp"
#include "omega/guidance.hpp"
#include "omega/routes.hpp"
#include "omega/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omega
{

struct GameConfig
{
  /// Weight of the sensitivity bonus in the attacker objective.
  double alpha{1.0};
  int max_ibr_iters{10};
  /// Convergence threshold on the change of either anchor.
  double anchor_tol{1e-3};
  int ego_index{0};
  int attacker_index{1};
  /// Ego responsibility region: forward sector in the ego frame.
  double sector_half_angle{std::numbers::pi / 3.0};
  double sector_range{30.0};
  /// Extra separation the ego tries to keep from the attacker.
  double ego_margin{2.0};
  /// Extra separation the attacker keeps from the ego.
  double attacker_margin{0.0};
  /// Rank attacker routes that enter the ego region first.
  bool bias_routes{true};

  void validate(const int num_agents = -1) const
  {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
    if (max_ibr_iters < 1) throw std::invalid_argument("max_ibr_iters must be >= 1");
    if (!(anchor_tol > 0.0)) throw std::invalid_argument("anchor_tol must be > 0");
    if (ego_index == attacker_index) throw std::invalid_argument("ego and attacker must differ");
    if (ego_index < 0 || attacker_index < 0) throw std::invalid_argument("agent indices must be >= 0");
    if (num_agents >= 0 && (ego_index >= num_agents || attacker_index >= num_agents)) {
      throw std::invalid_argument("ego or attacker index out of range");
    }
    if (!(sector_half_angle > 0.0) || !(sector_range > 0.0)) {
      throw std::invalid_argument("responsibility region must have positive extent");
    }
    if (ego_margin < 0.0 || attacker_margin < 0.0) throw std::invalid_argument("margins must be >= 0");
  }
};

struct GameIteration
{
  int iter{0};
  Vector ego_anchor;
  Vector attacker_anchor;
  std::vector<ResidualEntry> mu_e;
  Vector sensitivity;
  double ego_value{0.0};
  double attacker_value{0.0};
  double max_pair_violation{0.0};
  double ego_change{0.0};
  double attacker_change{0.0};
};

struct GameTrace
{
  std::vector<GameIteration> iterations;
  bool converged{false};

  void write_csv(std::ostream & out, const bool header = true) const
  {
    if (header) {
      out << "iter,ego_value,attacker_value,max_pair_violation,active_mu,mu_sum,sensitivity_norm,"
             "ego_change,attacker_change\n";
    }
    for (const auto & it : iterations) {
      int active = 0;
      double sum = 0.0;
      for (const auto & m : it.mu_e) {
        active += m.value > 0.0 ? 1 : 0;
        sum += m.value;
      }
      out << it.iter << ',' << it.ego_value << ',' << it.attacker_value << ',' << it.max_pair_violation << ','
          << active << ',' << sum << ',' << it.sensitivity.norm() << ',' << it.ego_change << ','
          << it.attacker_change << '\n';
    }
  }
};

/// -sum_k mu_k * d gamma_k / d x^a.
inline Vector sensitivity_term(const std::vector<double> & mu, const std::vector<Vector> & gamma_gradients, const Eigen::Index dim)
{
  if (mu.size() != gamma_gradients.size()) throw std::invalid_argument("multiplier and gradient counts differ");
  Vector out = Vector::Zero(dim);
  for (size_t k = 0; k < mu.size(); ++k) {
    if (mu[k] < 0.0) throw std::invalid_argument("multipliers must be >= 0");
    if (mu[k] == 0.0) continue;
    if (gamma_gradients[k].size() != dim) throw std::invalid_argument("constraint gradient has the wrong size");
    out -= mu[k] * gamma_gradients[k];
  }
  return out;
}

/// The two players of the game.
struct GamePlayers
{
  /// Ego reanchor against a fixed attacker anchor. Pair constraints must be
  /// recorded in residuals.pair and their multipliers in multipliers.pair.
  std::function<ReanchorResult(const Vector & attacker_anchor)> ego_response;
  /// d gamma_k / d x^a for every entry of ego.multipliers.pair, at the ego
  /// solution and the given attacker anchor.
  std::function<std::vector<Vector>(const ReanchorResult & ego, const Vector & attacker_anchor)> constraint_gradients;
  /// Attacker reanchor with objective J^a(z) + bonus . z against a fixed ego
  /// anchor. Its own no-contact constraints go in residuals.pair.
  std::function<ReanchorResult(const Vector & bonus, const Vector & ego_anchor)> attacker_response;
};

struct GameResult
{
  ReanchorResult ego;
  ReanchorResult attacker;
  GameTrace trace;
};

inline ReanchorResult ego_best_response(const GamePlayers & players, const Vector & attacker_anchor)
{
  return players.ego_response(attacker_anchor);
}

/// Attacker update given the ego response: the bonus is
/// alpha * sum_k mu_k d gamma_k / d x^a.
inline ReanchorResult attacker_step(
  const GamePlayers & players, const ReanchorResult & ego, const Vector & attacker_anchor,
  const GameConfig & cfg, Vector * sensitivity_out = nullptr)
{
  std::vector<double> mu;
  for (const auto & m : ego.multipliers.pair) mu.push_back(m.value);
  Vector sens = Vector::Zero(attacker_anchor.size());
  bool any = false;
  for (const double m : mu) any = any || m > 0.0;
  if (any) sens = sensitivity_term(mu, players.constraint_gradients(ego, attacker_anchor), attacker_anchor.size());
  if (sensitivity_out) *sensitivity_out = sens;
  return players.attacker_response(-cfg.alpha * sens, ego.x_hat);
}

/// Sensitivity-enhanced iterative best response from the model-predicted
/// anchors.
inline GameResult se_ibr(
  const Vector & ego_anchor, const Vector & attacker_anchor, const GamePlayers & players, const GameConfig & cfg)
{
  if (!players.ego_response || !players.attacker_response || !players.constraint_gradients) {
    throw std::invalid_argument("se_ibr: incomplete player callbacks");
  }
  cfg.validate();
  GameResult res;
  Vector prev_e = ego_anchor;
  Vector prev_a = attacker_anchor;
  for (int l = 1; l <= cfg.max_ibr_iters; ++l) {
    res.ego = ego_best_response(players, prev_a);
    GameIteration it;
    it.iter = l;
    res.attacker = attacker_step(players, res.ego, prev_a, cfg, &it.sensitivity);
    it.ego_anchor = res.ego.x_hat;
    it.attacker_anchor = res.attacker.x_hat;
    it.mu_e = res.ego.multipliers.pair;
    it.ego_value = res.ego.objective_value;
    it.attacker_value = res.attacker.objective_value;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto & r : res.ego.residuals.pair) worst = std::max(worst, r.value);
    it.max_pair_violation = std::isfinite(worst) ? worst : 0.0;
    it.ego_change = (res.ego.x_hat - prev_e).norm();
    it.attacker_change = (res.attacker.x_hat - prev_a).norm();
    res.trace.iterations.push_back(it);

    bool dormant = true;
    for (const auto & m : res.ego.multipliers.pair) dormant = dormant && m.value == 0.0;
    for (const auto & m : res.attacker.multipliers.pair) dormant = dormant && m.value == 0.0;
    const bool settled = l > 1 && it.ego_change <= cfg.anchor_tol && it.attacker_change <= cfg.anchor_tol;
    prev_e = res.ego.x_hat;
    prev_a = res.attacker.x_hat;
    if (dormant || settled) {
      res.trace.converged = true;
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Ego-attacker pair geometry.

struct PairTerm
{
  int frame;
  int index;
  double value;
  std::array<double, 3> grad_ego;
  std::array<double, 3> grad_attacker;
};

/// Circle separation r_e + r_a + margin - |c_e - c_a| for the four circle
/// pairs at every frame flagged in `active`.
inline std::vector<PairTerm> pair_terms(
  const Matrix & ego, const double ego_length, const double ego_radius, const Matrix & attacker,
  const double attacker_length, const double attacker_radius, const double margin,
  const std::vector<uint8_t> & active)
{
  if (ego.rows() != attacker.rows() || static_cast<Eigen::Index>(active.size()) != ego.rows()) {
    throw std::invalid_argument("pair_terms: horizon mismatch");
  }
  std::vector<PairTerm> out;
  for (Eigen::Index f = 0; f < ego.rows(); ++f) {
    if (!active[static_cast<size_t>(f)]) continue;
    const auto t = circle_pair_terms(
      ego(f, kPx), ego(f, kPy), ego(f, kPsi), ego_length, ego_radius, attacker(f, kPx), attacker(f, kPy),
      attacker(f, kPsi), attacker_length, attacker_radius);
    for (size_t k = 0; k < 4; ++k) {
      out.push_back({static_cast<int>(f), static_cast<int>(k), t.value[k] + margin, t.grad_i[k], t.grad_j[k]});
    }
  }
  return out;
}

/// Frames at which the attacker center lies in the ego's forward sector.
inline std::vector<uint8_t> responsibility_frames(
  const Matrix & ego, const Matrix & attacker, const GameConfig & cfg, const std::vector<uint8_t> & valid)
{
  std::vector<uint8_t> out(static_cast<size_t>(ego.rows()), 0);
  for (Eigen::Index f = 0; f < ego.rows(); ++f) {
    if (!valid[static_cast<size_t>(f)]) continue;
    const Pose2 origin{ego(f, kPx), ego(f, kPy), ego(f, kPsi)};
    out[static_cast<size_t>(f)] =
      in_forward_sector(origin, {attacker(f, kPx), attacker(f, kPy)}, cfg.sector_half_angle, cfg.sector_range);
  }
  return out;
}

/// Stable reorder: candidates with a point inside the ego region and within
/// `half_width` of one of the ego's routes come first.
inline std::vector<Polyline> bias_attacker_routes(
  const std::vector<Polyline> & candidates, const Pose2 & ego_pose, const std::vector<Polyline> & ego_routes,
  const double half_width, const GameConfig & cfg)
{
  std::vector<Polyline> hit;
  std::vector<Polyline> miss;
  for (const auto & c : candidates) {
    bool inter = false;
    for (const auto & p : c) {
      if (!in_forward_sector(ego_pose, {p.x, p.y}, cfg.sector_half_angle, cfg.sector_range)) continue;
      for (const auto & r : ego_routes) {
        if (!r.empty() && project_to_polyline(r, {p.x, p.y}).distance <= half_width) {
          inter = true;
          break;
        }
      }
      if (inter) break;
    }
    (inter ? hit : miss).push_back(c);
  }
  hit.insert(hit.end(), miss.begin(), miss.end());
  return hit;
}

}  // namespace omega

#endif  // OMEGA__ADVERSARIAL_HPP_

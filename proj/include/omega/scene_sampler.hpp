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

#ifndef OMEGA__SCENE_SAMPLER_HPP_
#define OMEGA__SCENE_SAMPLER_HPP_

#include "omega/adversarial.hpp"
#include "omega/corridor.hpp"
#include "omega/guidance.hpp"
#include "omega/mlp.hpp"
#include "omega/routes.hpp"
#include "omega/two_phase.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace omega
{

// ---------------------------------------------------------------------------
// Trained corridor model: schedule, codec and denoiser.

struct ScheduleSpec
{
  int steps{100};
  double beta_min{1e-3};
  double beta_max{0.2};
  VarianceKind variance{VarianceKind::kPosterior};

  DiffusionSchedule build() const { return DiffusionSchedule(steps, beta_min, beta_max, variance); }
};

struct CorridorModel
{
  ScheduleSpec schedule;
  TrajectoryCodec codec;
  MlpDenoiser denoiser;
};

struct CorridorTrainingConfig
{
  int scenes{600};
  CorridorSceneSpec scene;
  ScheduleSpec schedule;
  TrainingConfig training{80, 256, 2e-3, {256, 256, 256}, 16, 0.5};
};

inline CorridorModel train_corridor_model(
  const CorridorTrainingConfig & cfg, Rng & rng, TrainingLog * log = nullptr,
  const std::function<void(int, double)> & on_epoch = {})
{
  if (cfg.scenes < 1) throw std::invalid_argument("training needs at least one scene");
  const int frames = cfg.scene.traffic.history_steps + cfg.scene.traffic.future_steps;
  const Matrix local = corridor_training_trajectories(cfg.scene, cfg.scenes, rng);
  CorridorModel model;
  model.schedule = cfg.schedule;
  model.codec = TrajectoryCodec::fit(local, frames, cfg.scene.traffic.history_steps - 1);
  Matrix data(local.rows(), local.cols());
  for (Eigen::Index j = 0; j < local.cols(); ++j) {
    data.col(j) = ((local.col(j) - model.codec.mean()).array() / model.codec.scale().array()).matrix();
  }
  model.denoiser = train_denoiser(data, frames, model.schedule.build(), cfg.training, rng, log, on_epoch);
  model.denoiser.metadata()["training_scenes"] = cfg.scenes;
  model.denoiser.metadata()["trajectories"] = local.cols();
  return model;
}

inline nlohmann::json corridor_model_to_json(const CorridorModel & m)
{
  return {
    {"format", "omega.corridor_model"},
    {"version", 1},
    {"schedule",
     {{"steps", m.schedule.steps},
      {"beta_min", m.schedule.beta_min},
      {"beta_max", m.schedule.beta_max},
      {"variance", m.schedule.variance == VarianceKind::kPosterior ? "posterior" : "beta"}}},
    {"codec", m.codec.to_json()},
    {"denoiser", denoiser_to_json(m.denoiser)}};
}

inline CorridorModel corridor_model_from_json(const nlohmann::json & j)
{
  if (j.value("format", "") != "omega.corridor_model") throw std::runtime_error("not a corridor model file");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported corridor model version");
  CorridorModel m;
  const auto & s = j.at("schedule");
  m.schedule.steps = s.at("steps").get<int>();
  m.schedule.beta_min = s.at("beta_min").get<double>();
  m.schedule.beta_max = s.at("beta_max").get<double>();
  m.schedule.variance = parse_variance_kind(s.at("variance").get<std::string>());
  m.codec = TrajectoryCodec::from_json(j.at("codec"));
  m.denoiser = denoiser_from_json(j.at("denoiser"));
  if (m.denoiser.frames() != m.codec.frames() || m.denoiser.channels() != kMotionDim) {
    throw std::runtime_error("corridor model codec and denoiser disagree on the layout");
  }
  return m;
}

inline void save_corridor_model(const CorridorModel & m, const std::filesystem::path & path)
{
  write_text_atomic(path, corridor_model_to_json(m).dump());
}

inline CorridorModel load_corridor_model(const std::filesystem::path & path)
{
  try {
    return corridor_model_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception & e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::runtime_error & e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scene generation.

enum class GenerationMode { kFree, kGoal, kAdversarial };

inline GenerationMode parse_generation_mode(std::string_view name)
{
  if (name == "free") return GenerationMode::kFree;
  if (name == "goal") return GenerationMode::kGoal;
  if (name == "adversarial") return GenerationMode::kAdversarial;
  throw std::invalid_argument("unknown generation mode '" + std::string(name) + "'");
}

inline const char * to_string(const GenerationMode m)
{
  switch (m) {
    case GenerationMode::kFree:
      return "free";
    case GenerationMode::kGoal:
      return "goal";
    case GenerationMode::kAdversarial:
      return "adversarial";
  }
  return "?";
}

struct SceneSamplerConfig
{
  SamplerConfig sampler;
  /// Single-agent terms.
  GuidanceSpec warmup_spec;
  /// Adds interaction terms.
  GuidanceSpec rolling_spec;
  GenerationMode mode{GenerationMode::kFree};
  GameConfig game;
  RouteOptions routes;
  /// False disables all guidance (the unguided baseline).
  bool guided{true};

  static SceneSamplerConfig defaults()
  {
    SceneSamplerConfig cfg;
    cfg.warmup_spec.safety = false;
    // Keep the road and safety terms inside the evaluation thresholds so
    // penalty slack does not register as a violation.
    for (auto * spec : {&cfg.warmup_spec, &cfg.rolling_spec}) {
      spec->b_max = 1.5;
      spec->clearance = 0.5;
    }
    cfg.sampler.warmup_trust.kappa = 2.0;
    cfg.sampler.rolling_trust.kappa = 2.0;
    cfg.sampler.solver.max_iters = 60;
    cfg.sampler.solver.grad_tol = 1e-5;
    return cfg;
  }
};

struct GeneratedScene
{
  Scene scene;
  SamplerDiagnostics diagnostics;
  std::vector<GameTrace> games;
  /// Agents whose future was sampled.
  std::vector<int> generated_agents;
};

namespace detail
{

inline Vector flatten_states(const Matrix & states)
{
  Vector out(states.rows() * kMotionDim);
  for (Eigen::Index f = 0; f < states.rows(); ++f) {
    for (int c = 0; c < kMotionDim; ++c) out(f * kMotionDim + c) = states(f, c);
  }
  return out;
}

/// Guidance for corridor scenes in normalized trajectory coordinates.
class CorridorGuidance : public GuidanceProvider
{
public:
  CorridorGuidance(
    const CorridorModel & model, const Scene & context, const SceneSamplerConfig & cfg,
    std::vector<Pose2> origins, std::vector<uint8_t> generated)
  : model_(model), scene_(context), cfg_(cfg), origins_(std::move(origins)), generated_(std::move(generated))
  {
    const auto & t = scene_.tensor;
    const int anchor = model_.codec.anchor_frame();
    for (int a = 0; a < t.num_agents(); ++a) {
      lengths_.push_back(t.at(a, anchor, kLength));
      widths_.push_back(t.at(a, anchor, kWidth));
      std::vector<uint8_t> v;
      for (int f = 0; f < t.num_steps(); ++f) v.push_back(t.valid(a, f) ? 1 : 0);
      valid_.push_back(std::move(v));
      candidates_.push_back(generated_[static_cast<size_t>(a)] ? route_candidates(scene_.map, origins_[static_cast<size_t>(a)], cfg_.routes)
                                                             : std::vector<Polyline>{});
    }
    adversarial_ = cfg_.mode == GenerationMode::kAdversarial;
    if (adversarial_) {
      cfg_.game.validate(t.num_agents());
      const int e = cfg_.game.ego_index;
      const int at = cfg_.game.attacker_index;
      if (!generated_[static_cast<size_t>(e)] || !generated_[static_cast<size_t>(at)]) {
        throw std::invalid_argument("adversarial mode needs a generated ego and attacker");
      }
      attacker_warmup_candidates_ = candidates_[static_cast<size_t>(at)];
      if (cfg_.game.bias_routes) {
        attacker_warmup_candidates_ = bias_attacker_routes(
          attacker_warmup_candidates_, origins_[static_cast<size_t>(e)], candidates_[static_cast<size_t>(e)],
          scene_.map.half_width, cfg_.game);
      }
      if (!attacker_warmup_candidates_.empty()) attacker_warmup_candidates_.resize(1);
    }
  }

  const std::vector<GameTrace> & games() const { return games_; }

  void begin_step(const Phase phase, const int t, const int tau, const Matrix & anchors) override
  {
    decoded_.clear();
    for (Eigen::Index a = 0; a < anchors.cols(); ++a) {
      if (generated_[static_cast<size_t>(a)]) {
        decoded_.push_back(model_.codec.decode(anchors.col(a), origins_[static_cast<size_t>(a)]));
      } else {
        decoded_.push_back(agent_states(scene_.tensor, static_cast<int>(a)));
      }
    }
    game_key_ = {phase, t, tau};
    game_solved_ = false;
  }

  std::optional<AgentGuidance> prepare(const GuidanceQuery & q) override
  {
    const int a = q.agent;
    if (!generated_[static_cast<size_t>(a)]) return std::nullopt;
    if (adversarial_ && (a == cfg_.game.ego_index || a == cfg_.game.attacker_index)) {
      if (!game_solved_ || game_key_ != std::make_tuple(q.phase, q.t, q.tau)) solve_game(q);
      AgentGuidance g;
      g.solved = a == cfg_.game.ego_index ? game_.ego : game_.attacker;
      return g;
    }
    std::vector<int> exclude;
    return build(q, a, q.anchors->col(a), exclude, candidates_[static_cast<size_t>(a)]);
  }

private:
  const GuidanceSpec & spec_for(const Phase p) const
  {
    return p == Phase::kWarmup ? cfg_.warmup_spec : cfg_.rolling_spec;
  }

  /// Single-agent guidance plus interaction with every agent not in
  /// `exclude` when the phase's spec enables safety.
  AgentGuidance build(
    const GuidanceQuery & q, const int a, const Vector & anchor, const std::vector<int> & exclude,
    const std::vector<Polyline> & candidates) const
  {
    const auto & spec = spec_for(q.phase);
    const auto & codec = model_.codec;
    const Pose2 origin = origins_[static_cast<size_t>(a)];
    const Matrix states0 = codec.decode(anchor, origin);
    GuidanceContext ctx;
    ctx.dt = scene_.tensor.dt();
    ctx.length = lengths_[static_cast<size_t>(a)];
    ctx.width = widths_[static_cast<size_t>(a)];
    ctx.valid = valid_[static_cast<size_t>(a)];
    if (!candidates.empty()) {
      for (Eigen::Index f = 0; f < states0.rows(); ++f) {
        ctx.refs.push_back(nearest_reference({states0(f, kPx), states0(f, kPy)}, candidates));
      }
    }
    if (spec.safety) {
      for (size_t o = 0; o < decoded_.size(); ++o) {
        if (static_cast<int>(o) == a || std::find(exclude.begin(), exclude.end(), static_cast<int>(o)) != exclude.end()) {
          continue;
        }
        OtherAgentTrack tr;
        tr.states = decoded_[o];
        tr.length = lengths_[o];
        tr.width = widths_[o];
        tr.active = valid_[o];
        ctx.others.push_back(std::move(tr));
      }
    }
    const double wheelbase = ctx.wheelbase(spec);
    const ControlSequence u0 = infer_controls(states0, ctx.dt, wheelbase);
    const int frames = codec.frames();
    AgentGuidance g;
    g.aux = pack_decision(states0, u0).tail(2 * (frames - 1));
    g.w_g = spec.w_g;
    g.log_barrier = spec.log_barrier;
    g.barrier_epsilon = spec.barrier_epsilon;
    const Eigen::Index n = codec.dim();
    g.objective = [spec, ctx, origin, n, &codec](const Vector & z, double lambda, bool record) mutable {
      ctx.lambda = lambda;
      Vector decision(z.size());
      decision.head(n) = flatten_states(codec.decode(z.head(n), origin));
      decision.tail(z.size() - n) = z.tail(z.size() - n);
      ObjectiveReport rep = assemble_objective(decision, spec, ctx, record);
      rep.gradient.head(n) = codec.pullback(rep.gradient.head(n), origin);
      return rep;
    };
    return g;
  }

  AnchorProblem problem_from(AgentGuidance g, const Vector & anchor, std::vector<uint8_t> frozen) const
  {
    AnchorProblem p;
    p.anchor = anchor;
    p.aux = std::move(g.aux);
    p.frozen = std::move(frozen);
    p.objective = std::move(g.objective);
    p.w_g = g.w_g;
    p.log_barrier = g.log_barrier;
    p.barrier_epsilon = g.barrier_epsilon;
    return p;
  }

  void solve_game(const GuidanceQuery & q)
  {
    const auto & gc = cfg_.game;
    const int e = gc.ego_index;
    const int at = gc.attacker_index;
    const auto & codec = model_.codec;
    const auto & spec = spec_for(q.phase);
    const Eigen::Index n = codec.dim();
    const Vector x_e = q.anchors->col(e);
    const Vector x_a = q.anchors->col(at);
    const Pose2 oe = origins_[static_cast<size_t>(e)];
    const Pose2 oa = origins_[static_cast<size_t>(at)];
    const double re = spec.safety_radius(widths_[static_cast<size_t>(e)]);
    const double ra = spec.safety_radius(widths_[static_cast<size_t>(at)]);
    const double le = lengths_[static_cast<size_t>(e)];
    const double la = lengths_[static_cast<size_t>(at)];
    const Matrix ego0 = codec.decode(x_e, oe);
    const auto & att_cands =
      q.phase == Phase::kWarmup && !attacker_warmup_candidates_.empty() ? attacker_warmup_candidates_
                                                                         : candidates_[static_cast<size_t>(at)];
    const AgentGuidance ego_base = build(q, e, x_e, {at}, candidates_[static_cast<size_t>(e)]);
    const AgentGuidance att_base = build(q, at, x_a, {e}, att_cands);
    const auto ego_frozen = q.frozen_for(e);
    const auto att_frozen = q.frozen_for(at);
    const auto valid_e = valid_[static_cast<size_t>(e)];
    std::vector<uint8_t> both(valid_e.size());
    for (size_t f = 0; f < both.size(); ++f) both[f] = valid_e[f] && valid_[static_cast<size_t>(at)][f];

    GamePlayers players;
    players.ego_response = [&, n](const Vector & attacker_anchor) {
      const Matrix att = codec.decode(attacker_anchor, oa);
      const auto active = responsibility_frames(ego0, att, gc, both);
      AgentGuidance g = ego_base;
      const auto base = g.objective;
      g.objective = [=, &codec](const Vector & z, double lambda, bool record) {
        ObjectiveReport rep = base(z, lambda, record);
        const Matrix ego = codec.decode(z.head(n), oe);
        Vector grad = Vector::Zero(n);
        for (const auto & term : pair_terms(ego, le, re, att, la, ra, gc.ego_margin, active)) {
          if (record) {
            rep.residuals.pair.push_back({term.frame, term.index, term.value});
            if (term.value > 0.0) rep.active_set.push_back({"pair", term.frame, term.index, term.value});
          }
          const Penalty p = inequality_penalty(term.value, spec);
          rep.value -= spec.w_g * p.value;
          for (int c = 0; c < 3; ++c) grad(term.frame * kMotionDim + c) -= spec.w_g * p.slope * term.grad_ego[static_cast<size_t>(c)];
        }
        rep.gradient.head(n) += codec.pullback(grad, oe);
        return rep;
      };
      return reanchor(problem_from(std::move(g), x_e, ego_frozen), q.t, *q.sched, *q.trust, *q.solver);
    };
    players.constraint_gradients = [&, n](const ReanchorResult & ego_res, const Vector & attacker_anchor) {
      const Matrix ego = codec.decode(ego_res.x_hat, oe);
      const Matrix att = codec.decode(attacker_anchor, oa);
      std::vector<Vector> out;
      for (const auto & m : ego_res.multipliers.pair) {
        const auto t = circle_pair_terms(
          ego(m.frame, kPx), ego(m.frame, kPy), ego(m.frame, kPsi), le, re, att(m.frame, kPx), att(m.frame, kPy),
          att(m.frame, kPsi), la, ra);
        Vector g = Vector::Zero(n);
        for (int c = 0; c < 3; ++c) g(m.frame * kMotionDim + c) = t.grad_j[static_cast<size_t>(m.index)][static_cast<size_t>(c)];
        out.push_back(codec.pullback(g, oa));
      }
      return out;
    };
    players.attacker_response = [&, n](const Vector & bonus, const Vector & ego_anchor) {
      const Matrix ego = codec.decode(ego_anchor, oe);
      AgentGuidance g = att_base;
      const auto base = g.objective;
      g.objective = [=, &codec](const Vector & z, double lambda, bool record) {
        ObjectiveReport rep = base(z, lambda, record);
        const Matrix att = codec.decode(z.head(n), oa);
        Vector grad = Vector::Zero(n);
        for (const auto & term : pair_terms(att, la, ra, ego, le, re, gc.attacker_margin, both)) {
          if (record) rep.residuals.pair.push_back({term.frame, term.index, term.value});
          const Penalty p = inequality_penalty(term.value, spec);
          if (p.slope == 0.0 && p.value == 0.0) continue;
          rep.value -= spec.w_g * p.value;
          for (int c = 0; c < 3; ++c) grad(term.frame * kMotionDim + c) -= spec.w_g * p.slope * term.grad_ego[static_cast<size_t>(c)];
        }
        rep.gradient.head(n) += codec.pullback(grad, oa);
        rep.value += bonus.dot(z.head(n));
        rep.gradient.head(n) += bonus;
        return rep;
      };
      return reanchor(problem_from(std::move(g), x_a, att_frozen), q.t, *q.sched, *q.trust, *q.solver);
    };
    game_ = se_ibr(x_e, x_a, players, gc);
    games_.push_back(game_.trace);
    game_solved_ = true;
  }

  const CorridorModel & model_;
  const Scene & scene_;
  SceneSamplerConfig cfg_;
  std::vector<Pose2> origins_;
  std::vector<uint8_t> generated_;
  std::vector<double> lengths_;
  std::vector<double> widths_;
  std::vector<std::vector<uint8_t>> valid_;
  std::vector<std::vector<Polyline>> candidates_;
  std::vector<Polyline> attacker_warmup_candidates_;
  bool adversarial_{false};
  std::vector<Matrix> decoded_;
  std::tuple<Phase, int, int> game_key_{Phase::kWarmup, -1, -1};
  bool game_solved_{false};
  GameResult game_;
  std::vector<GameTrace> games_;
};

}  // namespace detail

/// Samples the free entries of `context` with the two-phase guided sampler.
/// History frames, goal states and every other context entry are returned
/// exactly; sizes are copied from the context.
inline GeneratedScene generate_scene(
  const Scene & context, const CorridorModel & model, const SceneSamplerConfig & cfg, Rng & rng)
{
  const auto & t = context.tensor;
  t.validate();
  const auto & codec = model.codec;
  if (t.num_steps() != codec.frames()) {
    throw std::invalid_argument(
      "scene has " + std::to_string(t.num_steps()) + " steps, model expects " + std::to_string(codec.frames()));
  }
  const int anchor = codec.anchor_frame();
  const int agents = t.num_agents();
  if (agents < 1) throw std::invalid_argument("scene has no agents");
  for (int a = 0; a < agents; ++a) {
    for (int f = 0; f < t.num_steps(); ++f) {
      const bool motion = t.inpaint(a, f, kPx) || t.inpaint(a, f, kPy) || t.inpaint(a, f, kPsi) || t.inpaint(a, f, kSpeed);
      if (motion && (!t.inpaint(a, f, kLength) || !t.inpaint(a, f, kWidth))) {
        throw std::invalid_argument(
          "inconsistent masks: agent " + std::to_string(a) + " frame " + std::to_string(f) +
          " has motion context without size context");
      }
    }
  }
  if (cfg.mode == GenerationMode::kGoal) {
    bool any = false;
    const int last = t.num_steps() - 1;
    for (int a = 0; a < agents; ++a) any = any || (t.valid(a, last) && t.inpaint(a, last, kPx) && history_length(t, a) <= last);
    if (!any) throw std::invalid_argument("goal mode needs set_goal_condition on at least one agent");
  }

  std::vector<Pose2> origins(static_cast<size_t>(agents));
  std::vector<uint8_t> generated(static_cast<size_t>(agents), 0);
  InpaintingContext ctx = InpaintingContext::none(codec.dim(), agents);
  GeneratedScene out;
  for (int a = 0; a < agents; ++a) {
    // Agents without a pose at the anchor frame are not generated.
    const bool has_origin = t.valid(a, anchor) && history_length(t, a) > anchor;
    bool free_entry = false;
    for (int f = 0; f < t.num_steps(); ++f) {
      for (int c = 0; c < kMotionDim; ++c) free_entry = free_entry || (t.valid(a, f) && !t.inpaint(a, f, c));
    }
    generated[static_cast<size_t>(a)] = has_origin && free_entry;
    origins[static_cast<size_t>(a)] = has_origin ? t.pose(a, anchor) : Pose2{};
    if (generated[static_cast<size_t>(a)]) {
      out.generated_agents.push_back(a);
      ctx.known.col(a) = codec.encode(agent_states(t, a), origins[static_cast<size_t>(a)]);
    }
    for (int f = 0; f < t.num_steps(); ++f) {
      for (int c = 0; c < kMotionDim; ++c) {
        const Eigen::Index i = static_cast<Eigen::Index>(f) * kMotionDim + c;
        const bool known = !generated[static_cast<size_t>(a)] || !t.valid(a, f) || t.inpaint(a, f, c);
        ctx.mask(i, a) = known;
        if (!t.valid(a, f)) ctx.known(i, a) = 0.0;
      }
    }
  }

  const DiffusionSchedule sched = model.schedule.build();
  std::unique_ptr<detail::CorridorGuidance> provider;
  if (cfg.guided) provider = std::make_unique<detail::CorridorGuidance>(model, context, cfg, origins, generated);
  auto res = sample_two_phase(model.denoiser, sched, ctx, cfg.sampler, provider.get(), rng);
  out.diagnostics = std::move(res.diagnostics);
  if (provider) out.games = provider->games();

  out.scene = context;
  auto & ot = out.scene.tensor;
  for (const int a : out.generated_agents) {
    const Matrix states = codec.decode(res.x0.col(a), origins[static_cast<size_t>(a)]);
    for (int f = 0; f < t.num_steps(); ++f) {
      if (!t.valid(a, f)) continue;
      for (int c = 0; c < kMotionDim; ++c) {
        if (t.inpaint(a, f, c)) continue;
        const double v = states(f, c);
        ot.at(a, f, c) = c == kPsi ? wrap_angle(v) : v;
      }
    }
  }
  return out;
}

}  // namespace omega

#endif  // OMEGA__SCENE_SAMPLER_HPP_

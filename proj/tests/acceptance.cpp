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

// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include "omega/omega.hpp"
#include "oracles.hpp"
#include "pursuit.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace
{

using omega::DiffusionSchedule;
using omega::Matrix;
using omega::Vector;

struct Outcome
{
  bool pass;
  std::string detail;
};

std::string fmt(const char * f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char * f, ...)
{
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome schedule_identity()
{
  double worst = 0.0;
  for (const int steps : {10, 100, 1000}) {
    const DiffusionSchedule s(steps, 1e-4, 0.02);
    for (int t = 1; t <= steps; ++t) {
      worst = std::max(
        worst, std::abs(s.a_coef(t) + s.c_coef(t) * std::sqrt(s.alpha_bar(t)) - std::sqrt(s.alpha_bar(t - 1))));
    }
  }
  return {worst < 1e-12, fmt("max |A + C sqrt(ab_t) - sqrt(ab_t-1)| = %.3e over T in {10,100,1000}", worst)};
}

Outcome kl_closed_form()
{
  const DiffusionSchedule s(100, 1e-3, 0.2);
  omega::Rng rng(5);
  std::uniform_int_distribution<int> step(2, 100);
  double worst_abs = 0.0;
  double worst_scaled = 0.0;
  double coef_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int t = step(rng);
    const int d = 6;
    const auto k = omega::testing::kernel_coefficients(s, t);
    coef_err = std::max({coef_err, std::abs(k.a - s.a_coef(t)), std::abs(k.c - s.c_coef(t)),
                         std::abs(std::sqrt(k.sigma2) - s.sigma(t))});
    const Vector x_hat = omega::standard_normal(rng, d);
    const Vector x_tilde = x_hat + 0.3 * omega::standard_normal(rng, d);
    const Vector x_t = omega::standard_normal(rng, d);
    const Matrix cov = k.sigma2 * Matrix::Identity(d, d);
    const double generic = omega::testing::gaussian_kl(k.a * x_hat + k.c * x_t, cov, k.a * x_tilde + k.c * x_t, cov);
    const double closed = omega::kernel_kl(x_hat, x_tilde, t, s);
    worst_abs = std::max(worst_abs, std::abs(closed - generic));
    worst_scaled = std::max(worst_scaled, std::abs(closed - generic) / std::max(1.0, generic));
  }
  return {worst_scaled < 1e-10 && coef_err < 1e-12,
          fmt("100 cases: max |KL_closed - KL_generic| = %.3e (%.3e relative to max(1,KL)); coefficient error %.1e",
              worst_abs, worst_scaled, coef_err)};
}

Outcome trust_region()
{
  const DiffusionSchedule s(100, 1e-3, 0.2);
  omega::Rng rng(12);
  std::uniform_int_distribution<int> step(2, 100);
  std::uniform_real_distribution<double> kappa(0.0, 2.0);
  int ok = 0;
  double worst_ball = -1e300;
  double worst_kl = -1e300;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = omega::testing::random_guidance_instance(rng, i % 5 == 4);
    const Eigen::Index n = static_cast<Eigen::Index>(inst.ctx.frames()) * omega::kMotionDim;
    omega::AnchorProblem p;
    p.anchor = inst.decision.head(n);
    p.aux = inst.decision.tail(inst.decision.size() - n);
    p.w_g = inst.spec.w_g;
    auto ctx = inst.ctx;
    const auto spec = inst.spec;
    p.objective = [spec, ctx](const Vector & z, double lambda, bool record) mutable {
      ctx.lambda = lambda;
      return omega::assemble_objective(z, spec, ctx, record);
    };
    omega::TrustRegionParams params;
    params.kappa = kappa(rng);
    params.lambda = inst.ctx.lambda;
    const int t = step(rng);
    const auto r = omega::reanchor(p, t, s, params);
    const double ball = (r.x_hat - p.anchor).norm() - r.radius;
    const double kl = omega::kernel_kl(r.x_hat, p.anchor, t, s) - params.kappa;
    worst_ball = std::max(worst_ball, ball);
    worst_kl = std::max(worst_kl, kl);
    ok += ball <= 1e-9 && kl <= 1e-9;
  }

  // Zero budget: guided sampling must equal unguided sampling bit for bit.
  const auto world = omega::make_toy_world(0);
  const omega::GmmDenoiser den(world.target);
  const DiffusionSchedule toy(100, 1e-3, 0.2);
  const auto cfg = omega::toy_sampler_config(omega::ToyRegime::kOmega, 0.0);
  bool exact = true;
  for (int seed = 0; seed < 50; ++seed) {
    omega::Rng r1(seed);
    omega::Rng r2(seed);
    const Matrix a = omega::sample_toy(world, den, toy, omega::ToyRegime::kUnguided, cfg, 4, r1);
    const Matrix b = omega::sample_toy(world, den, toy, omega::ToyRegime::kOmega, cfg, 4, r2);
    exact = exact && (a.array() == b.array()).all();
  }
  return {ok == 1000 && exact,
          fmt("%d/1000 calls inside ball and budget (max excess: radius %.2e, KL %.2e); kappa=0 bit-exact over 200 "
              "toy samples: %s",
              ok, worst_ball, worst_kl, exact ? "yes" : "no")};
}

Outcome gradient_check()
{
  omega::Rng rng(17);
  double worst = 0.0;
  int max_agents = 0;
  int max_frames = 0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = omega::testing::random_guidance_instance(rng, i % 5 == 4);
    max_agents = std::max(max_agents, 1 + static_cast<int>(inst.ctx.others.size()));
    max_frames = std::max(max_frames, inst.ctx.frames());
    const auto rep = omega::assemble_objective(inst.decision, inst.spec, inst.ctx);
    const auto f = [&](const Vector & z) { return omega::assemble_objective(z, inst.spec, inst.ctx, false).value; };
    worst = std::max(worst, omega::testing::max_fd_relative_error(f, inst.decision, rep.gradient, 1e-5));
  }
  return {worst < 1e-4,
          fmt("100 instances (A <= %d, frames <= %d): max relative error %.3e", max_agents, max_frames, worst)};
}

Outcome toy_regimes()
{
  const auto world = omega::make_toy_world(0);
  const omega::GmmDenoiser den(world.target);
  const DiffusionSchedule s(100, 1e-3, 0.2);
  const int n = 5000;
  auto run = [&](omega::ToyRegime r, uint64_t seed) {
    omega::Rng rng(seed);
    return omega::mode_stats(
      world.target, omega::sample_toy(world, den, s, r, omega::toy_sampler_config(r), n, rng));
  };
  const auto u = run(omega::ToyRegime::kUnguided, 101);
  const auto r = run(omega::ToyRegime::kRewardOnly, 102);
  const auto o = run(omega::ToyRegime::kOmega, 103);
  const auto g = static_cast<size_t>(world.guided_mode());
  bool masses = true;
  double lo = 1.0;
  double hi = 0.0;
  for (const double m : u.mass) {
    masses = masses && std::abs(m - 0.2) <= 0.05;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const bool a = u.within_fraction >= 0.95 && masses;
  const bool b = r.drift_fraction > 0.5;
  const bool c = o.within_fraction >= 0.90 && o.mass[g] > u.mass[g];
  return {a && b && c,
          fmt("(a) within %.3f, masses [%.3f, %.3f] %s; (b) drift %.3f %s; (c) within %.3f, guided mass %.3f vs %.3f %s",
              u.within_fraction, lo, hi, a ? "ok" : "FAIL", r.drift_fraction, b ? "ok" : "FAIL", o.within_fraction,
              o.mass[g], u.mass[g], c ? "ok" : "FAIL")};
}

Outcome sensitivity_identity()
{
  const omega::testing::PursuitToy toy;
  // Closed-form optimal ego value with the constraint active.
  auto j_exact = [&toy](double xa) {
    const double xe = std::min(toy.ego_ref, xa - toy.gap);
    return -toy.c * (xe - toy.ego_ref) * (xe - toy.ego_ref);
  };
  const double h = 1e-4;
  double worst_solved = 0.0;
  double worst_exact = 0.0;
  int positions = 0;
  for (int i = 0; i < 24; ++i) {
    const double xa = 0.5 + 0.18 * i;
    const auto ego = toy.ego_solved(xa);
    if (ego.multipliers.pair.empty() || !(ego.multipliers.pair[0].value > 0.0)) continue;
    ++positions;
    const Vector s = omega::sensitivity_term({ego.multipliers.pair[0].value}, {Vector::Constant(1, -1.0)}, 1);
    const double fd_solved =
      (toy.ego_solved(xa + h).objective_value - toy.ego_solved(xa - h).objective_value) / (2.0 * h);
    const double fd_exact = (j_exact(xa + h) - j_exact(xa - h)) / (2.0 * h);
    worst_solved = std::max(worst_solved, std::abs(fd_solved - s(0)));
    worst_exact = std::max(worst_exact, std::abs(fd_exact - s(0)));
  }
  return {positions >= 20 && worst_solved < 1e-5 && worst_exact < 1e-5,
          fmt("%d active positions: max |FD dJ/dxa - (-mu dgamma/dxa)| = %.3e (solved value), %.3e (closed-form "
              "value)",
              positions, worst_solved, worst_exact)};
}

Outcome ibr_equilibrium()
{
  const omega::testing::PursuitToy toy;
  omega::GameConfig cfg;
  cfg.alpha = 0.25;
  cfg.anchor_tol = 1e-4;
  const auto res = omega::se_ibr(
    Vector::Constant(1, toy.ego_ref), Vector::Constant(1, toy.attacker_ref), toy.players(true), cfg);
  const double target = 11.0 / 3.0;
  const double err = std::abs(res.attacker.x_hat(0) - target);
  const auto iters = res.trace.iterations.size();
  const auto solved = omega::se_ibr(
    Vector::Constant(1, toy.ego_ref), Vector::Constant(1, toy.attacker_ref), toy.players(false), cfg);
  const double err_solved = std::abs(solved.attacker.x_hat(0) - target);
  return {res.trace.converged && err < 1e-4 && iters <= 10,
          fmt("alpha 0.25: attacker %.8f vs 11/3, error %.2e in %zu iterations (anchor_tol 1e-4); anchor-solver "
              "responses: error %.2e in %zu",
              res.attacker.x_hat(0), err, iters, err_solved, solved.trace.iterations.size())};
}

Outcome two_phase_consistency()
{
  const auto world = omega::make_toy_world(0);
  const omega::GmmDenoiser den(world.target);
  const DiffusionSchedule s(100, 1e-3, 0.2);
  const int n = 5000;
  omega::SamplerConfig cfg;
  cfg.t_low = 1;
  cfg.guide_warmup = false;
  cfg.guide_rolling = false;
  omega::Rng r1(201);
  omega::Rng r2(202);
  const Matrix two = omega::sample_toy(world, den, s, omega::ToyRegime::kUnguided, cfg, n, r1);
  Matrix single(2, n);
  for (int i = 0; i < n; ++i) single.col(i) = omega::sample_unguided(den, s, r2);
  const auto a = omega::mode_stats(world.target, two);
  const auto b = omega::mode_stats(world.target, single);
  double worst = 0.0;
  for (size_t k = 0; k < a.mass.size(); ++k) worst = std::max(worst, std::abs(a.mass[k] - b.mass[k]));
  return {worst <= 0.03, fmt("independent seeds, 5000 samples each: max per-mode mass gap %.2f pp", 100.0 * worst)};
}

const omega::CorridorModel & corridor_model()
{
  static const omega::CorridorModel model = [] {
    omega::CorridorTrainingConfig cfg;
    omega::Rng rng(1);
    const auto t0 = std::chrono::steady_clock::now();
    auto m = omega::train_corridor_model(cfg, rng);
    std::printf(
      "     corridor model: %d scenes, %d epochs, T=%d, trained in %.1f s\n", cfg.scenes, cfg.training.epochs,
      cfg.schedule.steps, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return m;
  }();
  return model;
}

Outcome corridor_validity()
{
  const auto & model = corridor_model();
  const int n = 64;
  int wins = 0;
  int losses = 0;
  double valid_u = 0.0;
  double valid_g = 0.0;
  double col_u = 0.0;
  double col_g = 0.0;
  for (int seed = 0; seed < n; ++seed) {
    omega::CorridorSceneSpec spec;
    omega::Rng srng(1000 + seed);
    const auto ctx = omega::make_corridor_scene(spec, srng);
    auto guided = omega::SceneSamplerConfig::defaults();
    auto plain = guided;
    plain.guided = false;
    omega::Rng r1(seed);
    omega::Rng r2(seed);
    const auto u = omega::evaluate_scene(omega::generate_scene(ctx, model, plain, r1).scene);
    const auto g = omega::evaluate_scene(omega::generate_scene(ctx, model, guided, r2).scene);
    valid_u += u.valid;
    valid_g += g.valid;
    col_u += u.collision_rate;
    col_g += g.collision_rate;
    wins += g.collision_rate < u.collision_rate;
    losses += g.collision_rate > u.collision_rate;
  }
  const double p = omega::sign_test_p_value(wins, losses);
  return {valid_g >= valid_u && p < 0.05,
          fmt("64 paired scenes, 8 agents: valid %.3f -> %.3f; collision rate %.3f -> %.3f; sign test %d wins / %d "
              "losses, p = %.2e",
              valid_u / n, valid_g / n, col_u / n, col_g / n, wins, losses, p)};
}

Outcome adversarial_effect()
{
  const auto & model = corridor_model();
  const int n = 32;
  double lt3_free = 0.0;
  double lt3_adv = 0.0;
  int off_free = 0;
  int off_adv = 0;
  int agents = 0;
  int games = 0;
  int converged = 0;
  for (int seed = 0; seed < n; ++seed) {
    omega::CorridorSceneSpec spec;
    spec.map.kind = omega::MapKind::kMerge;
    spec.adversarial_layout = true;
    omega::Rng srng(5000 + seed);
    const auto ctx = omega::make_corridor_scene(spec, srng);
    auto adv = omega::SceneSamplerConfig::defaults();
    auto free = adv;
    free.mode = omega::GenerationMode::kFree;
    adv.mode = omega::GenerationMode::kAdversarial;
    omega::Rng r1(seed);
    omega::Rng r2(seed);
    const auto gf = omega::generate_scene(ctx, model, free, r1);
    const auto ga = omega::generate_scene(ctx, model, adv, r2);
    const auto rf = omega::evaluate_scene(gf.scene);
    const auto ra = omega::evaluate_scene(ga.scene);
    lt3_free += rf.ttc.lt3;
    lt3_adv += ra.ttc.lt3;
    for (size_t a = 0; a < rf.offroad.size(); ++a) {
      off_free += rf.offroad[a];
      off_adv += ra.offroad[a];
    }
    agents += static_cast<int>(rf.offroad.size());
    for (const auto & g : ga.games) {
      ++games;
      converged += g.converged;
    }
  }
  const double f = lt3_free / n;
  const double a = lt3_adv / n;
  const double of = static_cast<double>(off_free) / agents;
  const double oa = static_cast<double>(off_adv) / agents;
  return {a > f && oa - of <= 0.05,
          fmt("32 paired merge scenes: ego TTC<3s frame fraction %.3f (free) vs %.3f (adversarial); off-road %.3f -> "
              "%.3f (%+.1f pp); %d/%d games converged",
              f, a, of, oa, 100.0 * (oa - of), converged, games)};
}

Outcome metric_oracles()
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> len(1.0, 5.0);
  std::uniform_real_distribution<double> wid(0.5, 2.5);
  int agree = 0;
  int hits = 0;
  for (int k = 0; k < 1000; ++k) {
    const omega::OrientedBox a{pos(rng), pos(rng), ang(rng), len(rng), wid(rng)};
    const omega::OrientedBox b{pos(rng), pos(rng), ang(rng), len(rng), wid(rng)};
    omega::SceneTensor t(2, 1, 0.5);
    for (int i = 0; i < 2; ++i) {
      const auto & box = i == 0 ? a : b;
      t.set_valid(i, 0, true);
      t.at(i, 0, omega::kPx) = box.cx;
      t.at(i, 0, omega::kPy) = box.cy;
      t.at(i, 0, omega::kPsi) = box.heading;
      t.at(i, 0, omega::kLength) = box.length;
      t.at(i, 0, omega::kWidth) = box.width;
    }
    const bool verdict = omega::collision_report(t).any;
    hits += verdict;
    agree += verdict == omega::testing::dense_overlap_oracle(a, b);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sym = 0.0;
  double self = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> p(64);
    std::vector<double> q(64);
    for (size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng) < 0.3 ? 0.0 : u(rng);
      q[i] = u(rng) < 0.3 ? 0.0 : u(rng);
    }
    p[k % 64] += 0.1;
    q[(k * 7) % 64] += 0.1;
    const double d = omega::jsd(p, q);
    sym = std::max(sym, std::abs(d - omega::jsd(q, p)));
    self = std::max(self, std::abs(omega::jsd(p, p)));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  std::vector<double> e1(64, 0.0);
  std::vector<double> e2(64, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  const double disjoint = omega::jsd(e1, e2);
  const bool jsd_ok = sym <= 1e-12 && self <= 1e-12 && lo >= 0.0 && hi <= 1.0 && std::abs(disjoint - 1.0) <= 1e-12;
  return {agree == 1000 && jsd_ok,
          fmt("collision vs dense oracle %d/1000 (%d overlapping); JSD symmetry %.1e, self %.1e, range [%.3f, %.3f], "
              "disjoint %.15f",
              agree, hits, sym, self, lo, hi, disjoint)};
}

}  // namespace

int main()
{
  struct Criterion
  {
    const char * name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
    {"AC1  schedule identity", schedule_identity},
    {"AC2  KL closed form", kl_closed_form},
    {"AC3  trust region", trust_region},
    {"AC4  objective gradient", gradient_check},
    {"AC5  toy regimes", toy_regimes},
    {"AC6  sensitivity identity", sensitivity_identity},
    {"AC7  SE-IBR equilibrium", ibr_equilibrium},
    {"AC8  two-phase consistency", two_phase_consistency},
    {"AC9  corridor validity", corridor_validity},
    {"AC10 adversarial effect", adversarial_effect},
    {"AC11 metric oracles", metric_oracles},
  };
  int failed = 0;
  for (const auto & c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}

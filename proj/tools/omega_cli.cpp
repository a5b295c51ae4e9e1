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

#include "omega/omega.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

// ---------------------------------------------------------------------------
// Plumbing.

std::string hex_digest(const unsigned char * d, const unsigned n)
{
  std::ostringstream o;
  for (unsigned i = 0; i < n; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
  return o.str();
}

/// SHA-1 over "blob <size>\0<content>", as git names file contents.
std::string git_blob_hash(const std::string & content)
{
  const std::string head = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX * ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("cannot allocate digest context");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &n) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  return hex_digest(md, n);
}

/// Independent stream per (seed, index, purpose).
omega::Rng stream(const uint64_t seed, const uint64_t index, const uint64_t purpose)
{
  std::seed_seq seq{
    static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(index),
    static_cast<uint32_t>(index >> 32), static_cast<uint32_t>(purpose)};
  return omega::Rng(seq);
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// failure.
template <typename Fn>
void parallel_for(const int n, const int jobs, Fn && fn)
{
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto & t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string numbered(const std::string & stem, const int i, const std::string & ext)
{
  std::ostringstream o;
  o << stem << '_' << std::setw(4) << std::setfill('0') << i << ext;
  return o.str();
}

// ---------------------------------------------------------------------------
// Settings from the shared config file.

struct ToySettings
{
  std::string denoiser{"gmm_oracle"};
  int samples{5000};
  int train_samples{20000};
  double kappa{0.05};
  int t_low{0};
  uint64_t world_seed{0};
  double reward_scale{1.0};
  omega::TrainingConfig training;
  omega::ScheduleSpec schedule;
};

struct Settings
{
  ToySettings toy;
  omega::CorridorTrainingConfig corridor;
  omega::SceneSamplerConfig sampler;
  omega::MetricsConfig metrics;
  std::vector<omega::HistogramSpec> histograms;
  int gen_scenes{1};
  int goal_agent{-1};
  bool moving_only{false};
};

Settings load_settings(const omega::Config & c)
{
  Settings s;
  auto & t = s.toy;
  t.denoiser = c.get<std::string>("toy.denoiser", t.denoiser);
  if (t.denoiser != "gmm_oracle" && t.denoiser != "mlp") {
    throw std::invalid_argument("toy.denoiser must be gmm_oracle or mlp, got '" + t.denoiser + "'");
  }
  t.samples = c.get("toy.samples", t.samples);
  t.train_samples = c.get("toy.train_samples", t.train_samples);
  t.kappa = c.get("toy.kappa", t.kappa);
  t.t_low = c.get("toy.t_low", t.t_low);
  t.world_seed = c.get("toy.world_seed", t.world_seed);
  t.reward_scale = c.get("toy.reward_scale", t.reward_scale);
  omega::read_training(c, "toy_training", t.training);
  t.schedule.steps = c.get("toy.steps", t.schedule.steps);
  if (t.samples < 0 || t.train_samples < 1) throw std::invalid_argument("toy sample counts out of range");

  omega::read_schedule(c, s.corridor.schedule);
  omega::read_training(c, "training", s.corridor.training);
  s.corridor.scenes = c.get("training.scenes", s.corridor.scenes);
  omega::read_scene_spec(c, s.corridor.scene);
  s.sampler = omega::read_scene_sampler(c);
  omega::read_metrics(c, s.metrics);
  for (const auto st : {omega::Statistic::kSpeed, omega::Statistic::kNearestDist, omega::Statistic::kLateralDev,
                        omega::Statistic::kAngularDev}) {
    s.histograms.push_back(omega::read_histogram(c, st));
  }
  s.gen_scenes = c.get("gen.scenes", s.gen_scenes);
  s.goal_agent = c.get("gen.goal_agent", s.goal_agent);
  s.moving_only = c.get("eval.moving_only", s.moving_only);
  if (s.gen_scenes < 1) throw std::invalid_argument("gen.scenes must be >= 1");
  c.check_all_used();
  return s;
}

// ---------------------------------------------------------------------------
// Run manifest.

struct Run
{
  std::string command;
  std::string config_path;
  uint64_t seed{0};
  fs::path out;
  int jobs{1};
  omega::Config config;
  Settings settings;
  /// Name -> content hash of every input that shapes the outputs.
  std::vector<std::pair<std::string, std::string>> inputs;
  /// Command arguments outside the config.
  std::vector<std::string> params;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start{std::chrono::steady_clock::now()};

  void add_input_file(const fs::path & p) { inputs.emplace_back(p.string(), git_blob_hash(omega::read_text(p))); }

  void write(const fs::path & rel, const std::string & text)
  {
    omega::write_text_atomic(out / rel, text);
    outputs.push_back(rel.string());
  }

  void finish()
  {
    std::string doc = "command=" + command + "\nseed=" + std::to_string(seed) + "\n" + config.canonical();
    for (const auto & p : params) doc += "param " + p + "\n";
    for (const auto & [name, hash] : inputs) doc += "input " + name + " " + hash + "\n";
    json m = {
      {"command", command},
      {"config_path", config_path},
      {"seed", seed},
      {"output_directory", out.string()},
      {"input_hash", git_blob_hash(doc)},
      {"jobs", jobs},
      {"outputs", outputs},
      {"duration_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    omega::write_text_atomic(out / "manifest.json", m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// toy

json toy_world_json(const ToySettings & t)
{
  return {{"world_seed", t.world_seed}, {"reward_scale", t.reward_scale}, {"steps", t.schedule.steps}};
}

omega::ToyWorld toy_world(const ToySettings & t)
{
  omega::ToyWorldConfig wc;
  wc.reward_scale = t.reward_scale;
  return omega::make_toy_world(t.world_seed, wc);
}

void cmd_toy_train(Run & run)
{
  const auto & t = run.settings.toy;
  const auto world = toy_world(t);
  json model = {{"format", "omega.toy_model"}, {"version", 1}, {"denoiser", t.denoiser}, {"world", toy_world_json(t)}};
  if (t.denoiser == "mlp") {
    omega::Rng data_rng = stream(run.seed, 0, 1);
    const omega::Matrix data = omega::sample_mixture(world.target, t.train_samples, data_rng);
    omega::Rng rng = stream(run.seed, 0, 2);
    omega::TrainingLog log;
    const auto den = omega::train_denoiser(data, 1, t.schedule.build(), t.training, rng, &log);
    model["network"] = omega::denoiser_to_json(den);
    std::ostringstream loss;
    loss << "epoch,loss\n" << std::setprecision(17);
    for (size_t e = 0; e < log.epoch_loss.size(); ++e) loss << e << ',' << log.epoch_loss[e] << '\n';
    run.write("toy_training_loss.csv", loss.str());
  }
  run.write("toy_model.json", model.dump() + "\n");
}

void cmd_toy_sample(Run & run, const std::string & regime_name, const std::string & model_path)
{
  const auto & t = run.settings.toy;
  const auto regime = omega::parse_toy_regime(regime_name);
  run.params.push_back(std::string("regime=") + omega::to_string(regime));
  auto world = toy_world(t);
  std::unique_ptr<omega::Denoiser> den;
  std::string kind = t.denoiser;
  if (!model_path.empty()) {
    run.add_input_file(model_path);
    const json m = json::parse(omega::read_text(model_path));
    if (m.value("format", "") != "omega.toy_model") throw std::invalid_argument(model_path + ": not a toy model file");
    kind = m.at("denoiser").get<std::string>();
    if (m.at("world") != toy_world_json(t)) {
      throw std::invalid_argument(model_path + ": toy world or step count differs from the current config");
    }
    if (kind == "mlp") den = std::make_unique<omega::MlpDenoiser>(omega::denoiser_from_json(m.at("network")));
  }
  if (kind == "mlp" && !den) {
    throw std::invalid_argument("toy.denoiser=mlp needs a trained model: run 'toy train' and pass --model");
  }
  if (!den) den = std::make_unique<omega::GmmDenoiser>(world.target);
  const auto sched = t.schedule.build();
  auto cfg = omega::toy_sampler_config(regime, t.kappa);
  cfg.t_low = t.t_low;

  const int n = t.samples;
  omega::Matrix samples(2, n);
  std::vector<int> nonconverged(static_cast<size_t>(n), 0);
  parallel_for(n, run.jobs, [&](int i) {
    omega::RewardGuidance guidance(
      [&world](const omega::Vector & x) { return world.reward(x); },
      [&world](const omega::Vector & x) { return world.reward_gradient(x); });
    omega::GuidanceProvider * provider = regime == omega::ToyRegime::kUnguided ? nullptr : &guidance;
    omega::Rng rng = stream(run.seed, static_cast<uint64_t>(i), 3);
    const auto ctx = omega::InpaintingContext::none(2, 1);
    const auto r = omega::sample_two_phase(*den, sched, ctx, cfg, provider, rng);
    samples.col(i) = r.x0.col(0);
    nonconverged[static_cast<size_t>(i)] = r.diagnostics.nonconverged;
  });

  const auto stats = omega::mode_stats(world.target, samples);
  std::ostringstream csv;
  csv << std::setprecision(17) << "x,y,mode\n";
  for (int i = 0; i < n; ++i) {
    csv << samples(0, i) << ',' << samples(1, i) << ',' << omega::assign_mode(world.target, samples.col(i)) << '\n';
  }
  run.write("toy_samples.csv", csv.str());
  json summary = {
    {"regime", omega::to_string(regime)},
    {"denoiser", kind},
    {"samples", n},
    {"mode_mass", stats.mass},
    {"drift_fraction", stats.drift_fraction},
    {"within_fraction", stats.within_fraction},
    {"guided_mode", world.guided_mode()},
    {"guided_mode_mass", stats.mass.empty() ? 0.0 : stats.mass[static_cast<size_t>(world.guided_mode())]},
    {"nonconverged_solves", std::accumulate(nonconverged.begin(), nonconverged.end(), 0)}};
  run.write("toy_summary.json", summary.dump(2) + "\n");
  run.write("toy_scatter.svg", omega::render_toy_svg(world, samples));
  std::cout << summary.dump() << '\n';
}

// ---------------------------------------------------------------------------
// gen

omega::CorridorModel corridor_model(Run & run, const std::string & model_path)
{
  if (!model_path.empty()) {
    if (!fs::exists(model_path)) {
      throw std::invalid_argument("model file " + model_path + " does not exist; omit --model to train one");
    }
    run.add_input_file(model_path);
    return omega::load_corridor_model(model_path);
  }
  omega::Rng rng = stream(run.seed, 0, 4);
  std::cerr << "training corridor model (" << run.settings.corridor.scenes << " scenes)\n";
  auto model = omega::train_corridor_model(run.settings.corridor, rng);
  run.write("corridor_model.json", omega::corridor_model_to_json(model).dump() + "\n");
  return model;
}

void cmd_gen(Run & run, const std::string & model_path, const std::string & context_path)
{
  const auto & st = run.settings;
  const auto model = corridor_model(run, model_path);
  std::optional<omega::Scene> fixed_context;
  if (!context_path.empty()) {
    run.add_input_file(context_path);
    fixed_context = omega::load_scene(context_path);
  }
  const int n = st.gen_scenes;
  std::vector<omega::GeneratedScene> results(static_cast<size_t>(n));
  parallel_for(n, run.jobs, [&](int i) {
    omega::Scene ctx;
    if (fixed_context) {
      ctx = *fixed_context;
    } else {
      omega::Rng srng = stream(run.seed, static_cast<uint64_t>(i), 5);
      ctx = omega::make_corridor_scene(st.corridor.scene, srng);
    }
    if (st.sampler.mode == omega::GenerationMode::kGoal) {
      const int agent = st.goal_agent >= 0 ? st.goal_agent : ctx.ego_index;
      if (agent >= ctx.tensor.num_agents()) {
        throw std::invalid_argument("gen.goal_agent " + std::to_string(agent) + " out of range");
      }
      const int last = ctx.tensor.num_steps() - 1;
      const auto & t = ctx.tensor;
      ctx = omega::set_goal_condition(
        ctx, agent, {t.at(agent, last, omega::kPx), t.at(agent, last, omega::kPy), t.at(agent, last, omega::kPsi),
                     t.at(agent, last, omega::kSpeed)});
    }
    omega::Rng rng = stream(run.seed, static_cast<uint64_t>(i), 6);
    results[static_cast<size_t>(i)] = omega::generate_scene(ctx, model, st.sampler, rng);
  });

  std::vector<omega::SceneReport> reports;
  for (int i = 0; i < n; ++i) {
    const auto & g = results[static_cast<size_t>(i)];
    run.write(numbered("scene", i, ".json"), omega::scene_to_json(g.scene).dump(1) + "\n");
    std::ostringstream diag;
    diag << std::setprecision(10);
    g.diagnostics.write_csv(diag);
    run.write(numbered("scene", i, "_diagnostics.csv"), diag.str());
    run.write(numbered("scene", i, ".svg"), omega::render_scene_svg(g.scene));
    if (!g.games.empty()) {
      std::ostringstream games;
      games << std::setprecision(10) << "game,";
      for (size_t k = 0; k < g.games.size(); ++k) {
        std::ostringstream one;
        one << std::setprecision(10);
        g.games[k].write_csv(one, k == 0);
        std::istringstream lines(one.str());
        std::string line;
        bool first = k == 0;
        while (std::getline(lines, line)) {
          if (first) {
            games << line << '\n';
            first = false;
          } else {
            games << k << ',' << line << '\n';
          }
        }
      }
      run.write(numbered("scene", i, "_games.csv"), games.str());
    }
    reports.push_back(omega::evaluate_scene(g.scene, st.metrics, numbered("scene", i, "")));
  }
  std::ostringstream csv;
  csv << std::setprecision(10);
  omega::write_report_csv(csv, reports);
  run.write("metrics.csv", csv.str());
}

// ---------------------------------------------------------------------------
// eval

std::vector<fs::path> expand_scene_paths(const std::vector<std::string> & args)
{
  std::vector<fs::path> out;
  for (const auto & a : args) {
    const fs::path p(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto & e : fs::directory_iterator(p)) {
        if (e.path().extension() != ".json") continue;
        json j;
        try {
          j = json::parse(omega::read_text(e.path()));
        } catch (const json::exception & ex) {
          throw std::invalid_argument(e.path().string() + ": " + ex.what());
        }
        if (j.is_object() && j.contains("agents")) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw std::invalid_argument("scene path " + a + " does not exist");
    }
  }
  if (out.empty()) throw std::invalid_argument("no scene files found");
  return out;
}

std::vector<omega::Scene> load_scenes(Run & run, const std::vector<fs::path> & paths)
{
  std::vector<omega::Scene> scenes(paths.size());
  parallel_for(static_cast<int>(paths.size()), run.jobs, [&](int i) {
    scenes[static_cast<size_t>(i)] = omega::load_scene(paths[static_cast<size_t>(i)]);
  });
  for (const auto & p : paths) run.add_input_file(p);
  return scenes;
}

void cmd_eval(Run & run, const std::vector<std::string> & inputs, const std::vector<std::string> & reference)
{
  const auto & st = run.settings;
  const auto paths = expand_scene_paths(inputs);
  const auto scenes = load_scenes(run, paths);
  std::vector<omega::SceneReport> reports(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), run.jobs, [&](int i) {
    const auto k = static_cast<size_t>(i);
    reports[k] = omega::evaluate_scene(scenes[k], st.metrics, paths[k].stem().string());
  });
  std::ostringstream csv;
  csv << std::setprecision(10);
  omega::write_report_csv(csv, reports);
  run.write("metrics.csv", csv.str());

  if (reference.empty()) return;
  const auto ref_paths = expand_scene_paths(reference);
  const auto ref = load_scenes(run, ref_paths);
  std::ostringstream jcsv;
  jcsv << std::setprecision(17) << "statistic,jsd\n";
  for (const auto & spec : st.histograms) {
    auto gather = [&](const std::vector<omega::Scene> & set) {
      std::vector<double> v;
      for (const auto & s : set) {
        const auto x = omega::collect_statistic(s, spec.statistic, st.moving_only);
        v.insert(v.end(), x.begin(), x.end());
      }
      return omega::make_histogram(v, spec);
    };
    const auto a = gather(scenes);
    const auto b = gather(ref);
    const std::string name = omega::to_string(spec.statistic);
    std::ostringstream ha;
    std::ostringstream hb;
    a.write_csv(ha);
    b.write_csv(hb);
    run.write("hist_" + name + "_eval.csv", ha.str());
    run.write("hist_" + name + "_reference.csv", hb.str());
    const bool empty_a = std::accumulate(a.counts.begin(), a.counts.end(), 0.0) == 0.0;
    const bool empty_b = std::accumulate(b.counts.begin(), b.counts.end(), 0.0) == 0.0;
    jcsv << name << ',';
    if (empty_a || empty_b) {
      jcsv << "nan\n";
    } else {
      jcsv << omega::jsd(a, b) << '\n';
    }
  }
  run.write("jsd.csv", jcsv.str());
}

void print_error(const std::string & command, const std::string & type, const std::string & message)
{
  const json line = {{"error", {{"command", command}, {"type", type}, {"message", message}}}};
  std::cerr << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Optimization-guided diffusion sampling for traffic scenes"};
  app.require_subcommand(1);
  std::string config_path;
  uint64_t seed = 0;
  std::string out = "out";
  int jobs = 1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--jobs", jobs, "Parallel workers")->check(CLI::Range(1, 1024));
  app.add_option("--set", overrides, "Config override section.key=value (repeatable)");

  auto * toy = app.add_subcommand("toy", "Planar five-mode toy experiment");
  toy->require_subcommand(1);
  auto * toy_train = toy->add_subcommand("train", "Fit the toy denoiser, or select the analytic one");
  std::string toy_denoiser;
  toy_train->add_option("--denoiser", toy_denoiser, "gmm_oracle or mlp");
  auto * toy_sample = toy->add_subcommand("sample", "Draw samples under one regime");
  std::string regime = "omega";
  std::string toy_model;
  int toy_samples = -1;
  toy_sample->add_option("--regime", regime, "unguided, reward_only or omega");
  toy_sample->add_option("--model", toy_model, "Model file from 'toy train'");
  toy_sample->add_option("--samples", toy_samples, "Sample count");

  auto * gen = app.add_subcommand("gen", "Generate corridor scenes");
  std::string mode;
  std::string model_path;
  std::string context_path;
  int scenes = -1;
  double kappa = -1.0;
  bool unguided = false;
  gen->add_option("--mode", mode, "free, goal or adversarial");
  gen->add_option("--model", model_path, "Corridor model JSON; trained in-process when omitted");
  gen->add_option("--context", context_path, "Context scene JSON; synthetic contexts when omitted");
  gen->add_option("--scenes", scenes, "Number of scenes");
  gen->add_option("--kappa", kappa, "KL budget for both phases");
  gen->add_flag("--unguided", unguided, "Disable guidance");

  auto * eval = app.add_subcommand("eval", "Evaluate scene files");
  std::vector<std::string> inputs;
  std::vector<std::string> reference;
  eval->add_option("scenes", inputs, "Scene files or directories")->required();
  eval->add_option("--reference", reference, "Second scene set for JSD");

  std::string command = "omega";
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    if (code != 0) print_error(command, "usage", e.what());
    return code;
  }

  try {
    Run run;
    run.seed = seed;
    run.out = out;
    run.jobs = jobs;
    run.config_path = config_path;
    if (!config_path.empty()) {
      run.config = omega::Config::from_file(config_path);
    }
    for (const auto & o : overrides) run.config.apply_override(o);
    if (*toy_train) {
      command = "toy train";
      if (!toy_denoiser.empty()) run.config.set("toy.denoiser", toy_denoiser);
    } else if (*toy_sample) {
      command = "toy sample";
      if (toy_samples >= 0) run.config.set("toy.samples", std::to_string(toy_samples));
    } else if (*gen) {
      command = "gen";
      if (!mode.empty()) run.config.set("gen.mode", mode);
      if (scenes >= 0) run.config.set("gen.scenes", std::to_string(scenes));
      if (kappa >= 0.0) {
        std::ostringstream k;
        k << std::setprecision(17) << kappa;
        run.config.set("sampler.kappa", k.str());
      }
      if (unguided) run.config.set("gen.guided", "false");
    } else {
      command = "eval";
    }
    run.command = command;
    run.settings = load_settings(run.config);
    fs::create_directories(run.out);

    if (*toy_train) {
      cmd_toy_train(run);
    } else if (*toy_sample) {
      cmd_toy_sample(run, regime, toy_model);
    } else if (*gen) {
      cmd_gen(run, model_path, context_path);
    } else {
      cmd_eval(run, inputs, reference);
    }
    run.finish();
  } catch (const std::invalid_argument & e) {
    print_error(command, "invalid_argument", e.what());
    return 2;
  } catch (const std::exception & e) {
    print_error(command, "runtime_error", e.what());
    return 1;
  }
  return 0;
}

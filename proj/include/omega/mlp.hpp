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

#ifndef OMEGA__MLP_HPP_
#define OMEGA__MLP_HPP_

#include "omega/diffusion.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace omega
{

/// Sinusoidal embedding of a diffusion step.
inline void time_embedding(const int t, const int dim, double * out)
{
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(1000.0) * static_cast<double>(i) / std::max(half, 1));
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  if (dim % 2 == 1) out[dim - 1] = static_cast<double>(t) / 1000.0;
}

/// Fully connected SiLU network, parameters stored as (W, b) per layer.
class Mlp
{
public:
  struct Layer
  {
    Matrix weight;
    Vector bias;
  };

  Mlp() = default;

  Mlp(const std::vector<int> & sizes, Rng & rng)
  {
    if (sizes.size() < 2) throw std::invalid_argument("mlp needs input and output sizes");
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int fan_in = sizes[i];
      const int fan_out = sizes[i + 1];
      const bool last = i + 2 == sizes.size();
      const double bound = (last ? 0.5 : 1.0) * std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> uni(-bound, bound);
      Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = uni(rng);
      }
      layers_.push_back(std::move(layer));
    }
  }

  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  const std::vector<Layer> & layers() const { return layers_; }
  std::vector<Layer> & layers() { return layers_; }
  int input_size() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().weight.rows()); }

  static double sigmoid(const double x) { return 1.0 / (1.0 + std::exp(-x)); }

  /// Batched forward pass; columns of `input` are samples.
  Matrix forward(const Matrix & input) const
  {
    Matrix a = input;
    for (size_t i = 0; i < layers_.size(); ++i) {
      Matrix h = (layers_[i].weight * a).colwise() + layers_[i].bias;
      if (i + 1 < layers_.size()) {
        a = h.unaryExpr([](double v) { return v * sigmoid(v); });
      } else {
        a = std::move(h);
      }
    }
    return a;
  }

  /// Forward and backward for a masked mean-squared loss. Returns the loss and
  /// fills `grads` with d loss / d parameters.
  double loss_and_gradient(
    const Matrix & input, const Matrix & target, const Matrix & mask,
    std::vector<Layer> & grads) const
  {
    const size_t n_layers = layers_.size();
    std::vector<Matrix> pre(n_layers);
    std::vector<Matrix> act(n_layers + 1);
    act[0] = input;
    for (size_t i = 0; i < n_layers; ++i) {
      pre[i] = (layers_[i].weight * act[i]).colwise() + layers_[i].bias;
      if (i + 1 < n_layers) {
        act[i + 1] = pre[i].unaryExpr([](double v) { return v * sigmoid(v); });
      } else {
        act[i + 1] = pre[i];
      }
    }
    const double count = std::max(mask.sum(), 1.0);
    const Matrix diff = (act[n_layers] - target).cwiseProduct(mask);
    const double loss = diff.squaredNorm() / count;

    grads.resize(n_layers);
    Matrix delta = 2.0 * diff / count;
    for (size_t li = n_layers; li-- > 0;) {
      grads[li].weight = delta * act[li].transpose();
      grads[li].bias = delta.rowwise().sum();
      if (li == 0) break;
      Matrix back = layers_[li].weight.transpose() * delta;
      const Matrix & h = pre[li - 1];
      delta = back.binaryExpr(h, [](double g, double v) {
        const double s = sigmoid(v);
        return g * s * (1.0 + v * (1.0 - s));
      });
    }
    return loss;
  }

private:
  std::vector<Layer> layers_;
};

/// Adam with a cosine learning-rate decay.
class AdamOptimizer
{
public:
  AdamOptimizer(const Mlp & net, const double learning_rate, const long total_steps)
  : lr_(learning_rate), total_steps_(std::max(total_steps, 1L))
  {
    for (const auto & layer : net.layers()) {
      m_.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                    Vector::Zero(layer.bias.size())});
      v_.push_back(m_.back());
    }
  }

  void step(Mlp & net, const std::vector<Mlp::Layer> & grads)
  {
    ++t_;
    const double progress = std::min(1.0, static_cast<double>(t_) / total_steps_);
    const double lr = lr_ * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    auto & layers = net.layers();
    for (size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].weight, grads[i].weight, m_[i].weight, v_[i].weight, lr, c1, c2);
      update(layers[i].bias, grads[i].bias, m_[i].bias, v_[i].bias, lr, c1, c2);
    }
  }

private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;

  template <class P>
  static void update(P & param, const P & grad, P & m, P & v, double lr, double c1, double c2)
  {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
  }

  double lr_;
  long total_steps_;
  long t_{0};
  std::vector<Mlp::Layer> m_;
  std::vector<Mlp::Layer> v_;
};

/// epsilon-prediction MLP with one sinusoidal time embedding per frame, so
/// nonuniform per-frame step vectors are valid inputs.
class MlpDenoiser : public Denoiser
{
public:
  MlpDenoiser() = default;

  MlpDenoiser(Mlp net, const int frames, const int channels, const int embedding_dim)
  : net_(std::move(net)), frames_(frames), channels_(channels), embedding_dim_(embedding_dim)
  {
    if (net_.input_size() != input_size() || net_.output_size() != frames_ * channels_) {
      throw std::invalid_argument("mlp layer sizes do not match the denoiser layout");
    }
  }

  using Denoiser::predict_clean;
  using Denoiser::predict_noise;

  std::string_view kind() const override { return "mlp"; }
  int frames() const override { return frames_; }
  int channels() const override { return channels_; }
  int time_embedding_dim() const { return embedding_dim_; }
  int input_size() const { return frames_ * channels_ + frames_ * embedding_dim_; }
  const Mlp & network() const { return net_; }
  Mlp & network() { return net_; }

  nlohmann::json & metadata() { return metadata_; }
  const nlohmann::json & metadata() const { return metadata_; }

  void fill_input(const Vector & x_t, std::span<const int> frame_steps, double * col) const
  {
    const auto d = static_cast<Eigen::Index>(frames_) * channels_;
    for (Eigen::Index i = 0; i < d; ++i) col[i] = x_t(i);
    for (int f = 0; f < frames_; ++f) {
      time_embedding(frame_steps[f], embedding_dim_, col + d + f * embedding_dim_);
    }
  }

  Vector predict_noise(
    const Vector & x_t, std::span<const int> frame_steps,
    const DiffusionSchedule & sched) const override
  {
    (void)sched;
    if (x_t.size() != dim() || static_cast<int>(frame_steps.size()) != frames_) {
      throw std::invalid_argument("mlp denoiser: input shape mismatch");
    }
    Matrix input(input_size(), 1);
    fill_input(x_t, frame_steps, input.data());
    Vector eps = net_.forward(input).col(0);
    // Clean frames carry no noise to predict.
    for (int f = 0; f < frames_; ++f) {
      if (frame_steps[f] == 0) eps.segment(static_cast<Eigen::Index>(f) * channels_, channels_).setZero();
    }
    return eps;
  }

private:
  Mlp net_;
  int frames_{1};
  int channels_{1};
  int embedding_dim_{16};
  nlohmann::json metadata_ = nlohmann::json::object();
};

struct TrainingConfig
{
  int epochs{60};
  int batch_size{256};
  double learning_rate{2e-3};
  std::vector<int> hidden{128, 128, 128};
  int time_embedding_dim{16};
  /// Fraction of training samples drawn with nonuniform per-frame steps.
  double nonuniform_fraction{0.0};
};

struct TrainingLog
{
  std::vector<double> epoch_loss;
};

/// Draws a per-frame step pattern: uniform, a rolling prefix of clean
/// frames, or independent levels per frame.
inline void sample_frame_steps(
  std::vector<int> & steps, const int max_step, const double nonuniform_fraction, Rng & rng)
{
  std::uniform_int_distribution<int> step_dist(1, max_step);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int frames = static_cast<int>(steps.size());
  const int t = step_dist(rng);
  std::fill(steps.begin(), steps.end(), t);
  if (frames == 1 || uni(rng) >= nonuniform_fraction) return;
  if (uni(rng) < 0.7) {
    std::uniform_int_distribution<int> prefix_dist(1, frames - 1);
    const int prefix = prefix_dist(rng);
    for (int f = 0; f < prefix; ++f) steps[f] = 0;
  } else {
    for (int & s : steps) s = uni(rng) < 0.2 ? 0 : step_dist(rng);
    if (std::all_of(steps.begin(), steps.end(), [](int s) { return s == 0; })) steps.back() = t;
  }
}

/// Fits an MLP denoiser to `dataset` (one sample per column) by minimizing
/// the epsilon-prediction error. Clean frames (step 0) are excluded from the
/// loss.
inline MlpDenoiser train_denoiser(
  const Matrix & dataset, const int frames, const DiffusionSchedule & sched,
  const TrainingConfig & config, Rng & rng, TrainingLog * log = nullptr,
  const std::function<void(int, double)> & on_epoch = {})
{
  if (dataset.cols() == 0) throw std::invalid_argument("train_denoiser: empty dataset");
  if (frames < 1 || dataset.rows() % frames != 0) {
    throw std::invalid_argument("train_denoiser: dataset rows not divisible by frame count");
  }
  if (config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("train_denoiser: invalid training hyperparameters");
  }
  const int channels = static_cast<int>(dataset.rows()) / frames;
  std::vector<int> sizes{frames * channels + frames * config.time_embedding_dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(frames * channels);
  MlpDenoiser denoiser(Mlp(sizes, rng), frames, channels, config.time_embedding_dim);

  const auto n = dataset.cols();
  const int batch = static_cast<int>(std::min<Eigen::Index>(config.batch_size, n));
  const long batches_per_epoch = (n + batch - 1) / batch;
  AdamOptimizer adam(denoiser.network(), config.learning_rate, batches_per_epoch * config.epochs);

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> steps(static_cast<size_t>(frames));
  std::vector<Mlp::Layer> grads;
  const auto d = dataset.rows();
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long seen = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const auto count = std::min<Eigen::Index>(batch, n - start);
      Matrix input(denoiser.input_size(), count);
      Matrix target(d, count);
      Matrix mask(d, count);
      for (Eigen::Index j = 0; j < count; ++j) {
        sample_frame_steps(steps, sched.steps(), config.nonuniform_fraction, rng);
        Vector eps(d);
        for (Eigen::Index i = 0; i < d; ++i) eps(i) = normal(rng);
        const Vector x_t = forward_sample(dataset.col(order[start + j]), steps, channels, eps, sched);
        denoiser.fill_input(x_t, steps, input.col(j).data());
        target.col(j) = eps;
        for (int f = 0; f < frames; ++f) {
          mask.col(j).segment(static_cast<Eigen::Index>(f) * channels, channels)
            .setConstant(steps[f] == 0 ? 0.0 : 1.0);
        }
      }
      const double loss = denoiser.network().loss_and_gradient(input, target, mask, grads);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
          "train_denoiser: non-finite loss at epoch " + std::to_string(epoch) +
          "; lower the learning rate");
      }
      adam.step(denoiser.network(), grads);
      epoch_loss += loss * count;
      seen += count;
    }
    epoch_loss /= std::max(seen, 1L);
    if (log) log->epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return denoiser;
}

/// Mean squared epsilon error of `denoiser` on fresh noise draws at uniform
/// random steps.
inline double epsilon_mse(
  const Denoiser & denoiser, const Matrix & samples, const DiffusionSchedule & sched, Rng & rng)
{
  std::uniform_int_distribution<int> step_dist(1, sched.steps());
  double total = 0.0;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const int t = step_dist(rng);
    const Vector eps = standard_normal(rng, samples.rows());
    const Vector x_t = forward_sample(samples.col(j), t, eps, sched);
    total += (denoiser.predict_noise(x_t, t, sched) - eps).squaredNorm() / samples.rows();
  }
  return total / std::max<Eigen::Index>(samples.cols(), 1);
}

// ---------------------------------------------------------------------------
// Parameter files: JSON with an explicit layout header.

inline constexpr int kDenoiserFormatVersion = 1;

inline nlohmann::json denoiser_to_json(const MlpDenoiser & denoiser)
{
  nlohmann::json j;
  j["format"] = "omega.denoiser";
  j["version"] = kDenoiserFormatVersion;
  nlohmann::json layout;
  layout["kind"] = "mlp";
  layout["frames"] = denoiser.frames();
  layout["channels"] = denoiser.channels();
  layout["time_embedding_dim"] = denoiser.time_embedding_dim();
  layout["activation"] = "silu";
  std::vector<int> sizes{denoiser.network().input_size()};
  for (const auto & layer : denoiser.network().layers()) sizes.push_back(static_cast<int>(layer.weight.rows()));
  layout["layer_sizes"] = sizes;
  layout["weight_order"] = "row_major";
  j["layout"] = layout;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto & layer : denoiser.network().layers()) {
    std::vector<double> w;
    w.reserve(static_cast<size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    }
    layers.push_back({{"weight", w}, {"bias", std::vector<double>(layer.bias.begin(), layer.bias.end())}});
  }
  j["layers"] = layers;
  j["metadata"] = denoiser.metadata();
  return j;
}

inline MlpDenoiser denoiser_from_json(const nlohmann::json & j)
{
  if (j.value("format", "") != "omega.denoiser") {
    throw std::runtime_error("not an omega denoiser parameter file");
  }
  if (j.value("version", 0) != kDenoiserFormatVersion) {
    throw std::runtime_error("unsupported denoiser file version " + std::to_string(j.value("version", 0)));
  }
  const auto & layout = j.at("layout");
  if (layout.at("kind") != "mlp") throw std::runtime_error("denoiser kind must be mlp");
  const auto sizes = layout.at("layer_sizes").get<std::vector<int>>();
  const auto & layers_json = j.at("layers");
  if (layers_json.size() + 1 != sizes.size()) throw std::runtime_error("layer count mismatch");
  std::vector<Mlp::Layer> layers;
  for (size_t i = 0; i < layers_json.size(); ++i) {
    const auto w = layers_json[i].at("weight").get<std::vector<double>>();
    const auto b = layers_json[i].at("bias").get<std::vector<double>>();
    const int rows = sizes[i + 1];
    const int cols = sizes[i];
    if (w.size() != static_cast<size_t>(rows) * cols || b.size() != static_cast<size_t>(rows)) {
      throw std::runtime_error("layer " + std::to_string(i) + " has wrong parameter count");
    }
    Mlp::Layer layer{Matrix(rows, cols), Vector(rows)};
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) layer.weight(r, c) = w[static_cast<size_t>(r) * cols + c];
      layer.bias(r) = b[r];
    }
    layers.push_back(std::move(layer));
  }
  MlpDenoiser out(
    Mlp(std::move(layers)), layout.at("frames").get<int>(), layout.at("channels").get<int>(),
    layout.at("time_embedding_dim").get<int>());
  if (j.contains("metadata")) out.metadata() = j.at("metadata");
  return out;
}

inline void save_denoiser(const MlpDenoiser & denoiser, const std::filesystem::path & path)
{
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << denoiser_to_json(denoiser).dump();
  }
  std::filesystem::rename(tmp, path);
}

inline MlpDenoiser load_denoiser(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read denoiser file " + path.string());
  return denoiser_from_json(nlohmann::json::parse(in));
}

}  // namespace omega

#endif  // OMEGA__MLP_HPP_

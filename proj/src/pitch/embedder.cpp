// Copyright 2026 The Timbre Paint Authors
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

#include "timbre/pitch/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "timbre/errors.hpp"
#include "timbre/nn/ops.hpp"

namespace timbre::pitch {

namespace {

constexpr double kSampleRate = 16000.0;
// Per-frame standardization floor (variance units).
constexpr double kFrameNormEps = 1e-4;

std::string conv_name(std::size_t i, const char* part) { return "conv" + std::to_string(i) + "." + part; }

template <typename T>
nn::Tensor<T> gaussian(const nn::Shape& shape, double std_dev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std_dev);
  nn::Tensor<T> t(shape);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

void EmbedderConfig::validate() const {
  if (kernels.empty()) throw InputError("embedder: at least one block is required");
  if (tap_block == 0 || tap_block > kernels.size()) throw InputError("embedder: tap block out of range");
  if (frame == 0 || frame % (std::size_t{1} << kernels.size()) != 0) {
    throw InputError("embedder: frame " + std::to_string(frame) + " is not divisible by 2^" +
                     std::to_string(kernels.size()));
  }
  for (std::size_t k : kernels) {
    if (k % 2 == 0) throw InputError("embedder: kernel sizes must be odd");
  }
  if (hop == 0 || channels == 0 || bins < 5) throw InputError("embedder: hop, channels and bins must be positive");
  if (!(first_bin_hz > 0.0) || !(cents_per_bin > 0.0)) throw InputError("embedder: invalid bin grid");
}

double frequency_to_bin(const EmbedderConfig& config, double hz) {
  return 1200.0 * std::log2(hz / config.first_bin_hz) / config.cents_per_bin;
}

double bin_to_frequency(const EmbedderConfig& config, double bin) {
  return config.first_bin_hz * std::exp2(bin * config.cents_per_bin / 1200.0);
}

template <typename T>
PitchEmbedder<T>::PitchEmbedder(EmbedderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < config_.blocks(); ++i) {
    const std::size_t k = config_.kernels[i];
    params_.add(conv_name(i, "weight"), gaussian<T>({config_.channels, in, k}, std::sqrt(2.0 / double(in * k)), rng));
    params_.add(conv_name(i, "bias"), nn::Tensor<T>({config_.channels}));
    in = config_.channels;
  }
  const std::size_t flat = config_.channels * (config_.frame >> config_.blocks());
  params_.add("classifier.weight", gaussian<T>({config_.bins, flat}, std::sqrt(1.0 / double(flat)), rng));
  params_.add("classifier.bias", nn::Tensor<T>({config_.bins}));
}

template <typename T>
nn::Var<T> PitchEmbedder<T>::features(const nn::Var<T>& frames, std::size_t blocks) const {
  auto h = nn::instance_norm(frames, static_cast<T>(kFrameNormEps));
  for (std::size_t i = 0; i < blocks; ++i) {
    h = nn::conv1d(h, params_.get(conv_name(i, "weight")), params_.get(conv_name(i, "bias")));
    h = nn::max_pool1d(nn::relu(h), 2);
  }
  return h;
}

template <typename T>
nn::Var<T> PitchEmbedder<T>::embed(const nn::Var<T>& audio) const {
  if (audio.shape().size() != 3 || audio.dim(1) != 1) {
    throw InputError("embed: expects (batch, 1, time) audio, got " + nn::to_string(audio.shape()));
  }
  if (audio.dim(2) < config_.frame) {
    throw InputError("embed: " + std::to_string(audio.dim(2)) + " samples is shorter than one " +
                     std::to_string(config_.frame) + "-sample frame");
  }
  return features(nn::frame_signal(audio, config_.frame, config_.hop), config_.tap_block);
}

template <typename T>
nn::Var<T> PitchEmbedder<T>::logits(const nn::Var<T>& frames) const {
  auto h = features(frames, config_.blocks());
  h = nn::reshape(h, {h.dim(0), h.dim(1) * h.dim(2)});
  return nn::linear(h, params_.get("classifier.weight"), params_.get("classifier.bias"));
}

template <typename T>
std::size_t PitchEmbedder<T>::predict_bin(const std::vector<double>& frame) const {
  if (frame.size() != config_.frame) throw InputError("predict_bin: frame must hold " + std::to_string(config_.frame) + " samples");
  nn::NoGradGuard guard;
  const auto scores = logits(nn::Var<T>(nn::Tensor<T>({1, 1, frame.size()}, std::vector<T>(frame.begin(), frame.end()))));
  const auto& v = scores.value().storage();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

template <typename T>
template <typename U>
PitchEmbedder<U> PitchEmbedder<T>::cast() const {
  PitchEmbedder<U> out;
  out.config_ = config_;
  for (const auto& e : params_.entries()) out.params_.add(e.name, e.param.value().template cast<U>());
  return out;
}

template <typename T>
void PitchEmbedder<T>::save(trainer::Checkpoint& ckpt) const {
  ckpt.put_u64("embedder/frame", config_.frame);
  ckpt.put_u64("embedder/hop", config_.hop);
  ckpt.put_u64("embedder/channels", config_.channels);
  ckpt.put_u64s("embedder/kernels", {config_.kernels.begin(), config_.kernels.end()});
  ckpt.put_u64("embedder/tap_block", config_.tap_block);
  ckpt.put_u64("embedder/bins", config_.bins);
  ckpt.put_scalar("embedder/first_bin_hz", config_.first_bin_hz);
  ckpt.put_scalar("embedder/cents_per_bin", config_.cents_per_bin);
  trainer::store_parameters(ckpt, "embedder", params_, false);
}

template <typename T>
PitchEmbedder<T> PitchEmbedder<T>::load(const trainer::Checkpoint& ckpt) {
  EmbedderConfig config;
  config.frame = ckpt.u64("embedder/frame");
  config.hop = ckpt.u64("embedder/hop");
  config.channels = ckpt.u64("embedder/channels");
  const auto& kernels = ckpt.u64s("embedder/kernels").storage();
  config.kernels.assign(kernels.begin(), kernels.end());
  config.tap_block = ckpt.u64("embedder/tap_block");
  config.bins = ckpt.u64("embedder/bins");
  config.first_bin_hz = ckpt.scalar("embedder/first_bin_hz");
  config.cents_per_bin = ckpt.scalar("embedder/cents_per_bin");
  PitchEmbedder<T> out(config, 0);
  trainer::load_parameters(ckpt, "embedder", out.params_);
  return out;
}

std::vector<double> synthetic_pitch_example(double f0, std::size_t frame, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> harmonics(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int count = harmonics(rng);
  std::vector<double> x(frame, 0.0);
  for (int k = 1; k <= count; ++k) {
    const double amplitude = 0.1 + 0.9 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    if (k * f0 >= 0.475 * kSampleRate) continue;
    const double w = 2.0 * std::numbers::pi * k * f0 / kSampleRate;
    for (std::size_t n = 0; n < frame; ++n) x[n] += amplitude * std::sin(w * double(n) + phase);
  }
  const double power = std::inner_product(x.begin(), x.end(), x.begin(), 0.0) / double(frame);
  const double gain = std::exp(std::log(0.02) * unit(rng)) / std::sqrt(std::max(power, 1e-12));
  const double snr_db = 10.0 + 30.0 * unit(rng);
  const double noise_std = std::pow(10.0, -snr_db / 20.0);
  for (double& v : x) v = gain * (v + std::sqrt(power) * noise_std * noise(rng));
  return x;
}

namespace {

double sample_frequency(std::mt19937_64& rng, double min_hz, double max_hz) {
  std::uniform_real_distribution<double> u(std::log(min_hz), std::log(max_hz));
  return std::exp(u(rng));
}

}  // namespace

PitchEmbedder<float> train_pitch_embedder(const EmbedderTrainOptions& options, EmbedderTrainReport* report,
                                          const std::function<void(std::size_t, double)>& progress) {
  const auto& config = options.config;
  PitchEmbedder<float> model(config, options.seed);
  std::mt19937_64 rng(options.seed ^ 0x5eedULL);
  const double sigma_bins = options.target_std_cents / config.cents_per_bin;
  double loss_value = 0.0;
  for (std::size_t it = 0; it < options.iterations; ++it) {
    nn::Tensor<float> frames({options.batch, 1, config.frame});
    nn::Tensor<float> target({options.batch, config.bins});
    for (std::size_t b = 0; b < options.batch; ++b) {
      const double f0 = sample_frequency(rng, options.min_hz, options.max_hz);
      const auto x = synthetic_pitch_example(f0, config.frame, rng);
      std::copy(x.begin(), x.end(), frames.data() + b * config.frame);
      const double center = frequency_to_bin(config, f0);
      double total = 0.0;
      for (std::size_t k = 0; k < config.bins; ++k) {
        const double z = (double(k) - center) / sigma_bins;
        const double v = z * z < 50.0 ? std::exp(-0.5 * z * z) : 0.0;
        target[b * config.bins + k] = static_cast<float>(v);
        total += v;
      }
      for (std::size_t k = 0; k < config.bins; ++k) target[b * config.bins + k] /= static_cast<float>(total);
    }
    model.parameters().zero_grad();
    auto loss = nn::softmax_cross_entropy(model.logits(nn::Var<float>(std::move(frames))), target);
    loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw NumericalError("embedder training diverged at iteration " + std::to_string(it) + " (loss is not finite)");
    }
    nn::backward(loss);
    // Cosine decay to a tenth of the base rate.
    const double progress_frac = double(it) / double(std::max<std::size_t>(1, options.iterations));
    const double lr = options.learning_rate * (0.55 + 0.45 * std::cos(std::numbers::pi * progress_frac));
    nn::adam_step(model.parameters(), nn::AdamOptions{.learning_rate = lr});
    if (progress) progress(it, loss_value);
  }
  model.parameters().zero_grad();
  if (report) {
    report->final_loss = loss_value;
    report->top5_accuracy = top5_accuracy(model, options.eval_examples, options.seed + 1, options.min_hz, options.max_hz);
  }
  return model;
}

double top5_accuracy(const PitchEmbedder<float>& embedder, std::size_t examples, std::uint64_t seed, double min_hz,
                     double max_hz) {
  if (examples == 0) throw InputError("top5_accuracy: no examples requested");
  const auto& config = embedder.config();
  // Disjoint stream from the training generator of the same seed.
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  nn::NoGradGuard guard;
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 100;
  for (std::size_t start = 0; start < examples; start += kChunk) {
    const std::size_t n = std::min(kChunk, examples - start);
    nn::Tensor<float> frames({n, 1, config.frame});
    std::vector<long> truth(n);
    for (std::size_t b = 0; b < n; ++b) {
      const double f0 = sample_frequency(rng, min_hz, max_hz);
      const auto x = synthetic_pitch_example(f0, config.frame, rng);
      std::copy(x.begin(), x.end(), frames.data() + b * config.frame);
      truth[b] = std::lround(frequency_to_bin(config, f0));
    }
    const auto scores = embedder.logits(nn::Var<float>(std::move(frames))).value();
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<std::size_t> order(config.bins);
      std::iota(order.begin(), order.end(), 0);
      const float* row = scores.data() + b * config.bins;
      std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                        [row](std::size_t a, std::size_t c) { return row[a] > row[c]; });
      for (std::size_t k = 0; k < 5; ++k) hits += static_cast<long>(order[k]) == truth[b] ? 1 : 0;
    }
  }
  return double(hits) / double(examples);
}

template class PitchEmbedder<float>;
template class PitchEmbedder<double>;
template PitchEmbedder<double> PitchEmbedder<float>::cast<double>() const;
template PitchEmbedder<float> PitchEmbedder<double>::cast<float>() const;
template PitchEmbedder<float> PitchEmbedder<float>::cast<float>() const;

}  // namespace timbre::pitch

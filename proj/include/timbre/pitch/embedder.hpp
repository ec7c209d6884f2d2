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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "timbre/nn/parameters.hpp"
#include "timbre/trainer/checkpoint.hpp"

namespace timbre::pitch {

// Small convolutional pitch classifier over 20-cent bins. Each block is a
// stride-1 convolution, ReLU and max-pool by 2; a linear layer over the
// flattened last block scores the bins.
struct EmbedderConfig {
  std::size_t frame = 1024;  // must be divisible by 2^blocks
  std::size_t hop = 512;
  std::size_t channels = 16;
  std::vector<std::size_t> kernels = {63, 31, 15, 7, 7, 7};
  std::size_t tap_block = 5;  // embedding is read after this many pools
  std::size_t bins = 360;
  double first_bin_hz = 32.70;
  double cents_per_bin = 20.0;

  std::size_t blocks() const noexcept { return kernels.size(); }
  void validate() const;
};

double frequency_to_bin(const EmbedderConfig& config, double hz);
double bin_to_frequency(const EmbedderConfig& config, double bin);

template <typename T>
class PitchEmbedder {
 public:
  PitchEmbedder() = default;
  PitchEmbedder(EmbedderConfig config, std::uint64_t seed);

  const EmbedderConfig& config() const noexcept { return config_; }
  nn::ParameterStore<T>& parameters() noexcept { return params_; }
  const nn::ParameterStore<T>& parameters() const noexcept { return params_; }

  // audio: (B, 1, T) at 16 kHz, T >= frame. Returns (B * frames, channels,
  // frame >> tap_block) activations after the tap pooling stage.
  nn::Var<T> embed(const nn::Var<T>& audio) const;

  // frames: (N, 1, frame). Returns (N, bins) logits.
  nn::Var<T> logits(const nn::Var<T>& frames) const;

  // Highest-scoring bin of one frame of samples.
  std::size_t predict_bin(const std::vector<double>& frame) const;

  template <typename U>
  PitchEmbedder<U> cast() const;

  void save(trainer::Checkpoint& ckpt) const;
  static PitchEmbedder load(const trainer::Checkpoint& ckpt);

 private:
  template <typename U>
  friend class PitchEmbedder;

  nn::Var<T> features(const nn::Var<T>& frames, std::size_t blocks) const;

  EmbedderConfig config_;
  nn::ParameterStore<T> params_;
};

struct EmbedderTrainOptions {
  EmbedderConfig config;
  std::size_t iterations = 1500;
  std::size_t batch = 32;
  double learning_rate = 3e-3;
  double target_std_cents = 25.0;
  double min_hz = 50.0;
  double max_hz = 1100.0;
  std::size_t eval_examples = 1000;
  std::uint64_t seed = 0;
};

struct EmbedderTrainReport {
  double top5_accuracy = 0.0;   // held-out synthetic tones, true bin among the best five
  double final_loss = 0.0;
};

// One synthetic example: 1-8 harmonics with random amplitudes and phases,
// random gain, additive white noise. `frame` samples at 16 kHz.
std::vector<double> synthetic_pitch_example(double f0, std::size_t frame, std::mt19937_64& rng);

// Trains on freshly synthesized tones; deterministic given the seed. The
// callback, if set, sees (iteration, loss). Throws NumericalError on NaN.
PitchEmbedder<float> train_pitch_embedder(const EmbedderTrainOptions& options, EmbedderTrainReport* report = nullptr,
                                          const std::function<void(std::size_t, double)>& progress = {});

// Fraction of held-out tones whose true bin is among the five best logits.
double top5_accuracy(const PitchEmbedder<float>& embedder, std::size_t examples, std::uint64_t seed,
                     double min_hz = 50.0, double max_hz = 1100.0);

}  // namespace timbre::pitch

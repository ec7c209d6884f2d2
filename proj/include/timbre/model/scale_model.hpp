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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "timbre/dsp/audio.hpp"
#include "timbre/dsp/loudness.hpp"
#include "timbre/nn/parameters.hpp"
#include "timbre/pitch/f0_track.hpp"
#include "timbre/trainer/checkpoint.hpp"

namespace timbre::model {

inline constexpr std::array<int, 4> kScaleRates = {2000, 4000, 8000, 16000};

struct ScaleConfig {
  std::size_t scale_index = 0;
  int sample_rate = 2000;
  std::size_t layers = 30;
  std::size_t stacks = 3;
  std::size_t kernel = 3;
  std::size_t residual_channels = 64;
  std::size_t skip_channels = 64;
  std::size_t condition_channels = 80;
  std::size_t hop = 32;
  std::size_t disc_layers = 10;
  std::size_t disc_channels = 64;

  static ScaleConfig for_scale(std::size_t j);

  std::size_t layers_per_stack() const { return layers / stacks; }
  // 1, 2, 4, ... restarting at every stack.
  std::size_t dilation(std::size_t layer) const { return std::size_t{1} << (layer % layers_per_stack()); }
  // Samples on one side of an output that can influence it.
  std::size_t receptive_field() const;
  std::size_t disc_receptive_field() const;
  void validate() const;
};

struct LoudnessStats {
  double mean = 0.0;
  double std = 1.0;
};

// Generator G with its input encoder E (one parameter store) and the
// discriminator D (another) for one scale.
template <typename T>
class ScaleModel {
 public:
  ScaleModel() = default;
  ScaleModel(ScaleConfig config, std::uint64_t seed);

  const ScaleConfig& config() const noexcept { return config_; }
  nn::ParameterStore<T>& generator() noexcept { return generator_; }
  const nn::ParameterStore<T>& generator() const noexcept { return generator_; }
  nn::ParameterStore<T>& discriminator() noexcept { return discriminator_; }
  const nn::ParameterStore<T>& discriminator() const noexcept { return discriminator_; }
  LoudnessStats& stats() noexcept { return stats_; }
  const LoudnessStats& stats() const noexcept { return stats_; }

  // Normalized loudness (B, 1, F) -> conditioning (B, condition_channels, 32 F).
  nn::Var<T> encode(const nn::Var<T>& loudness) const;

  // input (B, 1, T) at the scale rate, conditioning (B, C, T'). When T and T'
  // differ by less than one hop the longer is truncated; otherwise InputError.
  // Output (B, 1, min(T, T')) in (-1, 1).
  nn::Var<T> generate(const nn::Var<T>& input, const nn::Var<T>& conditioning) const;

  // Per-timestep scores (B, 1, T).
  nn::Var<T> discriminate(const nn::Var<T>& audio) const;

  // Scalar parameters of generator plus encoder.
  std::size_t param_count() const { return generator_.scalar_count(); }

  template <typename U>
  ScaleModel<U> cast() const;

  void save(trainer::Checkpoint& ckpt, bool with_optimizer = true) const;
  static ScaleModel load(const trainer::Checkpoint& ckpt);

 private:
  template <typename U>
  friend class ScaleModel;

  ScaleConfig config_;
  nn::ParameterStore<T> generator_;
  nn::ParameterStore<T> discriminator_;
  LoudnessStats stats_;
};

// Initializes a scale-j model from the trained scale j-1 model: all weights
// copied, optimizer state reset, loudness stats replaced. Throws InputError
// when the architectures differ.
template <typename T>
ScaleModel<T> transfer_weights(const ScaleModel<T>& source, const ScaleConfig& target, const LoudnessStats& stats);

// (values - mean) / std as a (1, 1, F) tensor.
template <typename T>
nn::Tensor<T> normalized_loudness(const dsp::LoudnessTrack& track, const LoudnessStats& stats);

// Differentiable cascade: excitation (B, 1, T0) at the first model's rate,
// loudness[j] the normalized (B, 1, F_j) track for model j. Each later model
// receives the previous output upsampled by 2.
template <typename T>
nn::Var<T> stack_forward(std::span<const ScaleModel<T>> models, const nn::Var<T>& excitation,
                         std::span<const nn::Var<T>> loudness);

// Inference over the trained models (at least one). Loudness tracks are given
// per model at that model's rate. When fewer than four models are supplied
// the last output is sinc-upsampled to 16 kHz.
template <typename T>
dsp::AudioBuffer generate_stack(std::span<const ScaleModel<T>> models, const pitch::F0Track& f0,
                                std::span<const dsp::LoudnessTrack> loudness, double noise_std, std::uint64_t seed = 0);

}  // namespace timbre::model

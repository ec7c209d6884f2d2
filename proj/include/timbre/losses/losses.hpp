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
#include <optional>
#include <span>

#include "timbre/dsp/audio.hpp"
#include "timbre/nn/autograd.hpp"
#include "timbre/pitch/embedder.hpp"

namespace timbre::losses {

inline constexpr std::array<std::size_t, 6> kResolutions = {2048, 1024, 512, 256, 128, 64};
// Magnitudes are clamped here before the log so digital silence stays finite.
inline constexpr double kLogFloor = 1e-5;

struct LossWeights {
  double alpha = 1.0;  // adversarial
  double beta = 1.0;   // perceptual
  void validate() const;
};

// Spectral amplitude distance at one resolution (Hann window, hop = size / 4)
// between (B, 1, T) signals, meaned over the batch:
//   ||S - S^||_F / ||S||_F + mean |log S - log S^|
// Differentiable with respect to `estimate` only; `reference` is a constant.
template <typename T>
nn::Var<T> spectral_loss(const nn::Var<T>& reference, const nn::Var<T>& estimate, std::size_t fft_size);

// Mean of spectral_loss over `sizes`.
template <typename T>
nn::Var<T> multires_spectral_loss(const nn::Var<T>& reference, const nn::Var<T>& estimate,
                                  std::span<const std::size_t> sizes = kResolutions);

// Plain-buffer form used for evaluation.
double multires_spectral_distance(const dsp::AudioBuffer& reference, const dsp::AudioBuffer& estimate);

// Least-squares objectives on per-timestep discriminator scores (B, 1, T),
// meaned over time and batch.
template <typename T>
nn::Var<T> lsgan_d_loss(const nn::Var<T>& real_scores, const nn::Var<T>& fake_scores);
template <typename T>
nn::Var<T> adversarial_g_loss(const nn::Var<T>& fake_scores);

// Mean L1 distance between pitch embeddings after sinc upsampling both
// (B, 1, T) signals by `upsample_factor` to 16 kHz.
template <typename T>
nn::Var<T> perceptual_loss(const pitch::PitchEmbedder<T>& embedder, const nn::Var<T>& reference,
                           const nn::Var<T>& estimate, std::size_t upsample_factor);

// recon + alpha * adv + beta * percep. Absent components (and components with
// zero weight) are skipped. A non-finite component raises NumericalError
// naming it.
template <typename T>
nn::Var<T> total_g_loss(const nn::Var<T>& recon, const std::optional<nn::Var<T>>& adv,
                        const std::optional<nn::Var<T>>& percep, const LossWeights& weights);

}  // namespace timbre::losses

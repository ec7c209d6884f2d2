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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timbre/losses/losses.hpp"
#include "timbre/model/scale_model.hpp"
#include "timbre/pitch/embedder.hpp"
#include "timbre/trainer/checkpoint.hpp"
#include "timbre/trainer/dataset.hpp"

namespace timbre::trainer {

struct TrainSchedule {
  std::size_t iterations = 120000;
  double generator_lr = 5e-4;
  double discriminator_lr = 1e-4;
  std::size_t halving_iteration = 60000;     // both rates halve from here on
  std::size_t discriminator_start = 30000;   // first iteration with adversarial terms
  std::array<std::size_t, kScales> batch_sizes = {32, 16, 8, 4};
  double excitation_noise = 0.003;
  losses::LossWeights weights;
  std::size_t checkpoint_every = 1000;
  // Random crop length per training example; the whole clip by default.
  double segment_seconds = 2.0;

  // Crop length at scale j: a multiple of the 32-sample hop and at least the
  // largest analysis window.
  std::size_t segment_samples(std::size_t scale) const;
  double generator_lr_at(std::size_t iteration) const;
  double discriminator_lr_at(std::size_t iteration) const;
  void validate() const;
};

// One row of the loss log; inactive components are empty.
struct IterationLoss {
  std::size_t iteration = 0;
  double recon = 0.0;
  std::optional<double> adv;
  std::optional<double> percep;
  std::optional<double> d_loss;
};

struct TrainOptions {
  // When set, scale<j>.tpck and scale<j>_loss.csv are written here.
  std::filesystem::path out_dir;
  // Required when the perceptual weight is non-zero; kept frozen.
  const pitch::PitchEmbedder<float>* embedder = nullptr;
  std::function<void(std::size_t scale, const IterationLoss&)> on_iteration;
  // Called after every iteration with the number of completed iterations;
  // returning true ends training early (the final checkpoint records where).
  std::function<bool(std::size_t completed, const model::ScaleModel<float>&)> stop_when;
};

struct ScaleRun {
  model::ScaleModel<float> model;
  Checkpoint checkpoint;
  std::vector<IterationLoss> history;
};

std::filesystem::path scale_checkpoint_path(const std::filesystem::path& dir, std::size_t scale);

// Trains scale j. `previous` holds the frozen, already trained scales
// 0..j-1 that produce the generator input for j >= 1; `init` (if given)
// seeds the weights, otherwise they are drawn from `seed`. A non-finite loss
// raises NumericalError naming the iteration; checkpoints already written
// are left in place.
ScaleRun train_scale(std::size_t scale, const Dataset& dataset, const TrainSchedule& schedule,
                     std::span<const model::ScaleModel<float>> previous, const model::ScaleModel<float>* init,
                     std::uint64_t seed, const TrainOptions& options = {});

// Scale 0 from random init, every later scale from transfer_weights of the
// one before, each trained with the lower scales frozen.
std::vector<ScaleRun> train_stack(const Dataset& dataset, const TrainSchedule& schedule, std::uint64_t seed,
                                  std::size_t scales = kScales, const TrainOptions& options = {});

// Loads scale<j>.tpck for j < count; InputError listing every missing file.
std::vector<model::ScaleModel<float>> load_stack(const std::filesystem::path& dir, std::size_t count);

// Noise-free synthesis of one clip through the stack at 16 kHz.
dsp::AudioBuffer synthesize_clip(std::span<const model::ScaleModel<float>> stack, const Clip& clip);

// Multi-resolution spectral distance at the finest scale of the stack,
// rounded to the reference length.
double clip_spectral_loss(std::span<const model::ScaleModel<float>> stack, const Clip& clip);

// Training objective without noise: mean multi-resolution loss over the
// clip's non-overlapping windows of `segment` samples, each synthesized as
// its own sequence the way training crops are.
double segment_loss(const model::ScaleModel<float>& model, std::span<const model::ScaleModel<float>> previous,
                    const Clip& clip, std::size_t segment);

struct ClipMetrics {
  std::string clip;
  double spectral_loss = 0.0;
  double f0_cents = 0.0;
};

struct EvalReport {
  std::vector<ClipMetrics> clips;
  double mean_spectral_loss = 0.0;
  double mean_f0_cents = 0.0;

  // Header clip,spectral_loss,f0_cents; one row per clip and a "mean" row.
  void write_csv(const std::filesystem::path& path) const;
};

// Mean absolute deviation in cents between track_f0(generated) and `input`
// over the input's voiced frames. A generated frame without pitch counts as
// one octave off.
double f0_deviation_cents(const pitch::F0Track& input, const dsp::AudioBuffer& generated);

ClipMetrics clip_metrics(const std::string& name, const dsp::AudioBuffer& reference, const pitch::F0Track& input,
                         const dsp::AudioBuffer& generated);

// Synthesizes every clip from its own features and scores it against the
// clip's 16 kHz audio. InputError for an empty set.
EvalReport evaluate(std::span<const model::ScaleModel<float>> stack, std::span<const Clip> clips);

}  // namespace timbre::trainer

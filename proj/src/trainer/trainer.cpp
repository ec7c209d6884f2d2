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


#include "timbre/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "timbre/dsp/excitation.hpp"
#include "timbre/dsp/resample.hpp"
#include "timbre/errors.hpp"
#include "timbre/nn/ops.hpp"
#include "timbre/nn/signal_ops.hpp"
#include "timbre/pitch/yin.hpp"

namespace timbre::trainer {

namespace {

using model::ScaleModel;

// Full-clip tensors for one scale, noise free; crops are cut per iteration.
struct ScaleExample {
  std::vector<float> input;
  std::vector<float> reference;
  std::vector<float> loudness;   // normalized, one value per 32 samples
};

struct Batch {
  nn::Tensor<float> input;
  nn::Tensor<float> loudness;
  nn::Tensor<float> reference;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

nn::Tensor<float> row_tensor(const std::vector<double>& v) {
  return nn::Tensor<float>({1, 1, v.size()}, std::vector<float>(v.begin(), v.end()));
}

// Raw output of the stack at its last scale for one clip.
nn::Tensor<float> stack_output(std::span<const ScaleModel<float>> stack, const Clip& clip) {
  nn::NoGradGuard guard;
  const auto excitation = dsp::sine_excitation(clip.f0, stack.front().config().sample_rate);
  std::vector<nn::Var<float>> loudness;
  for (const auto& m : stack) {
    loudness.emplace_back(model::normalized_loudness<float>(clip.loudness[m.config().scale_index], m.stats()));
  }
  return model::stack_forward<float>(stack, nn::Var<float>(row_tensor(excitation.samples)), loudness).value();
}

ScaleExample make_example(std::size_t scale, const Clip& clip, const model::LoudnessStats& stats,
                          std::span<const ScaleModel<float>> previous) {
  ScaleExample ex;
  const auto& ref = clip.audio[scale].samples;
  if (scale == 0) {
    const auto exc = dsp::sine_excitation(clip.f0, model::kScaleRates[0]);
    ex.input.assign(exc.samples.begin(), exc.samples.end());
  } else {
    nn::NoGradGuard guard;
    ex.input = nn::sinc_upsample(nn::Var<float>(stack_output(previous, clip)), 2).value().storage();
  }
  ex.loudness = model::normalized_loudness<float>(clip.loudness[scale], stats).storage();
  const std::size_t length = std::min({ex.input.size(), ref.size(), ex.loudness.size() * dsp::kLoudnessHop});
  ex.input.resize(length);
  ex.reference.assign(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(length));
  ex.loudness.resize(length / dsp::kLoudnessHop);
  return ex;
}

Batch sample_batch(const std::vector<ScaleExample>& examples, std::size_t batch, std::size_t segment, double noise,
                   std::mt19937_64& rng) {
  const std::size_t frames = segment / dsp::kLoudnessHop;
  Batch b{nn::Tensor<float>({batch, 1, segment}), nn::Tensor<float>({batch, 1, frames}),
          nn::Tensor<float>({batch, 1, segment})};
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& ex = examples[pick(rng)];
    std::uniform_int_distribution<std::size_t> start_frame(0, ex.loudness.size() - frames);
    const std::size_t f = start_frame(rng);
    const std::size_t s = f * dsp::kLoudnessHop;
    for (std::size_t t = 0; t < segment; ++t) {
      b.input.at(i, 0, t) = ex.input[s + t] + static_cast<float>(noise * gauss(rng));
      b.reference.at(i, 0, t) = ex.reference[s + t];
    }
    std::copy_n(ex.loudness.begin() + static_cast<std::ptrdiff_t>(f), frames, &b.loudness.at(i, 0, 0));
  }
  return b;
}

Checkpoint make_checkpoint(const ScaleModel<float>& m, const TrainSchedule& s, std::size_t next_iteration,
                           const std::mt19937_64& rng, std::uint64_t seed) {
  Checkpoint ckpt;
  m.save(ckpt, true);
  ckpt.put_u64("train/next_iteration", next_iteration);
  ckpt.put_u64("train/seed", seed);
  store_rng(ckpt, "train/rng", rng);
  ckpt.put_u64s("schedule/counts", {s.iterations, s.halving_iteration, s.discriminator_start, s.checkpoint_every});
  ckpt.put_u64s("schedule/batch_sizes", {s.batch_sizes.begin(), s.batch_sizes.end()});
  ckpt.put_scalar("schedule/generator_lr", s.generator_lr);
  ckpt.put_scalar("schedule/discriminator_lr", s.discriminator_lr);
  ckpt.put_scalar("schedule/excitation_noise", s.excitation_noise);
  ckpt.put_scalar("schedule/alpha", s.weights.alpha);
  ckpt.put_scalar("schedule/beta", s.weights.beta);
  ckpt.put_scalar("schedule/segment_seconds", s.segment_seconds);
  return ckpt;
}

void write_log_row(std::ostream& out, const IterationLoss& row) {
  const auto opt = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  out << row.iteration << ',' << row.recon;
  opt(row.adv);
  opt(row.percep);
  opt(row.d_loss);
  out << '\n';
}

std::string clip_name(const Clip& clip) {
  std::string name = clip.source;
  std::replace(name.begin(), name.end(), ',', '_');
  return name + "@" + std::to_string(clip.offset);
}

}  // namespace

std::size_t TrainSchedule::segment_samples(std::size_t scale) const {
  if (scale >= kScales) throw InputError("schedule: scale index out of range");
  const double exact = segment_seconds * model::kScaleRates[scale];
  const auto n = static_cast<std::size_t>(std::llround(exact));
  const std::size_t min_len = *std::max_element(losses::kResolutions.begin(), losses::kResolutions.end());
  if (!(segment_seconds > 0.0) || std::abs(exact - static_cast<double>(n)) > 1e-6 || n % dsp::kLoudnessHop != 0 ||
      n < min_len) {
    throw InputError("schedule: segment of " + std::to_string(segment_seconds) + " s gives " + std::to_string(exact) +
                     " samples at scale " + std::to_string(scale) + "; need a multiple of 32 of at least " +
                     std::to_string(min_len));
  }
  return n;
}

double TrainSchedule::generator_lr_at(std::size_t iteration) const {
  return iteration >= halving_iteration ? generator_lr * 0.5 : generator_lr;
}

double TrainSchedule::discriminator_lr_at(std::size_t iteration) const {
  return iteration >= halving_iteration ? discriminator_lr * 0.5 : discriminator_lr;
}

void TrainSchedule::validate() const {
  if (discriminator_start >= halving_iteration) {
    throw InputError("schedule: discriminator start must precede the lr halving iteration");
  }
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) throw InputError("schedule: learning rates must be positive");
  for (auto b : batch_sizes) {
    if (b == 0) throw InputError("schedule: batch sizes must be positive");
  }
  if (!(excitation_noise >= 0.0)) throw InputError("schedule: excitation noise must be non-negative");
  if (checkpoint_every == 0) throw InputError("schedule: checkpoint interval must be positive");
  weights.validate();
}

std::filesystem::path scale_checkpoint_path(const std::filesystem::path& dir, std::size_t scale) {
  return dir / ("scale" + std::to_string(scale) + ".tpck");
}

ScaleRun train_scale(std::size_t scale, const Dataset& dataset, const TrainSchedule& schedule,
                     std::span<const ScaleModel<float>> previous, const ScaleModel<float>* init, std::uint64_t seed,
                     const TrainOptions& options) {
  schedule.validate();
  if (scale >= kScales) throw InputError("train: scale index out of range");
  if (previous.size() != scale) {
    throw InputError("train: scale " + std::to_string(scale) + " needs " + std::to_string(scale) +
                     " trained lower scales, got " + std::to_string(previous.size()));
  }
  if (dataset.train.empty()) throw InputError("train: dataset has no training clips");
  const std::size_t segment = schedule.segment_samples(scale);
  const std::size_t clip_len = dataset.train.front().audio[scale].size();
  if (segment > clip_len) {
    throw InputError("train: segment of " + std::to_string(segment) + " samples exceeds the clip length " +
                     std::to_string(clip_len));
  }

  ScaleRun run;
  if (init) {
    if (init->config().scale_index != scale) throw InputError("train: init checkpoint belongs to another scale");
    run.model = *init;
  } else {
    run.model = ScaleModel<float>(model::ScaleConfig::for_scale(scale), seed);
  }
  run.model.stats() = dataset.stats[scale];

  std::optional<pitch::PitchEmbedder<float>> embedder;
  if (schedule.weights.beta > 0.0) {
    if (!options.embedder) throw InputError("train: a pitch embedder is required when beta > 0");
    embedder = *options.embedder;
    embedder->parameters().set_trainable(false);
  }

  std::vector<ScaleExample> examples;
  for (const auto& clip : dataset.train) examples.push_back(make_example(scale, clip, dataset.stats[scale], previous));
  std::mt19937_64 rng(mix_seed(seed, scale));
  const std::size_t upsample_factor = static_cast<std::size_t>(16000 / run.model.config().sample_rate);

  const bool write_files = !options.out_dir.empty();
  std::ofstream log;
  std::filesystem::path ckpt_path;
  bool saved = false;
  if (write_files) {
    std::filesystem::create_directories(options.out_dir);
    ckpt_path = scale_checkpoint_path(options.out_dir, scale);
    const auto log_path = options.out_dir / ("scale" + std::to_string(scale) + "_loss.csv");
    log.open(log_path);
    if (!log) throw InputError("train: cannot write '" + log_path.string() + "'");
    log << std::setprecision(9) << "iteration,recon,adv,percep,d_loss\n";
  }

  auto& gen = run.model.generator();
  auto& disc = run.model.discriminator();
  run.history.reserve(schedule.iterations);
  for (std::size_t it = 0; it < schedule.iterations; ++it) {
    IterationLoss row;
    row.iteration = it;
    try {
      const auto batch =
          sample_batch(examples, schedule.batch_sizes[scale], segment, schedule.excitation_noise, rng);
      const nn::Var<float> input(batch.input), loud(batch.loudness), ref(batch.reference);
      gen.zero_grad();
      const auto out = run.model.generate(input, run.model.encode(loud));
      const auto recon = losses::multires_spectral_loss(ref, out);
      row.recon = recon.value()[0];
      std::optional<nn::Var<float>> percep, adv;
      if (embedder) {
        percep = losses::perceptual_loss(*embedder, ref, out, upsample_factor);
        row.percep = percep->value()[0];
      }
      const bool adversarial = it >= schedule.discriminator_start && schedule.weights.alpha > 0.0;
      if (adversarial) {
        adv = losses::adversarial_g_loss(run.model.discriminate(out));
        row.adv = adv->value()[0];
      }
      nn::backward(losses::total_g_loss(recon, adv, percep, schedule.weights));
      nn::adam_step(gen, {.learning_rate = schedule.generator_lr_at(it)});
      if (adversarial) {
        disc.zero_grad();
        const auto d_loss = losses::lsgan_d_loss(run.model.discriminate(ref), run.model.discriminate(out.detach()));
        row.d_loss = d_loss.value()[0];
        if (!std::isfinite(*row.d_loss)) throw NumericalError("discriminator loss is not finite");
        nn::backward(d_loss);
        nn::adam_step(disc, {.learning_rate = schedule.discriminator_lr_at(it)});
      }
    } catch (const NumericalError& e) {
      std::string msg = "scale " + std::to_string(scale) + " iteration " + std::to_string(it) + ": " + e.what();
      msg += saved ? "; last good checkpoint kept at " + ckpt_path.string() : "; no checkpoint written yet";
      throw NumericalError(msg);
    }
    run.history.push_back(row);
    if (options.on_iteration) options.on_iteration(scale, row);
    const bool stop = options.stop_when && options.stop_when(it + 1, run.model);
    if (write_files) {
      write_log_row(log, row);
      if ((it + 1) % schedule.checkpoint_every == 0 && it + 1 < schedule.iterations && !stop) {
        log.flush();
        make_checkpoint(run.model, schedule, it + 1, rng, seed).save(ckpt_path);
        saved = true;
      }
    }
    if (stop) break;
  }
  gen.zero_grad();
  disc.zero_grad();
  run.checkpoint = make_checkpoint(run.model, schedule, run.history.size(), rng, seed);
  if (write_files) run.checkpoint.save(ckpt_path);
  return run;
}

std::vector<ScaleRun> train_stack(const Dataset& dataset, const TrainSchedule& schedule, std::uint64_t seed,
                                  std::size_t scales, const TrainOptions& options) {
  if (scales == 0 || scales > kScales) throw InputError("train: scale count must lie in [1, 4]");
  std::vector<ScaleRun> runs;
  std::vector<ScaleModel<float>> frozen;
  for (std::size_t j = 0; j < scales; ++j) {
    std::optional<ScaleModel<float>> init;
    if (j > 0) init = model::transfer_weights(frozen.back(), model::ScaleConfig::for_scale(j), dataset.stats[j]);
    runs.push_back(train_scale(j, dataset, schedule, frozen, init ? &*init : nullptr, seed + j, options));
    frozen.push_back(runs.back().model);
  }
  return runs;
}

std::vector<ScaleModel<float>> load_stack(const std::filesystem::path& dir, std::size_t count) {
  std::vector<std::string> missing;
  for (std::size_t j = 0; j < count; ++j) {
    if (!std::filesystem::is_regular_file(scale_checkpoint_path(dir, j))) missing.push_back(std::to_string(j));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw InputError("missing checkpoint for scale " + list + " in '" + dir.string() + "'");
  }
  std::vector<ScaleModel<float>> stack;
  for (std::size_t j = 0; j < count; ++j) {
    auto m = ScaleModel<float>::load(Checkpoint::load(scale_checkpoint_path(dir, j)));
    if (m.config().scale_index != j) {
      throw InputError("checkpoint " + scale_checkpoint_path(dir, j).string() + " holds scale " +
                       std::to_string(m.config().scale_index));
    }
    stack.push_back(std::move(m));
  }
  return stack;
}

dsp::AudioBuffer synthesize_clip(std::span<const ScaleModel<float>> stack, const Clip& clip) {
  std::vector<dsp::LoudnessTrack> loudness;
  for (const auto& m : stack) loudness.push_back(clip.loudness[m.config().scale_index]);
  return model::generate_stack<float>(stack, clip.f0, loudness, 0.0);
}

double clip_spectral_loss(std::span<const ScaleModel<float>> stack, const Clip& clip) {
  const auto out = stack_output(stack, clip);
  const auto& ref = clip.audio[stack.back().config().scale_index];
  dsp::AudioBuffer est{std::vector<double>(out.storage().begin(), out.storage().end()), ref.sample_rate};
  est.samples.resize(ref.size(), 0.0);
  return losses::multires_spectral_distance(ref, est);
}

double segment_loss(const ScaleModel<float>& model, std::span<const ScaleModel<float>> previous, const Clip& clip,
                    std::size_t segment) {
  const std::size_t scale = model.config().scale_index;
  if (previous.size() != scale) throw InputError("segment_loss: need every lower scale");
  const auto ex = make_example(scale, clip, model.stats(), previous);
  const std::size_t windows = ex.input.size() / segment;
  if (segment % dsp::kLoudnessHop != 0 || windows == 0) {
    throw InputError("segment_loss: segment must be a multiple of 32 no longer than the clip");
  }
  nn::NoGradGuard guard;
  const std::size_t frames = segment / dsp::kLoudnessHop;
  double total = 0.0;
  for (std::size_t w = 0; w < windows; ++w) {
    const auto at = [&](const std::vector<float>& v, std::size_t begin, std::size_t n) {
      return nn::Var<float>(nn::Tensor<float>(
          {1, 1, n}, std::vector<float>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                        v.begin() + static_cast<std::ptrdiff_t>(begin + n))));
    };
    const auto out = model.generate(at(ex.input, w * segment, segment), model.encode(at(ex.loudness, w * frames, frames)));
    total += losses::multires_spectral_loss(at(ex.reference, w * segment, segment), out).value()[0];
  }
  return total / static_cast<double>(windows);
}

double f0_deviation_cents(const pitch::F0Track& input, const dsp::AudioBuffer& generated) {
  auto track = pitch::track_f0(generated);
  if (input.frame_rate > 0.0 && track.frame_rate != input.frame_rate) {
    track = pitch::rerate(track, input.frame_rate, input.size());
  }
  const std::size_t n = std::min(input.size(), track.size());
  double total = 0.0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (input.frequencies[i] <= 0.0) continue;
    ++voiced;
    total += track.frequencies[i] > 0.0 ? std::abs(1200.0 * std::log2(track.frequencies[i] / input.frequencies[i]))
                                        : 1200.0;
  }
  return voiced ? total / static_cast<double>(voiced) : 0.0;
}

ClipMetrics clip_metrics(const std::string& name, const dsp::AudioBuffer& reference, const pitch::F0Track& input,
                         const dsp::AudioBuffer& generated) {
  dsp::AudioBuffer est = generated;
  est.samples.resize(reference.size(), 0.0);
  return {name, losses::multires_spectral_distance(reference, est), f0_deviation_cents(input, generated)};
}

EvalReport evaluate(std::span<const ScaleModel<float>> stack, std::span<const Clip> clips) {
  if (clips.empty()) throw InputError("evaluate: no evaluation clips");
  if (stack.empty()) throw InputError("evaluate: no models");
  EvalReport report;
  for (const auto& clip : clips) {
    const auto generated = synthesize_clip(stack, clip);
    ClipMetrics m{clip_name(clip), clip_spectral_loss(stack, clip), f0_deviation_cents(clip.f0, generated)};
    report.mean_spectral_loss += m.spectral_loss;
    report.mean_f0_cents += m.f0_cents;
    report.clips.push_back(std::move(m));
  }
  report.mean_spectral_loss /= static_cast<double>(clips.size());
  report.mean_f0_cents /= static_cast<double>(clips.size());
  return report;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("evaluate: cannot write '" + path.string() + "'");
  out << std::setprecision(9) << "clip,spectral_loss,f0_cents\n";
  for (const auto& c : clips) out << c.clip << ',' << c.spectral_loss << ',' << c.f0_cents << '\n';
  out << "mean," << mean_spectral_loss << ',' << mean_f0_cents << '\n';
}

}  // namespace timbre::trainer

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

#include "timbre/model/scale_model.hpp"

#include <cmath>
#include <random>

#include "timbre/dsp/excitation.hpp"
#include "timbre/dsp/resample.hpp"
#include "timbre/errors.hpp"
#include "timbre/nn/ops.hpp"
#include "timbre/nn/signal_ops.hpp"

namespace timbre::model {

namespace {

constexpr std::array<std::size_t, 3> kEncoderUpsampling = {4, 4, 2};

std::string layer_name(const char* prefix, std::size_t i, const char* part) {
  return std::string(prefix) + std::to_string(i) + "." + part;
}

// Weight-normalized convolution stored as <name>.v, <name>.g, <name>.b.
// At initialization g = ||v|| so the effective kernel equals v.
template <typename T>
void add_conv(nn::ParameterStore<T>& store, const std::string& name, std::size_t out, std::size_t in,
              std::size_t kernel, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / double(in * kernel)));
  nn::Tensor<T> v({out, in, kernel});
  for (auto& x : v.storage()) x = static_cast<T>(dist(rng));
  nn::Tensor<T> g({out});
  for (std::size_t o = 0; o < out; ++o) {
    double sq = 0.0;
    for (std::size_t i = 0; i < in * kernel; ++i) sq += double(v[o * in * kernel + i]) * double(v[o * in * kernel + i]);
    g[o] = static_cast<T>(std::sqrt(sq));
  }
  store.add(name + ".v", std::move(v));
  store.add(name + ".g", std::move(g));
  store.add(name + ".b", nn::Tensor<T>({out}));
}

template <typename T>
nn::Var<T> conv(const nn::ParameterStore<T>& store, const std::string& name, const nn::Var<T>& x,
                const nn::Conv1dOptions<T>& options = {}) {
  return nn::conv1d(x, nn::weight_norm(store.get(name + ".v"), store.get(name + ".g")), store.get(name + ".b"), options);
}

template <typename T>
nn::Conv1dOptions<T> options(std::size_t dilation, std::optional<nn::Var<T>> addend = std::nullopt, T scale = T(1)) {
  nn::Conv1dOptions<T> o;
  o.dilation = dilation;
  o.addend = std::move(addend);
  o.scale = scale;
  return o;
}

constexpr const char* kConfigKeys[] = {"scale_index", "sample_rate", "layers", "stacks", "kernel", "residual_channels",
                                       "skip_channels", "condition_channels", "hop", "disc_layers", "disc_channels"};

std::array<std::size_t, 11> config_values(const ScaleConfig& c) {
  return {c.scale_index, static_cast<std::size_t>(c.sample_rate), c.layers, c.stacks, c.kernel, c.residual_channels,
          c.skip_channels, c.condition_channels, c.hop, c.disc_layers, c.disc_channels};
}

}  // namespace

ScaleConfig ScaleConfig::for_scale(std::size_t j) {
  if (j >= kScaleRates.size()) throw InputError("scale index " + std::to_string(j) + " is out of range 0..3");
  ScaleConfig c;
  c.scale_index = j;
  c.sample_rate = kScaleRates[j];
  return c;
}

std::size_t ScaleConfig::receptive_field() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers; ++l) total += dilation(l) * (kernel - 1) / 2;
  return total;
}

std::size_t ScaleConfig::disc_receptive_field() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < disc_layers; ++l) total += (l + 1) * (kernel - 1) / 2;
  return 1 + 2 * total;
}

void ScaleConfig::validate() const {
  if (sample_rate <= 0) throw InputError("scale config: sample rate must be positive");
  if (stacks == 0 || layers == 0 || layers % stacks != 0) throw InputError("scale config: layers must split evenly into stacks");
  if (kernel % 2 == 0) throw InputError("scale config: kernel must be odd");
  if (residual_channels == 0 || skip_channels == 0 || condition_channels == 0 || disc_channels == 0 || disc_layers < 2) {
    throw InputError("scale config: channel and layer counts must be positive");
  }
  std::size_t up = 1;
  for (std::size_t f : kEncoderUpsampling) up *= f;
  if (hop != up) throw InputError("scale config: hop must equal the encoder upsampling (" + std::to_string(up) + ")");
}

template <typename T>
ScaleModel<T>::ScaleModel(ScaleConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  const std::size_t cond = c.condition_channels;
  add_conv(generator_, "enc.in", cond, 1, 1, rng);
  for (std::size_t i = 0; i < kEncoderUpsampling.size(); ++i) add_conv(generator_, layer_name("enc.up", i, "conv"), cond, cond, 3, rng);

  add_conv(generator_, "gen.in", c.residual_channels, 1, 1, rng);
  for (std::size_t l = 0; l < c.layers; ++l) {
    add_conv(generator_, layer_name("gen.layer", l, "dilated"), 2 * c.residual_channels, c.residual_channels, c.kernel, rng);
    add_conv(generator_, layer_name("gen.layer", l, "cond"), 2 * c.residual_channels, cond, 1, rng);
    add_conv(generator_, layer_name("gen.layer", l, "skip"), c.skip_channels, c.residual_channels, 1, rng);
    // The last block's residual output would feed nothing.
    if (l + 1 < c.layers) {
      add_conv(generator_, layer_name("gen.layer", l, "res"), c.residual_channels, c.residual_channels, 1, rng);
    }
  }
  add_conv(generator_, "gen.head0", c.skip_channels, c.skip_channels, 1, rng);
  add_conv(generator_, "gen.head1", 1, c.skip_channels, 1, rng);

  for (std::size_t l = 0; l < c.disc_layers; ++l) {
    const std::size_t in = l == 0 ? 1 : c.disc_channels;
    const std::size_t out = l + 1 == c.disc_layers ? 1 : c.disc_channels;
    add_conv(discriminator_, layer_name("disc.layer", l, "conv"), out, in, c.kernel, rng);
  }
}

template <typename T>
nn::Var<T> ScaleModel<T>::encode(const nn::Var<T>& loudness) const {
  if (loudness.shape().size() != 3 || loudness.dim(1) != 1 || loudness.dim(2) == 0) {
    throw InputError("encode: expected a non-empty (batch, 1, frames) loudness track, got " +
                     nn::to_string(loudness.shape()));
  }
  auto h = conv(generator_, "enc.in", nn::instance_norm(loudness));
  for (std::size_t i = 0; i < kEncoderUpsampling.size(); ++i) {
    if (i > 0) h = nn::leaky_relu(h, T(0.2));
    h = conv(generator_, layer_name("enc.up", i, "conv"), nn::nearest_upsample(h, kEncoderUpsampling[i]));
  }
  return h;
}

template <typename T>
nn::Var<T> ScaleModel<T>::generate(const nn::Var<T>& input, const nn::Var<T>& conditioning) const {
  const auto& c = config_;
  if (input.shape().size() != 3 || input.dim(1) != 1) {
    throw InputError("generate: expected (batch, 1, time) input, got " + nn::to_string(input.shape()));
  }
  if (conditioning.shape().size() != 3 || conditioning.dim(0) != input.dim(0) ||
      conditioning.dim(1) != c.condition_channels) {
    throw InputError("generate: conditioning shape " + nn::to_string(conditioning.shape()) + " does not match input " +
                     nn::to_string(input.shape()));
  }
  const std::size_t t_in = input.dim(2), t_cond = conditioning.dim(2);
  const std::size_t steps = std::min(t_in, t_cond);
  if (std::max(t_in, t_cond) - steps >= c.hop) {
    throw InputError("generate: input has " + std::to_string(t_in) + " samples but conditioning covers " +
                     std::to_string(t_cond) + " (difference of a hop or more)");
  }
  const auto x_in = t_in == steps ? input : nn::slice_time(input, 0, steps);
  const auto cond = t_cond == steps ? conditioning : nn::slice_time(conditioning, 0, steps);

  const T residual_scale = static_cast<T>(std::sqrt(0.5));
  const T skip_scale = static_cast<T>(std::sqrt(1.0 / double(c.layers)));
  auto x = conv(generator_, "gen.in", x_in);
  std::optional<nn::Var<T>> skip;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto projected = conv(generator_, layer_name("gen.layer", l, "cond"), cond);
    const auto h = conv(generator_, layer_name("gen.layer", l, "dilated"), x, options<T>(c.dilation(l), projected));
    const auto z = nn::gated_activation(h);
    const bool last = l + 1 == c.layers;
    skip = conv(generator_, layer_name("gen.layer", l, "skip"), z, options<T>(1, skip, last ? skip_scale : T(1)));
    if (!last) x = conv(generator_, layer_name("gen.layer", l, "res"), z, options<T>(1, x, residual_scale));
  }
  auto out = conv(generator_, "gen.head0", nn::leaky_relu(*skip, T(0.2)));
  out = conv(generator_, "gen.head1", nn::leaky_relu(out, T(0.2)));
  return nn::tanh(out);
}

template <typename T>
nn::Var<T> ScaleModel<T>::discriminate(const nn::Var<T>& audio) const {
  if (audio.shape().size() != 3 || audio.dim(1) != 1) {
    throw InputError("discriminate: expected (batch, 1, time) audio, got " + nn::to_string(audio.shape()));
  }
  auto h = audio;
  for (std::size_t l = 0; l < config_.disc_layers; ++l) {
    h = conv(discriminator_, layer_name("disc.layer", l, "conv"), h, options<T>(l + 1));
    if (l + 1 < config_.disc_layers) h = nn::leaky_relu(h, T(0.2));
  }
  return h;
}

template <typename T>
template <typename U>
ScaleModel<U> ScaleModel<T>::cast() const {
  ScaleModel<U> out;
  out.config_ = config_;
  out.stats_ = stats_;
  for (const auto& e : generator_.entries()) out.generator_.add(e.name, e.param.value().template cast<U>());
  for (const auto& e : discriminator_.entries()) out.discriminator_.add(e.name, e.param.value().template cast<U>());
  return out;
}

template <typename T>
void ScaleModel<T>::save(trainer::Checkpoint& ckpt, bool with_optimizer) const {
  const auto values = config_values(config_);
  for (std::size_t i = 0; i < values.size(); ++i) ckpt.put_u64(std::string("config/") + kConfigKeys[i], values[i]);
  ckpt.put_scalar("stats/loudness_mean", stats_.mean);
  ckpt.put_scalar("stats/loudness_std", stats_.std);
  trainer::store_parameters(ckpt, "generator", generator_, with_optimizer);
  trainer::store_parameters(ckpt, "discriminator", discriminator_, with_optimizer);
}

template <typename T>
ScaleModel<T> ScaleModel<T>::load(const trainer::Checkpoint& ckpt) {
  std::array<std::size_t, 11> values{};
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = ckpt.u64(std::string("config/") + kConfigKeys[i]);
  ScaleConfig c;
  c.scale_index = values[0];
  c.sample_rate = static_cast<int>(values[1]);
  c.layers = values[2];
  c.stacks = values[3];
  c.kernel = values[4];
  c.residual_channels = values[5];
  c.skip_channels = values[6];
  c.condition_channels = values[7];
  c.hop = values[8];
  c.disc_layers = values[9];
  c.disc_channels = values[10];
  ScaleModel<T> model(c, 0);
  model.stats_ = {ckpt.scalar("stats/loudness_mean"), ckpt.scalar("stats/loudness_std")};
  trainer::load_parameters(ckpt, "generator", model.generator_);
  trainer::load_parameters(ckpt, "discriminator", model.discriminator_);
  return model;
}

template <typename T>
ScaleModel<T> transfer_weights(const ScaleModel<T>& source, const ScaleConfig& target, const LoudnessStats& stats) {
  ScaleModel<T> out(target, 0);
  auto copy = [](nn::ParameterStore<T>& dst, const nn::ParameterStore<T>& src, const char* what) {
    if (dst.size() != src.size()) throw InputError(std::string("transfer_weights: ") + what + " architectures differ");
    dst.copy_values_from(src);
    dst.reset_optimizer();
  };
  copy(out.generator(), source.generator(), "generator");
  copy(out.discriminator(), source.discriminator(), "discriminator");
  out.stats() = stats;
  return out;
}

template <typename T>
nn::Tensor<T> normalized_loudness(const dsp::LoudnessTrack& track, const LoudnessStats& stats) {
  if (track.values.empty()) throw InputError("loudness track is empty");
  if (!(stats.std > 0.0)) throw InputError("loudness stats: standard deviation must be positive");
  nn::Tensor<T> out({1, 1, track.size()});
  for (std::size_t i = 0; i < track.size(); ++i) out[i] = static_cast<T>((track.values[i] - stats.mean) / stats.std);
  return out;
}

template <typename T>
nn::Var<T> stack_forward(std::span<const ScaleModel<T>> models, const nn::Var<T>& excitation,
                         std::span<const nn::Var<T>> loudness) {
  if (models.empty()) throw InputError("stack_forward: no models");
  if (loudness.size() != models.size()) {
    throw InputError("stack_forward: " + std::to_string(models.size()) + " models but " +
                     std::to_string(loudness.size()) + " loudness tracks");
  }
  auto x = excitation;
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (j > 0) {
      if (models[j].config().sample_rate != 2 * models[j - 1].config().sample_rate) {
        throw InputError("stack_forward: scale " + std::to_string(j) + " is not twice the rate of the one below");
      }
      x = nn::sinc_upsample(x, 2);
    }
    x = models[j].generate(x, models[j].encode(loudness[j]));
  }
  return x;
}

template <typename T>
dsp::AudioBuffer generate_stack(std::span<const ScaleModel<T>> models, const pitch::F0Track& f0,
                                std::span<const dsp::LoudnessTrack> loudness, double noise_std, std::uint64_t seed) {
  if (models.empty()) throw InputError("generate_stack: no models");
  if (loudness.size() != models.size()) {
    throw InputError("generate_stack: missing loudness for scale " + std::to_string(loudness.size()));
  }
  nn::NoGradGuard guard;
  const auto excitation =
      dsp::sine_excitation(f0, models.front().config().sample_rate, {.noise_std = noise_std, .seed = seed});
  std::vector<nn::Var<T>> cond;
  for (std::size_t j = 0; j < models.size(); ++j) {
    cond.emplace_back(normalized_loudness<T>(loudness[j], models[j].stats()));
  }
  const nn::Var<T> input(nn::Tensor<T>({1, 1, excitation.size()},
                                       std::vector<T>(excitation.samples.begin(), excitation.samples.end())));
  const auto out = stack_forward<T>(models, input, cond);
  dsp::AudioBuffer audio{std::vector<double>(out.value().storage().begin(), out.value().storage().end()),
                         models.back().config().sample_rate};
  if (audio.sample_rate != 16000) {
    if (16000 % audio.sample_rate != 0) throw InputError("generate_stack: final rate does not divide 16 kHz");
    audio = dsp::upsample(audio, 16000 / audio.sample_rate);
  }
  return audio;
}

template class ScaleModel<float>;
template class ScaleModel<double>;
template ScaleModel<double> ScaleModel<float>::cast<double>() const;
template ScaleModel<float> ScaleModel<double>::cast<float>() const;
template ScaleModel<float> transfer_weights(const ScaleModel<float>&, const ScaleConfig&, const LoudnessStats&);
template ScaleModel<double> transfer_weights(const ScaleModel<double>&, const ScaleConfig&, const LoudnessStats&);
template nn::Tensor<float> normalized_loudness(const dsp::LoudnessTrack&, const LoudnessStats&);
template nn::Tensor<double> normalized_loudness(const dsp::LoudnessTrack&, const LoudnessStats&);
template nn::Var<float> stack_forward(std::span<const ScaleModel<float>>, const nn::Var<float>&,
                                      std::span<const nn::Var<float>>);
template nn::Var<double> stack_forward(std::span<const ScaleModel<double>>, const nn::Var<double>&,
                                       std::span<const nn::Var<double>>);
template dsp::AudioBuffer generate_stack(std::span<const ScaleModel<float>>, const pitch::F0Track&,
                                         std::span<const dsp::LoudnessTrack>, double, std::uint64_t);
template dsp::AudioBuffer generate_stack(std::span<const ScaleModel<double>>, const pitch::F0Track&,
                                         std::span<const dsp::LoudnessTrack>, double, std::uint64_t);

}  // namespace timbre::model

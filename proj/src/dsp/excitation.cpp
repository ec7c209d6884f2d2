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

#include "timbre/dsp/excitation.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "timbre/errors.hpp"

namespace timbre::dsp {

AudioBuffer sine_excitation(const pitch::F0Track& f0, int target_rate, const ExcitationOptions& options) {
  if (f0.frame_rate <= 0.0) throw InputError("sine_excitation: f0 track has no frame rate");
  if (f0.confidences.size() != f0.frequencies.size()) {
    throw InputError("sine_excitation: frequencies and confidences differ in length");
  }
  if (options.noise_std < 0.0) throw InputError("sine_excitation: noise_std must be >= 0");
  const double ratio_real = static_cast<double>(target_rate) / f0.frame_rate;
  const auto ratio = static_cast<std::size_t>(std::llround(ratio_real));
  if (target_rate <= 0 || ratio == 0 || std::abs(ratio_real - static_cast<double>(ratio)) > 1e-9 * ratio_real) {
    throw InputError("sine_excitation: target rate " + std::to_string(target_rate) +
                     " Hz is not an integer multiple of the f0 frame rate " + std::to_string(f0.frame_rate));
  }

  const std::size_t frames = f0.size();
  auto voiced_frequency = [&](std::size_t i) {
    const double f = f0.frequencies[i];
    if (f < 0.0 || !std::isfinite(f)) throw InputError("sine_excitation: invalid f0 value at frame " + std::to_string(i));
    return f0.confidences[i] < options.confidence_threshold ? 0.0 : f;
  };

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(frames * ratio);
  const double two_pi = 2.0 * std::numbers::pi;
  double phase = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double current = voiced_frequency(i);
    const double next = i + 1 < frames ? voiced_frequency(i + 1) : current;
    for (std::size_t k = 0; k < ratio; ++k, ++n) {
      double f = current;
      if (current > 0.0 && next > 0.0) {
        const double frac = static_cast<double>(k) / static_cast<double>(ratio);
        f = (1.0 - frac) * current + frac * next;
      }
      out.samples[n] = std::sin(phase);
      phase = std::fmod(phase + two_pi * f / target_rate, two_pi);
    }
  }

  if (options.noise_std > 0.0) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.noise_std);
    for (double& s : out.samples) s += noise(rng);
  }
  return out;
}

}  // namespace timbre::dsp

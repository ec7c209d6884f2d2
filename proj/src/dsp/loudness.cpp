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

#include "timbre/dsp/loudness.hpp"

#include <algorithm>
#include <cmath>

#include "timbre/dsp/spectral.hpp"
#include "timbre/errors.hpp"

namespace timbre::dsp {

double a_weighting_db(double frequency) {
  constexpr double kMinDb = -80.0;
  if (frequency <= 0.0) return kMinDb;
  const double f2 = frequency * frequency;
  const double num = 12194.0 * 12194.0 * f2 * f2;
  const double den = (f2 + 20.6 * 20.6) * std::sqrt((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)) *
                     (f2 + 12194.0 * 12194.0);
  return std::max(kMinDb, 20.0 * std::log10(num / den) + 2.0);
}

LoudnessTrack loudness(const AudioBuffer& x) {
  validate(x);
  if (x.empty()) throw InputError("loudness: empty buffer");
  if (x.size() < kLoudnessWindow) {
    throw InputError("loudness: need at least " + std::to_string(kLoudnessWindow) + " samples, got " +
                     std::to_string(x.size()));
  }
  const StftAnalyzer<double> stft(kLoudnessWindow, kLoudnessHop);
  const auto spectra = stft.analyze(x.samples);
  const std::size_t bins = stft.bins();
  const auto window = hann_window(kLoudnessWindow);
  double window_sum = 0.0;
  for (double w : window) window_sum += w;
  const double power_norm = 1.0 / (window_sum * window_sum);

  std::vector<double> weights(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    weights[k] = a_weighting_db(static_cast<double>(k) * x.sample_rate / static_cast<double>(kLoudnessWindow));
  }

  LoudnessTrack track;
  track.source_rate = x.sample_rate;
  track.values.resize(x.size() / kLoudnessHop);
  for (std::size_t f = 0; f < track.values.size(); ++f) {
    double acc = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double power = std::norm(spectra[f * bins + k]) * power_norm;
      // The floor is applied per weighted bin as well: otherwise the empty bins
      // of a clean harmonic signal drag every frame down to the floor.
      acc += std::max(kLoudnessFloorDb, 10.0 * std::log10(std::max(power, 1e-30)) + weights[k]);
    }
    track.values[f] = std::max(kLoudnessFloorDb, acc / static_cast<double>(bins));
  }
  return track;
}

}  // namespace timbre::dsp

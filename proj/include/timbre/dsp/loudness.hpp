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
#include <vector>

#include "timbre/dsp/audio.hpp"

namespace timbre::dsp {

inline constexpr std::size_t kLoudnessHop = 32;
inline constexpr std::size_t kLoudnessWindow = 256;
inline constexpr double kLoudnessFloorDb = -90.0;

// Frame-rate loudness in dB: one value per 32 input samples.
struct LoudnessTrack {
  std::vector<double> values;
  std::size_t hop = kLoudnessHop;
  int source_rate = 0;

  std::size_t size() const noexcept { return values.size(); }
};

// IEC 61672 A-weighting gain in dB at `frequency` Hz, clamped below at -80 dB.
double a_weighting_db(double frequency);

// Per frame: Hann-windowed power spectrum in dB plus A-weighting per bin,
// each bin clamped at -90 dB, averaged over bins. Length floor(size / 32).
LoudnessTrack loudness(const AudioBuffer& x);

}  // namespace timbre::dsp

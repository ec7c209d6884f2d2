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

#include <cstdint>

#include "timbre/dsp/audio.hpp"
#include "timbre/pitch/f0_track.hpp"

namespace timbre::dsp {

struct ExcitationOptions {
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  // Frames whose confidence is below this are treated as unvoiced.
  double confidence_threshold = 0.0;
};

// Sine of the accumulated phase of the f0 track, linearly interpolated to
// `target_rate`, plus optional Gaussian noise. The phase starts at zero and
// unvoiced frames add no phase. target_rate must be an integer multiple of
// the track's frame rate.
AudioBuffer sine_excitation(const pitch::F0Track& f0, int target_rate, const ExcitationOptions& options = {});

}  // namespace timbre::dsp

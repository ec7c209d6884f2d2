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
#include <iosfwd>
#include <optional>
#include <vector>

#include "timbre/dsp/audio.hpp"
#include "timbre/dsp/loudness.hpp"
#include "timbre/pitch/f0_track.hpp"

namespace timbre::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Parses the command line, dispatches the subcommand and maps failures to
// exit codes; messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Conditioning for synthesis from an arbitrary-rate recording. The audio is
// resampled to 16 kHz and zero padded to a multiple of 256 samples so every
// scale sees whole frames; `length` is the unpadded 16 kHz length. The f0
// comes from `f0` when given (re-interpolated to 500 frames/s) and from YIN
// otherwise; frames under the voicing threshold become unvoiced and the rest
// are shifted by 2^(semitones / 12). DataQualityError when nothing is voiced.
struct TransferFeatures {
  pitch::F0Track f0;
  std::vector<dsp::LoudnessTrack> loudness;   // scales 0..count-1
  std::size_t length = 0;
};

TransferFeatures transfer_features(const dsp::AudioBuffer& audio, const std::optional<pitch::F0Track>& f0,
                                   double semitones, double voicing_threshold, std::size_t scales);

}  // namespace timbre::cli

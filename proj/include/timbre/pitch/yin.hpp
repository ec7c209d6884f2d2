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
#include <filesystem>

#include "timbre/dsp/audio.hpp"
#include "timbre/pitch/f0_track.hpp"

namespace timbre::pitch {

struct YinOptions {
  std::size_t frame_hop = 32;   // 500 frames/s at 16 kHz
  std::size_t window = 1024;    // integration window of the difference function
  double min_frequency = 50.0;
  double max_frequency = 1100.0;
  double threshold = 0.1;       // absolute threshold on the normalized difference
};

// YIN: cumulative-mean-normalized difference function per frame, first dip
// under the threshold, parabolic refinement. Frames are centred on multiples
// of the hop (reflection padded); floor(size / hop) frames. Confidence is
// 1 - d'(tau) clamped to [0, 1]; frames without a dip are unvoiced (0 Hz) and
// keep the confidence of their deepest minimum.
F0Track track_f0(const dsp::AudioBuffer& x, const YinOptions& options = {});

// Arithmetic mean of the confidences; throws on an empty track.
double mean_confidence(const F0Track& track);

// Linear re-interpolation of a track onto a new frame rate. Output frame i
// sits at time i / frame_rate; unvoiced neighbours are not interpolated into.
F0Track rerate(const F0Track& track, double frame_rate, std::size_t frames);

// CSV with header `time,frequency,confidence`; frame rate from the spacing.
F0Track read_f0_csv(const std::filesystem::path& path);
void write_f0_csv(const F0Track& track, const std::filesystem::path& path);

}  // namespace timbre::pitch

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
#include <string>
#include <vector>

#include "timbre/dsp/audio.hpp"
#include "timbre/dsp/loudness.hpp"
#include "timbre/model/scale_model.hpp"
#include "timbre/pitch/f0_track.hpp"

namespace timbre::trainer {

inline constexpr std::size_t kScales = 4;

struct DatasetSpec {
  std::filesystem::path source;         // directory of WAV files
  int target_rate = 16000;
  double confidence_threshold = 0.85;   // minimum mean YIN confidence per clip
  double train_fraction = 0.85;
  double clip_seconds = 2.0;

  // Clip length in samples at the target rate; a multiple of 256 so every
  // scale sees whole loudness frames.
  std::size_t clip_samples() const;
  void validate() const;
};

struct Clip {
  std::string source;            // file name within the source directory
  std::size_t offset = 0;        // first sample in the resampled file
  double mean_confidence = 0.0;
  std::array<dsp::AudioBuffer, kScales> audio;        // 2, 4, 8, 16 kHz
  std::array<dsp::LoudnessTrack, kScales> loudness;   // per scale, 32-sample hop
  pitch::F0Track f0;                                  // 500 frames/s
};

struct Dataset {
  std::vector<Clip> train;
  std::vector<Clip> eval;
  std::array<model::LoudnessStats, kScales> stats;   // training split only
  std::size_t dropped = 0;
  std::uint64_t seed = 0;

  // dataset.tpck plus a human-readable clips.csv manifest.
  void save(const std::filesystem::path& directory) const;
  static Dataset load(const std::filesystem::path& directory);
};

// Reads every *.wav in sorted order, resamples to the target rate, cuts
// non-overlapping clips (tails dropped), tracks f0, drops clips under the
// confidence threshold and splits the survivors by a seeded shuffle.
// InputError for a missing or WAV-less directory; DataQualityError when no
// clip survives the filter.
Dataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Training split size for n surviving clips: round(n * fraction), kept within
// [1, n - 1] when n > 1 so neither split is empty.
std::size_t train_count(std::size_t clips, double fraction);

}  // namespace timbre::trainer

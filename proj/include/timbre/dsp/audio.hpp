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
#include <vector>

namespace timbre::dsp {

// Mono samples with nominal range [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Throws InputError unless the rate is positive and every sample finite.
void validate(const AudioBuffer& buffer);

// RIFF/WAVE reader for PCM16 and IEEE float32 with any channel count; channels
// are averaged down to mono. PCM16 is scaled by 1/32768.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes mono PCM16. Samples are clamped to [-1, 1] before quantization.
void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);

}  // namespace timbre::dsp

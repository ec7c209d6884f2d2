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
#include <span>
#include <vector>

#include "timbre/dsp/audio.hpp"

namespace timbre::dsp {

// Taps of the Kaiser-windowed sinc low-pass shared by decimation and
// interpolation by `factor`: 2 * 24 * factor + 1 taps, cutoff 0.45 of the low
// sample rate, unit DC gain. The filter is centred on index 24 * factor.
const std::vector<double>& lowpass_taps(std::size_t factor);

// Anti-aliased decimation: rate / factor, ceil(length / factor) samples.
AudioBuffer downsample(const AudioBuffer& x, int factor);

// Windowed-sinc interpolation: rate * factor, length * factor samples.
AudioBuffer upsample(const AudioBuffer& x, int factor);

// Any rate to any rate through the same filter design at the rational ratio
// target / source; ceil(length * target / source) samples.
AudioBuffer resample(const AudioBuffer& x, int target_rate);

// Raw kernels. `out` must hold in.size() * factor samples and is overwritten.
template <typename T>
void upsample_samples(std::span<const T> in, std::size_t factor, std::span<T> out);

// Adjoint of upsample_samples: accumulates the transpose applied to
// `grad_out` into `grad_in` (size grad_out.size() / factor).
template <typename T>
void upsample_adjoint(std::span<const T> grad_out, std::size_t factor, std::span<T> grad_in);

}  // namespace timbre::dsp

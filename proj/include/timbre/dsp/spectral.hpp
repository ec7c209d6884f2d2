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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "timbre/dsp/audio.hpp"

namespace timbre::dsp {

// |STFT| with frames in rows: magnitudes[frame * bins + bin].
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  std::vector<double> magnitudes;

  double at(std::size_t frame, std::size_t bin) const { return magnitudes[frame * bins + bin]; }
};

std::vector<double> hann_window(std::size_t length);

// Periodic Hann window, reflection padding of fft_size / 2 on both ends,
// ceil(length / hop) frames with frame f centred on sample f * hop.
template <typename T>
class StftAnalyzer {
 public:
  StftAnalyzer(std::size_t fft_size, std::size_t hop);

  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t hop() const noexcept { return hop_; }
  std::size_t bins() const noexcept { return fft_size_ / 2 + 1; }
  std::size_t frame_count(std::size_t length) const noexcept { return (length + hop_ - 1) / hop_; }

  // One-sided spectra, frame-major (frames x bins).
  std::vector<std::complex<T>> analyze(std::span<const T> signal) const;

  // Transpose of the real part of `analyze` for real signals: accumulates
  // sum_k Re(weights[f, k] * X_f[k]) derivatives into grad (the signal's
  // gradient when the loss gradient w.r.t. the spectrum is conj(weights)).
  void adjoint(std::span<const std::complex<T>> weights, std::span<T> grad) const;

 private:
  std::size_t fft_size_;
  std::size_t hop_;
  std::vector<T> window_;
};

// Magnitude spectrogram; fft_size must be a power of two no larger than
// twice the signal length.
Spectrogram stft_magnitude(const AudioBuffer& x, std::size_t fft_size, std::size_t hop);

}  // namespace timbre::dsp

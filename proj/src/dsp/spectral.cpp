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

#include "timbre/dsp/spectral.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "timbre/errors.hpp"

namespace timbre::dsp {
namespace {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

long reflect(long index, long length) {
  // Single reflection without repeating the edge sample.
  if (index < 0) index = -index;
  if (index >= length) index = 2 * (length - 1) - index;
  return index;
}

}  // namespace

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
  }
  return w;
}

template <typename T>
StftAnalyzer<T>::StftAnalyzer(std::size_t fft_size, std::size_t hop) : fft_size_(fft_size), hop_(hop) {
  if (!is_power_of_two(fft_size) || fft_size < 2) {
    throw InputError("STFT size must be a power of two, got " + std::to_string(fft_size));
  }
  if (hop == 0) throw InputError("STFT hop must be >= 1");
  const auto w = hann_window(fft_size);
  window_.assign(w.begin(), w.end());
}

template <typename T>
std::vector<std::complex<T>> StftAnalyzer<T>::analyze(std::span<const T> signal) const {
  const long length = static_cast<long>(signal.size());
  if (length <= static_cast<long>(fft_size_ / 2)) {
    throw InputError("STFT: signal of " + std::to_string(length) + " samples is too short for size " +
                     std::to_string(fft_size_));
  }
  const std::size_t frames = frame_count(signal.size());
  const long pad = static_cast<long>(fft_size_ / 2);
  Eigen::FFT<T> fft;
  fft.SetFlag(Eigen::FFT<T>::HalfSpectrum);
  std::vector<T> segment(fft_size_);
  std::vector<std::complex<T>> spectrum;
  std::vector<std::complex<T>> out(frames * bins());
  for (std::size_t f = 0; f < frames; ++f) {
    const long start = static_cast<long>(f * hop_) - pad;
    for (std::size_t n = 0; n < fft_size_; ++n) {
      segment[n] = window_[n] * signal[reflect(start + static_cast<long>(n), length)];
    }
    fft.fwd(spectrum, segment);
    std::copy_n(spectrum.begin(), bins(), out.begin() + static_cast<long>(f * bins()));
  }
  return out;
}

template <typename T>
void StftAnalyzer<T>::adjoint(std::span<const std::complex<T>> weights, std::span<T> grad) const {
  const long length = static_cast<long>(grad.size());
  const std::size_t frames = frame_count(grad.size());
  const long pad = static_cast<long>(fft_size_ / 2);
  Eigen::FFT<T> fft;
  std::vector<std::complex<T>> full(fft_size_);
  std::vector<std::complex<T>> transformed;
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(full.begin(), full.end(), std::complex<T>(0));
    std::copy_n(weights.begin() + static_cast<long>(f * bins()), bins(), full.begin());
    // sum_k W_k exp(-2 pi i k n / N) for every n.
    fft.fwd(transformed, full);
    const long start = static_cast<long>(f * hop_) - pad;
    for (std::size_t n = 0; n < fft_size_; ++n) {
      grad[reflect(start + static_cast<long>(n), length)] += window_[n] * transformed[n].real();
    }
  }
}

Spectrogram stft_magnitude(const AudioBuffer& x, std::size_t fft_size, std::size_t hop) {
  validate(x);
  const StftAnalyzer<double> stft(fft_size, hop);
  const auto spectra = stft.analyze(x.samples);
  Spectrogram s;
  s.fft_size = fft_size;
  s.hop = hop;
  s.bins = stft.bins();
  s.frames = stft.frame_count(x.size());
  s.magnitudes.resize(spectra.size());
  for (std::size_t i = 0; i < spectra.size(); ++i) s.magnitudes[i] = std::abs(spectra[i]);
  return s;
}

template class StftAnalyzer<float>;
template class StftAnalyzer<double>;

}  // namespace timbre::dsp

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

#include "timbre/dsp/resample.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <numbers>

#include "timbre/errors.hpp"

namespace timbre::dsp {
namespace {

constexpr std::size_t kHalfLengthPerFactor = 24;
constexpr double kCutoff = 0.45;      // fraction of the low sample rate
constexpr double kKaiserBeta = 7.0;  // ~70 dB stopband

std::vector<double> design_taps(std::size_t factor) {
  const std::size_t half = kHalfLengthPerFactor * factor;
  const std::size_t length = 2 * half + 1;
  const double fc = kCutoff / static_cast<double>(factor);  // cycles per high-rate sample
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  std::vector<double> taps(length);
  double total = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double m = static_cast<double>(n) - static_cast<double>(half);
    const double arg = 2.0 * fc * m;
    const double sinc = m == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = m / static_cast<double>(half);
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    taps[n] = 2.0 * fc * sinc * window;
    total += taps[n];
  }
  for (double& t : taps) t /= total;
  return taps;
}

void require_factor(int factor) {
  if (factor < 2) throw InputError("resampling factor must be >= 2, got " + std::to_string(factor));
}

}  // namespace

const std::vector<double>& lowpass_taps(std::size_t factor) {
  static std::mutex mutex;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(factor);
  if (it == cache.end()) it = cache.emplace(factor, design_taps(factor)).first;
  return it->second;
}

AudioBuffer downsample(const AudioBuffer& x, int factor) {
  require_factor(factor);
  validate(x);
  const auto m = static_cast<std::size_t>(factor);
  const auto& taps = lowpass_taps(m);
  const long half = static_cast<long>(kHalfLengthPerFactor * m);
  const long n = static_cast<long>(x.size());
  AudioBuffer y;
  y.sample_rate = x.sample_rate / factor;
  y.samples.resize((x.size() + m - 1) / m);
  for (std::size_t t = 0; t < y.samples.size(); ++t) {
    const long center = static_cast<long>(t * m);
    const long lo = std::max(-half, -center);
    const long hi = std::min(half, n - 1 - center);
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) acc += x.samples[center + k] * taps[k + half];
    y.samples[t] = acc;
  }
  return y;
}

template <typename T>
void upsample_samples(std::span<const T> in, std::size_t factor, std::span<T> out) {
  const auto& taps = lowpass_taps(factor);
  const long half = static_cast<long>(kHalfLengthPerFactor * factor);
  const long f = static_cast<long>(factor);
  const long n_in = static_cast<long>(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const long pos = static_cast<long>(i);
    // Inputs k with |pos - k * factor| <= half.
    const long k_lo = std::max(0L, (pos - half + f - 1) / f);
    const long k_hi = std::min(n_in - 1, (pos + half) / f);
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) acc += static_cast<double>(in[k]) * taps[pos - k * f + half];
    out[i] = static_cast<T>(acc * static_cast<double>(factor));
  }
}

template <typename T>
void upsample_adjoint(std::span<const T> grad_out, std::size_t factor, std::span<T> grad_in) {
  const auto& taps = lowpass_taps(factor);
  const long half = static_cast<long>(kHalfLengthPerFactor * factor);
  const long f = static_cast<long>(factor);
  const long n_out = static_cast<long>(grad_out.size());
  for (std::size_t k = 0; k < grad_in.size(); ++k) {
    const long center = static_cast<long>(k) * f;
    const long lo = std::max(0L, center - half);
    const long hi = std::min(n_out - 1, center + half);
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) acc += static_cast<double>(grad_out[i]) * taps[i - center + half];
    grad_in[k] += static_cast<T>(acc * static_cast<double>(factor));
  }
}

AudioBuffer upsample(const AudioBuffer& x, int factor) {
  require_factor(factor);
  validate(x);
  AudioBuffer y;
  y.sample_rate = x.sample_rate * factor;
  y.samples.resize(x.size() * static_cast<std::size_t>(factor));
  upsample_samples<double>(x.samples, static_cast<std::size_t>(factor), y.samples);
  return y;
}

AudioBuffer resample(const AudioBuffer& x, int target_rate) {
  validate(x);
  if (target_rate <= 0) throw InputError("resample: target rate must be positive, got " + std::to_string(target_rate));
  if (target_rate == x.sample_rate) return x;
  if (x.sample_rate % target_rate == 0) return downsample(x, x.sample_rate / target_rate);
  if (target_rate % x.sample_rate == 0) return upsample(x, target_rate / x.sample_rate);
  // Rational L/M: conceptually zero-stuff by L, low-pass, keep every M-th.
  const long g = std::gcd(static_cast<long>(x.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g, down = x.sample_rate / g;
  const auto& taps = lowpass_taps(static_cast<std::size_t>(std::max(up, down)));
  const long half = static_cast<long>(taps.size() / 2);
  const long n = static_cast<long>(x.size());
  AudioBuffer y;
  y.sample_rate = target_rate;
  y.samples.resize(static_cast<std::size_t>((n * up + down - 1) / down));
  for (std::size_t m = 0; m < y.samples.size(); ++m) {
    const long pos = static_cast<long>(m) * down;  // position on the L-times grid
    const long k_lo = std::max(0L, (pos - half + up - 1) / up);
    const long k_hi = std::min(n - 1, (pos + half) / up);
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) acc += x.samples[k] * taps[pos - k * up + half];
    y.samples[m] = acc * static_cast<double>(up);
  }
  return y;
}

template void upsample_samples<float>(std::span<const float>, std::size_t, std::span<float>);
template void upsample_samples<double>(std::span<const double>, std::size_t, std::span<double>);
template void upsample_adjoint<float>(std::span<const float>, std::size_t, std::span<float>);
template void upsample_adjoint<double>(std::span<const double>, std::size_t, std::span<double>);

}  // namespace timbre::dsp

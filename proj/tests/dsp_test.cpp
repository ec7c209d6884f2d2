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

#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "test_support.hpp"
#include "timbre/dsp/audio.hpp"
#include "timbre/dsp/excitation.hpp"
#include "timbre/dsp/loudness.hpp"
#include "timbre/dsp/resample.hpp"
#include "timbre/dsp/spectral.hpp"
#include "timbre/errors.hpp"

using namespace timbre;
using timbre::testing::TempDir;

namespace {

// Hand-assembled RIFF file so the reader is checked against bytes, not the writer.
void write_raw_wav(const std::filesystem::path& path, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits, const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> out;
  auto u16 = [&](std::uint16_t v) { out.push_back(v & 0xFF); out.push_back(v >> 8); };
  auto u32 = [&](std::uint32_t v) { for (int s = 0; s < 32; s += 8) out.push_back((v >> s) & 0xFF); };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF"); u32(36 + static_cast<std::uint32_t>(payload.size())); tag("WAVE");
  tag("fmt "); u32(16); u16(format); u16(channels); u32(rate);
  u32(rate * channels * bits / 8); u16(static_cast<std::uint16_t>(channels * bits / 8)); u16(bits);
  tag("data"); u32(static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(out.data()), static_cast<long>(out.size()));
}

std::vector<unsigned char> pcm16_bytes(const std::vector<std::int16_t>& values) {
  std::vector<unsigned char> bytes;
  for (auto v : values) {
    const auto u = static_cast<std::uint16_t>(v);
    bytes.push_back(u & 0xFF);
    bytes.push_back(u >> 8);
  }
  return bytes;
}

double max_abs_error(const std::vector<double>& a, const std::vector<double>& b, std::size_t begin, std::size_t end) {
  double worst = 0.0;
  for (std::size_t i = begin; i < end; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Sum of random sinusoids below `max_fraction` of the Nyquist frequency.
dsp::AudioBuffer bandlimited(int rate, std::size_t length, double max_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(5.0, max_fraction * rate / 2.0), phase(0.0, 6.283185307179586);
  dsp::AudioBuffer b{std::vector<double>(length, 0.0), rate};
  for (int k = 0; k < 40; ++k) {
    const double f = freq(rng), p = phase(rng);
    for (std::size_t n = 0; n < length; ++n) b.samples[n] += 0.02 * std::sin(6.283185307179586 * f * n / rate + p);
  }
  return b;
}

}  // namespace

TEST_SUITE("wav") {
  TEST_CASE("silent PCM16 file reads as zeros at native rate") {
    TempDir dir("wav");
    write_raw_wav(dir / "zeros.wav", 1, 1, 16000, 16, pcm16_bytes(std::vector<std::int16_t>(16000, 0)));
    const auto b = dsp::read_wav(dir / "zeros.wav");
    CHECK(b.sample_rate == 16000);
    REQUIRE(b.size() == 16000);
    CHECK(std::all_of(b.samples.begin(), b.samples.end(), [](double s) { return s == 0.0; }));
  }

  TEST_CASE("stereo channels are averaged") {
    TempDir dir("wav");
    std::vector<std::int16_t> interleaved;
    for (int i = 0; i < 100; ++i) {
      const auto a = static_cast<std::int16_t>(i * 300 - 15000);
      interleaved.push_back(a);
      interleaved.push_back(static_cast<std::int16_t>(-a));
    }
    write_raw_wav(dir / "stereo.wav", 1, 2, 8000, 16, pcm16_bytes(interleaved));
    const auto b = dsp::read_wav(dir / "stereo.wav");
    REQUIRE(b.size() == 100);
    for (double s : b.samples) CHECK(s == 0.0);
  }

  TEST_CASE("PCM16 scaling and float32 input") {
    TempDir dir("wav");
    write_raw_wav(dir / "half.wav", 1, 1, 16000, 16, pcm16_bytes({16384}));
    CHECK(dsp::read_wav(dir / "half.wav").samples[0] == doctest::Approx(0.5).epsilon(1.0 / 32768));

    std::vector<unsigned char> payload(8);
    const float values[2] = {0.25f, -0.75f};
    std::memcpy(payload.data(), values, 8);
    write_raw_wav(dir / "float.wav", 3, 1, 22050, 32, payload);
    const auto f = dsp::read_wav(dir / "float.wav");
    CHECK(f.sample_rate == 22050);
    CHECK(f.samples == std::vector<double>{0.25, -0.75});
  }

  TEST_CASE("unsupported encodings and missing files fail") {
    TempDir dir("wav");
    write_raw_wav(dir / "pcm24.wav", 1, 1, 16000, 24, std::vector<unsigned char>(30, 0));
    CHECK_THROWS_AS(dsp::read_wav(dir / "pcm24.wav"), InputError);
    CHECK_THROWS_AS(dsp::read_wav(dir / "nope.wav"), InputError);
    std::ofstream(dir / "junk.wav") << "not audio at all";
    CHECK_THROWS_AS(dsp::read_wav(dir / "junk.wav"), InputError);
  }

  TEST_CASE("write/read roundtrip is within one quantization step") {
    TempDir dir("wav");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-0.9, 0.9);
    dsp::AudioBuffer b{std::vector<double>(5000), 16000};
    for (double& s : b.samples) s = dist(rng);
    dsp::write_wav(b, dir / "rt.wav");
    const auto back = dsp::read_wav(dir / "rt.wav");
    REQUIRE(back.size() == b.size());
    CHECK(max_abs_error(b.samples, back.samples, 0, b.size()) <= 1.0 / 32768);
  }

  TEST_CASE("out-of-range samples clamp to full scale") {
    TempDir dir("wav");
    dsp::write_wav({{1.5, -2.0}, 8000}, dir / "clip.wav");
    std::ifstream in(dir / "clip.wav", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() == 48);
    CHECK(static_cast<std::int16_t>(bytes[44] | (bytes[45] << 8)) == 32767);
    CHECK(static_cast<std::int16_t>(bytes[46] | (bytes[47] << 8)) == -32768);
  }

  TEST_CASE("empty buffer writes a valid zero-length file") {
    TempDir dir("wav");
    dsp::write_wav({{}, 16000}, dir / "empty.wav");
    const auto b = dsp::read_wav(dir / "empty.wav");
    CHECK(b.empty());
    CHECK(b.sample_rate == 16000);
  }

  TEST_CASE("invalid buffers are rejected") {
    TempDir dir("wav");
    CHECK_THROWS_AS(dsp::write_wav({{0.0}, 0}, dir / "x.wav"), InputError);
    CHECK_THROWS_AS(dsp::write_wav({{std::nan("")}, 8000}, dir / "x.wav"), InputError);
    CHECK_THROWS_AS(dsp::write_wav({{0.0}, 8000}, dir / "missing_dir" / "x.wav"), InputError);
  }
}

TEST_SUITE("resample") {
  TEST_CASE("filter has unit DC gain") {
    for (std::size_t m : {2u, 4u, 8u}) {
      const auto& taps = dsp::lowpass_taps(m);
      CHECK(taps.size() == 48 * m + 1);
      double total = 0.0;
      for (double t : taps) total += t;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("constant survives decimation") {
    dsp::AudioBuffer x{std::vector<double>(4000, 1.0), 4000};
    const auto y = dsp::downsample(x, 2);
    CHECK(y.sample_rate == 2000);
    REQUIRE(y.size() == 2000);
    for (std::size_t t = 24; t + 24 < y.size(); ++t) CHECK(std::abs(y.samples[t] - 1.0) < 1e-3);
  }

  TEST_CASE("output length is ceil(n / factor)") {
    CHECK(dsp::downsample({std::vector<double>(101, 0.0), 16000}, 8).size() == 13);
    CHECK(dsp::downsample({std::vector<double>(96, 0.0), 16000}, 8).size() == 12);
    CHECK_THROWS_AS(dsp::downsample({std::vector<double>(10, 0.0), 16000}, 1), InputError);
    CHECK_THROWS_AS(dsp::upsample({std::vector<double>(10, 0.0), 16000}, 0), InputError);
  }

  TEST_CASE("in-band tone keeps its amplitude after decimation by 8") {
    const auto x = timbre::testing::sine(100.0, 16000, 16000);
    const auto y = dsp::downsample(x, 8);
    const auto expected = timbre::testing::sine(100.0, 2000, y.size());
    // Interior only: one filter half-length at the output rate is 24 samples.
    CHECK(max_abs_error(y.samples, expected.samples, 30, y.size() - 30) < 0.005);
  }

  TEST_CASE("tones above the new Nyquist are attenuated by at least 60 dB") {
    for (double f : {1000.0, 1200.0, 1900.0, 3100.0, 7000.0}) {
      const auto x = timbre::testing::sine(f, 16000, 32000);
      const auto y = dsp::downsample(x, 8);
      const double ratio_db = 20.0 * std::log10(timbre::testing::rms(y.samples, 30, y.size() - 30) /
                                                timbre::testing::rms(x.samples));
      CAPTURE(f);
      CHECK(ratio_db <= -60.0);
    }
  }

  TEST_CASE("upsampling zeros stays zero") {
    const auto y = dsp::upsample({std::vector<double>(50, 0.0), 2000}, 4);
    CHECK(y.size() == 200);
    CHECK(y.sample_rate == 8000);
    CHECK(std::all_of(y.samples.begin(), y.samples.end(), [](double s) { return s == 0.0; }));
  }

  TEST_CASE("upsampled sine matches the closed form") {
    const auto x = timbre::testing::sine(100.0, 2000, 2000);
    const auto y = dsp::upsample(x, 2);
    const auto expected = timbre::testing::sine(100.0, 4000, 4000);
    std::vector<double> diff(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) diff[i] = y.samples[i] - expected.samples[i];
    CHECK(timbre::testing::rms(diff, 100, 3900) / timbre::testing::rms(expected.samples) < 0.005);
  }

  TEST_CASE("passband gain of the interpolator is flat within 0.5 dB") {
    for (double f : {50.0, 200.0, 300.0, 450.0}) {
      const auto y = dsp::upsample(timbre::testing::sine(f, 2000, 4000), 2);
      const double gain_db = 20.0 * std::log10(timbre::testing::rms(y.samples, 400, 7600) / std::sqrt(0.5));
      CAPTURE(f);
      CHECK(std::abs(gain_db) < 0.5);
    }
  }

  TEST_CASE("down(up(x)) reconstructs band-limited signals") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto x = bandlimited(4000, 4000, 0.6, seed);
      const auto back = dsp::downsample(dsp::upsample(x, 2), 2);
      REQUIRE(back.size() == x.size());
      CHECK(max_abs_error(x.samples, back.samples, 100, x.size() - 100) <= 1e-3);
    }
  }

  TEST_CASE("rational resampling keeps in-band tones and drops the rest") {
    for (int rate : {44100, 22050, 48000, 11025}) {
      const auto x = timbre::testing::sine(440.0, rate, static_cast<std::size_t>(rate));
      const auto y = dsp::resample(x, 16000);
      CAPTURE(rate);
      CHECK(y.sample_rate == 16000);
      CHECK(y.size() == (x.size() * 16000 + rate - 1) / rate);
      const auto expected = timbre::testing::sine(440.0, 16000, y.size());
      CHECK(max_abs_error(y.samples, expected.samples, 800, y.size() - 800) < 0.005);
    }
    const auto high = dsp::resample(timbre::testing::sine(9000.0, 44100, 44100), 16000);
    CHECK(timbre::testing::rms(high.samples, 800, high.size() - 800) < 1e-3);
    const auto same = dsp::resample(timbre::testing::sine(440.0, 16000, 100), 16000);
    CHECK(same.size() == 100);
    CHECK_THROWS_AS(dsp::resample(same, 0), InputError);
  }

  TEST_CASE("upsample adjoint is the transpose") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist;
    std::vector<double> x(37), y(37 * 4), gy(37 * 4), gx(37, 0.0);
    for (double& v : x) v = dist(rng);
    for (double& v : gy) v = dist(rng);
    dsp::upsample_samples<double>(x, 4, y);
    dsp::upsample_adjoint<double>(gy, 4, gx);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * gy[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_SUITE("stft") {
  TEST_CASE("silence has zero magnitude") {
    const auto s = dsp::stft_magnitude({std::vector<double>(1000, 0.0), 16000}, 256, 64);
    CHECK(s.bins == 129);
    CHECK(s.frames == 16);
    CHECK(std::all_of(s.magnitudes.begin(), s.magnitudes.end(), [](double m) { return m == 0.0; }));
  }

  TEST_CASE("impulse gives a flat spectrum scaled by the window") {
    const std::size_t fft = 256, hop = 64, frame = 5;
    const auto window = dsp::hann_window(fft);
    for (long offset : {0L, 10L, -37L}) {
      dsp::AudioBuffer x{std::vector<double>(1024, 0.0), 16000};
      x.samples[frame * hop + offset] = 1.0;
      const auto s = dsp::stft_magnitude(x, fft, hop);
      for (std::size_t k = 0; k < s.bins; ++k) CHECK(s.at(frame, k) == doctest::Approx(window[fft / 2 + offset]).epsilon(1e-12));
    }
  }

  TEST_CASE("tone peaks at f * N / rate") {
    const auto s = dsp::stft_magnitude(timbre::testing::sine(250.0, 2000, 2000), 256, 64);
    for (std::size_t f = 2; f + 2 < s.frames; ++f) {
      std::size_t best = 0;
      for (std::size_t k = 0; k < s.bins; ++k) best = s.at(f, k) > s.at(f, best) ? k : best;
      CHECK(best == 32);
    }
  }

  TEST_CASE("two tones in disjoint bands peak at both bins") {
    auto x = timbre::testing::sine(250.0, 2000, 2000);
    const auto y = timbre::testing::sine(625.0, 2000, 2000, 0.7);
    for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += y.samples[i];
    const auto s = dsp::stft_magnitude(x, 256, 64);
    for (std::size_t f = 2; f + 2 < s.frames; ++f) {
      std::size_t low = 0, high = 64;
      for (std::size_t k = 0; k < 64; ++k) low = s.at(f, k) > s.at(f, low) ? k : low;
      for (std::size_t k = 64; k < s.bins; ++k) high = s.at(f, k) > s.at(f, high) ? k : high;
      CHECK(low == 32);
      CHECK(high == 80);
    }
  }

  TEST_CASE("size must be a power of two") {
    CHECK_THROWS_AS(dsp::stft_magnitude({std::vector<double>(1000, 0.0), 16000}, 300, 64), InputError);
  }

  TEST_CASE("frames agree with a direct DFT") {
    const auto x = timbre::testing::white_noise(16000, 512, 11);
    const std::size_t fft = 128, hop = 32, frame = 6;
    const auto s = dsp::stft_magnitude(x, fft, hop);
    const auto w = dsp::hann_window(fft);
    std::vector<double> seg(fft);
    for (std::size_t n = 0; n < fft; ++n) seg[n] = w[n] * x.samples[frame * hop - fft / 2 + n];
    for (std::size_t k = 0; k < s.bins; ++k) CHECK(s.at(frame, k) == doctest::Approx(timbre::testing::dft_magnitude(seg, k)).epsilon(1e-9));
  }
}

TEST_SUITE("loudness") {
  TEST_CASE("silence sits at the floor") {
    const auto l = dsp::loudness({std::vector<double>(6400, 0.0), 16000});
    REQUIRE(l.size() == 200);
    for (double v : l.values) CHECK(v == dsp::kLoudnessFloorDb);
  }

  TEST_CASE("track length is floor(T / 32)") {
    for (std::size_t n : {256u, 257u, 1000u, 4000u, 6400u, 6431u}) {
      CHECK(dsp::loudness(timbre::testing::white_noise(8000, n, n)).size() == n / 32);
    }
    CHECK_THROWS_AS(dsp::loudness({{}, 16000}), InputError);
    CHECK_THROWS_AS(dsp::loudness({std::vector<double>(100, 0.1), 16000}), InputError);
  }

  TEST_CASE("doubling the gain never lowers loudness") {
    auto x = timbre::testing::harmonic_tone(220.0, 16000, 8000);
    for (std::size_t i = 0; i < 2000; ++i) x.samples[i] *= 1e-9;  // a near-silent head
    auto doubled = x;
    for (double& s : doubled.samples) s *= 2.0;
    const auto a = dsp::loudness(x), b = dsp::loudness(doubled);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b.values[i] >= a.values[i]);
      if (a.values[i] > dsp::kLoudnessFloorDb) CHECK(b.values[i] > a.values[i]);
    }
  }

  TEST_CASE("clean tones register above the floor and track their level") {
    const auto loud = timbre::testing::harmonic_tone(220.0, 2000, 4000, {}, 0.5);
    const auto quiet = timbre::testing::harmonic_tone(220.0, 2000, 4000, {}, 0.05);
    const auto a = dsp::loudness(loud), b = dsp::loudness(quiet);
    for (std::size_t i = 8; i + 8 < a.size(); ++i) {
      CHECK(b.values[i] > dsp::kLoudnessFloorDb);
      CHECK(a.values[i] > b.values[i] + 0.5);
    }
  }

  TEST_CASE("A-weighting reference points") {
    CHECK(dsp::a_weighting_db(1000.0) == doctest::Approx(0.0).epsilon(0.01));
    CHECK(dsp::a_weighting_db(100.0) == doctest::Approx(-19.1).epsilon(0.01));
    CHECK(dsp::a_weighting_db(0.0) == -80.0);
  }
}

TEST_SUITE("excitation") {
  pitch::F0Track constant_track(double f, std::size_t frames, double rate) {
    return {std::vector<double>(frames, f), std::vector<double>(frames, 1.0), rate};
  }

  TEST_CASE("zero f0 gives zero signal") {
    const auto e = dsp::sine_excitation(constant_track(0.0, 50, 500.0), 2000);
    CHECK(e.size() == 200);
    CHECK(std::all_of(e.samples.begin(), e.samples.end(), [](double s) { return s == 0.0; }));
  }

  TEST_CASE("constant f0 telescopes to the closed-form sine") {
    const auto e = dsp::sine_excitation(constant_track(100.0, 250, 500.0), 2000);
    REQUIRE(e.size() == 1000);
    for (std::size_t n = 0; n < e.size(); ++n) {
      CHECK(e.samples[n] == doctest::Approx(std::sin(2.0 * std::numbers::pi * 100.0 * n / 2000.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("440 Hz excitation concentrates its energy at 440 Hz") {
    const auto e = dsp::sine_excitation(constant_track(440.0, 500, 500.0), 16000);
    REQUIRE(e.size() == 16000);
    std::vector<double> windowed(e.size());
    const auto w = dsp::hann_window(e.size());
    for (std::size_t n = 0; n < e.size(); ++n) windowed[n] = w[n] * e.samples[n];
    double total = 0.0, near = 0.0;
    for (std::size_t k = 0; k <= 8000; ++k) {  // 1 Hz bins
      const double m = timbre::testing::dft_magnitude(windowed, k);
      total += m * m;
      if (k >= 435 && k <= 445) near += m * m;
    }
    CHECK(near / total >= 0.99);
  }

  TEST_CASE("unvoiced frames add no phase") {
    auto track = constant_track(200.0, 20, 500.0);
    for (std::size_t i = 10; i < 20; ++i) track.frequencies[i] = 0.0;
    const auto e = dsp::sine_excitation(track, 2000);
    for (std::size_t n = 41; n < e.size(); ++n) CHECK(e.samples[n] == doctest::Approx(e.samples[40]));
    auto low_conf = constant_track(200.0, 20, 500.0);
    for (auto& c : low_conf.confidences) c = 0.2;
    const auto silent = dsp::sine_excitation(low_conf, 2000, {.confidence_threshold = 0.5});
    CHECK(std::all_of(silent.samples.begin(), silent.samples.end(), [](double s) { return s == 0.0; }));
  }

  TEST_CASE("noise is seeded and has the requested spread") {
    const auto track = constant_track(0.0, 1000, 500.0);
    const auto a = dsp::sine_excitation(track, 16000, {.noise_std = 0.003, .seed = 4});
    const auto b = dsp::sine_excitation(track, 16000, {.noise_std = 0.003, .seed = 4});
    const auto c = dsp::sine_excitation(track, 16000, {.noise_std = 0.003, .seed = 5});
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
    CHECK(timbre::testing::rms(a.samples) == doctest::Approx(0.003).epsilon(0.02));
  }

  TEST_CASE("target rate must be a multiple of the frame rate") {
    CHECK_THROWS_AS(dsp::sine_excitation(constant_track(100.0, 10, 500.0), 2100), InputError);
    CHECK_NOTHROW(dsp::sine_excitation(constant_track(100.0, 10, 250.0), 2000));
  }
}

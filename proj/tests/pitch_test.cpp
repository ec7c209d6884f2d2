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
#include <fstream>

#include "test_support.hpp"
#include "timbre/errors.hpp"
#include "timbre/pitch/yin.hpp"

using namespace timbre;
using timbre::testing::TempDir;

namespace {

double median_voiced(const pitch::F0Track& track, std::size_t skip) {
  std::vector<double> voiced;
  for (std::size_t i = skip; i + skip < track.size(); ++i) {
    if (track.frequencies[i] > 0.0) voiced.push_back(track.frequencies[i]);
  }
  if (voiced.empty()) return 0.0;
  std::nth_element(voiced.begin(), voiced.begin() + voiced.size() / 2, voiced.end());
  return voiced[voiced.size() / 2];
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("yin") {
  TEST_CASE("harmonic tones are tracked within 1%") {
    for (double f : {55.0, 100.0, 196.0, 261.63, 440.0, 700.0, 1000.0}) {
      const auto track = pitch::track_f0(timbre::testing::harmonic_tone(f, 16000, 16000));
      CAPTURE(f);
      CHECK(track.size() == 500);
      CHECK(track.frame_rate == 500.0);
      CHECK(median_voiced(track, 20) == doctest::Approx(f).epsilon(0.01));
      std::size_t within = 0, counted = 0;
      for (std::size_t i = 20; i + 20 < track.size(); ++i, ++counted) {
        within += std::abs(track.frequencies[i] - f) <= 0.01 * f ? 1 : 0;
      }
      CHECK(static_cast<double>(within) / counted >= 0.95);
    }
  }

  TEST_CASE("pure sines are tracked at other sample rates") {
    const auto track = pitch::track_f0(timbre::testing::sine(330.0, 8000, 8000), {.frame_hop = 16, .window = 512});
    CHECK(track.frame_rate == 500.0);
    CHECK(median_voiced(track, 20) == doctest::Approx(330.0).epsilon(0.005));
  }

  TEST_CASE("a clean tone is confident") {
    const auto track = pitch::track_f0(timbre::testing::harmonic_tone(440.0, 16000, 32000));
    CHECK(pitch::mean_confidence(track) > 0.9);
  }

  TEST_CASE("silence is unvoiced and noise is not confident") {
    const auto silent = pitch::track_f0({std::vector<double>(16000, 0.0), 16000});
    CHECK(std::all_of(silent.frequencies.begin(), silent.frequencies.end(), [](double f) { return f == 0.0; }));
    const auto noisy = pitch::track_f0(timbre::testing::white_noise(16000, 32000, 3));
    CHECK(pitch::mean_confidence(noisy) < 0.5);
  }

  TEST_CASE("confidences stay within [0, 1]") {
    auto x = timbre::testing::harmonic_tone(150.0, 16000, 16000);
    const auto n = timbre::testing::white_noise(16000, 16000, 8, 0.2);
    for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += n.samples[i];
    const auto track = pitch::track_f0(x);
    for (double c : track.confidences) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  }

  TEST_CASE("too-short input is rejected") {
    CHECK_THROWS_AS(pitch::track_f0({std::vector<double>(1500, 0.0), 16000}), InputError);
    CHECK_THROWS_AS(pitch::track_f0({{}, 16000}), InputError);
  }

  TEST_CASE("rerate keeps a constant track constant") {
    const pitch::F0Track track{std::vector<double>(100, 220.0), std::vector<double>(100, 0.9), 500.0};
    const auto r = pitch::rerate(track, 250.0, 50);
    CHECK(r.size() == 50);
    for (double f : r.frequencies) CHECK(f == doctest::Approx(220.0));
  }
}

TEST_SUITE("f0 csv") {
  TEST_CASE("roundtrip preserves values to 1e-6") {
    TempDir dir("f0");
    pitch::F0Track track{{0.0, 110.5, 220.25, 330.125}, {0.1, 0.95, 0.5, 1.0}, 500.0};
    pitch::write_f0_csv(track, dir / "f0.csv");
    const auto back = pitch::read_f0_csv(dir / "f0.csv");
    CHECK(back.frame_rate == 500.0);
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(back.frequencies[i] == doctest::Approx(track.frequencies[i]).epsilon(1e-6));
      CHECK(back.confidences[i] == doctest::Approx(track.confidences[i]).epsilon(1e-6));
    }
  }

  TEST_CASE("frame rate is inferred from the spacing") {
    TempDir dir("f0");
    write_text(dir / "a.csv", "time,frequency,confidence\n0.000,100,0.9\n0.002,100,0.9\n0.004,101,0.9\n");
    CHECK(pitch::read_f0_csv(dir / "a.csv").frame_rate == 500.0);
    write_text(dir / "b.csv", "time,frequency,confidence\n0.000,100,0.9\n0.004,100,0.9\n0.008,101,0.9\n");
    CHECK(pitch::read_f0_csv(dir / "b.csv").frame_rate == 250.0);
  }

  TEST_CASE("malformed files fail") {
    TempDir dir("f0");
    write_text(dir / "noheader.csv", "0.000,100,0.9\n0.002,100,0.9\n");
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "noheader.csv"), InputError);
    write_text(dir / "short.csv", "time,frequency,confidence\n0.000,100,0.9\n");
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "short.csv"), InputError);
    write_text(dir / "uneven.csv", "time,frequency,confidence\n0.000,100,0.9\n0.002,100,0.9\n0.005,100,0.9\n");
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "uneven.csv"), InputError);
    write_text(dir / "text.csv", "time,frequency,confidence\n0.000,abc,0.9\n0.002,100,0.9\n");
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "text.csv"), InputError);
    write_text(dir / "negative.csv", "time,frequency,confidence\n0.000,-5,0.9\n0.002,100,0.9\n");
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "negative.csv"), InputError);
    CHECK_THROWS_AS(pitch::read_f0_csv(dir / "absent.csv"), InputError);
  }
}

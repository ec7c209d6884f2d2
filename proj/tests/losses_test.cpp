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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "timbre/errors.hpp"
#include "timbre/losses/losses.hpp"
#include "timbre/nn/gradcheck.hpp"
#include "timbre/nn/ops.hpp"
#include "timbre/nn/signal_ops.hpp"

using namespace timbre;
using namespace timbre::nn;
using V = Var<double>;

namespace {

V signal(const std::vector<double>& x, bool grad = false) { return V(Tensor<double>({1, 1, x.size()}, x), grad); }

std::vector<double> noise(std::size_t n, std::uint64_t seed, double spread = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, spread);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

struct OracleTerms {
  double ratio;
  double log_l1;
};

// Direct-DFT reference: reflection padding by m/2, periodic Hann, hop m/4,
// ceil(T/hop) frames, one-sided bins.
std::vector<std::vector<double>> oracle_magnitudes(const std::vector<double>& x, std::size_t m) {
  const long n = static_cast<long>(x.size()), hop = static_cast<long>(m / 4);
  const long frames = (n + hop - 1) / hop;
  std::vector<std::vector<double>> mags;
  for (long f = 0; f < frames; ++f) {
    std::vector<double> row;
    for (std::size_t k = 0; k <= m / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        long idx = f * hop - static_cast<long>(m / 2) + static_cast<long>(j);
        if (idx < 0) idx = -idx;
        if (idx >= n) idx = 2 * (n - 1) - idx;
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(j) / double(m));
        acc += w * x[idx] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * j) / double(m));
      }
      row.push_back(std::abs(acc));
    }
    mags.push_back(row);
  }
  return mags;
}

OracleTerms oracle_terms(const std::vector<double>& ref, const std::vector<double>& est, std::size_t m) {
  const auto s = oracle_magnitudes(ref, m), e = oracle_magnitudes(est, m);
  double num = 0.0, den = 0.0, l1 = 0.0, count = 0.0;
  for (std::size_t f = 0; f < s.size(); ++f) {
    for (std::size_t k = 0; k < s[f].size(); ++k) {
      num += (s[f][k] - e[f][k]) * (s[f][k] - e[f][k]);
      den += s[f][k] * s[f][k];
      l1 += std::abs(std::log(std::max(s[f][k], 1e-5)) - std::log(std::max(e[f][k], 1e-5)));
      count += 1.0;
    }
  }
  return {std::sqrt(num) / std::sqrt(den), l1 / count};
}

// Log-magnitude terms are sharply curved at near-empty bins, so the central
// difference needs a small step to resolve them (truncation error ~ h^2 / |X|^3).
constexpr double kSpectralStep = 1e-7;

V constant_scores(double value, std::size_t steps = 17) {
  return V(Tensor<double>({2, 1, steps}, value));
}

pitch::EmbedderConfig toy_embedder_config() {
  pitch::EmbedderConfig c;
  c.frame = 64;
  c.hop = 32;
  c.channels = 3;
  c.kernels = {5, 3, 3, 3, 3, 3};
  c.bins = 8;
  return c;
}

}  // namespace

TEST_SUITE("spectral loss") {
  TEST_CASE("identical signals give zero") {
    const auto x = signal(noise(1024, 1));
    CHECK(losses::spectral_loss(x, x, 256).value()[0] == 0.0);
    CHECK(losses::multires_spectral_loss(signal(noise(4096, 2)), signal(noise(4096, 2))).value()[0] == 0.0);
  }

  TEST_CASE("against silence the ratio term is exactly one") {
    const auto ref = noise(1024, 3);
    const double value = losses::spectral_loss(signal(ref), signal(std::vector<double>(1024, 0.0)), 256).value()[0];
    const auto terms = oracle_terms(ref, std::vector<double>(1024, 0.0), 256);
    CHECK(terms.ratio == 1.0);
    CHECK(value - terms.log_l1 == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("matches a brute-force DFT over 50 seeds") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto ref = noise(1024, 100 + seed), est = noise(1024, 200 + seed, 0.1 + 0.01 * double(seed));
      const auto terms = oracle_terms(ref, est, 256);
      const double value = losses::spectral_loss(signal(ref), signal(est), 256).value()[0];
      CAPTURE(seed);
      CHECK(std::abs(value - (terms.ratio + terms.log_l1)) <= 1e-6);
    }
  }

  TEST_CASE("batch items are averaged") {
    const auto a = noise(512, 5), b = noise(512, 6), c = noise(512, 7), d = noise(512, 8);
    std::vector<double> ref(a), est(c);
    ref.insert(ref.end(), b.begin(), b.end());
    est.insert(est.end(), d.begin(), d.end());
    const double joint = losses::spectral_loss(V(Tensor<double>({2, 1, 512}, ref)), V(Tensor<double>({2, 1, 512}, est)), 128)
                             .value()[0];
    const double first = losses::spectral_loss(signal(a), signal(c), 128).value()[0];
    const double second = losses::spectral_loss(signal(b), signal(d), 128).value()[0];
    CHECK(joint == doctest::Approx(0.5 * (first + second)).epsilon(1e-12));
  }

  TEST_CASE("multires is the mean of the six resolutions") {
    const auto ref = signal(noise(4096, 9)), est = signal(noise(4096, 10));
    double sum = 0.0;
    for (std::size_t m : losses::kResolutions) sum += losses::spectral_loss(ref, est, m).value()[0];
    CHECK(std::abs(losses::multires_spectral_loss(ref, est).value()[0] - sum / 6.0) <= 1e-9);
  }

  TEST_CASE("losses are non-negative") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CHECK(losses::multires_spectral_loss(signal(noise(2048, seed)), signal(noise(2048, seed + 50))).value()[0] > 0.0);
    }
  }

  TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(losses::spectral_loss(signal(std::vector<double>(512, 0.0)), signal(noise(512, 1)), 128), InputError);
    CHECK_THROWS_AS(losses::spectral_loss(signal(noise(512, 1)), signal(noise(511, 1)), 128), InputError);
    CHECK_THROWS_AS(losses::spectral_loss(signal(noise(100, 1)), signal(noise(100, 1)), 128), InputError);
    CHECK_THROWS_AS(losses::multires_spectral_loss(signal(noise(1500, 1)), signal(noise(1500, 2))), InputError);
  }

  TEST_CASE("gradients match finite differences on toy resolutions") {
    const std::array<std::size_t, 3> sizes = {64, 32, 16};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto ref = signal(noise(64, seed));
      auto est = signal(noise(64, seed + 1000), true);
      const auto report = finite_diff_check([&] { return losses::multires_spectral_loss(ref, est, sizes); }, {est},
                                           kSpectralStep);
      CAPTURE(seed);
      CHECK(report.max_relative_error <= 1e-4);
    }
  }

  TEST_CASE("multires gradient on a 2048-sample pair") {
    const auto ref = signal(noise(2048, 77));
    auto est = signal(noise(2048, 78), true);
    const auto report = finite_diff_check([&] { return losses::multires_spectral_loss(ref, est); }, {est}, kSpectralStep);
    CHECK(report.max_relative_error <= 1e-4);
  }
}

TEST_SUITE("adversarial losses") {
  TEST_CASE("closed-form table for constant discriminators") {
    CHECK(losses::lsgan_d_loss(constant_scores(1.0), constant_scores(0.0)).value()[0] == 0.0);
    CHECK(losses::lsgan_d_loss(constant_scores(0.5), constant_scores(0.5)).value()[0] == doctest::Approx(0.5));
    CHECK(losses::lsgan_d_loss(constant_scores(0.0), constant_scores(1.0)).value()[0] == doctest::Approx(2.0));
    CHECK(losses::adversarial_g_loss(constant_scores(1.0)).value()[0] == 0.0);
    CHECK(losses::adversarial_g_loss(constant_scores(0.0)).value()[0] == doctest::Approx(1.0));
  }

  TEST_CASE("table does not depend on the score length") {
    for (std::size_t steps : {1u, 5u, 300u}) {
      CHECK(losses::lsgan_d_loss(constant_scores(0.5, steps), constant_scores(0.5, steps)).value()[0] ==
            doctest::Approx(0.5));
    }
  }

  TEST_CASE("generator gradient flows through the discriminator") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> dist(0.0, 0.5);
      auto make = [&](const Shape& s, bool grad) {
        Tensor<double> t(s);
        for (double& v : t.storage()) v = dist(rng);
        return V(std::move(t), grad);
      };
      const auto z = make({1, 1, 32}, false);
      auto gw = make({1, 1, 3}, true), gb = make({1}, true);
      const auto dw1 = make({4, 1, 3}, false), db1 = make({4}, false), dw2 = make({1, 4, 3}, false), db2 = make({1}, false);
      auto f = [&] {
        const auto fake = nn::tanh(conv1d(z, gw, gb));
        const auto scores = conv1d(leaky_relu(conv1d(fake, dw1, db1)), dw2, db2);
        return losses::adversarial_g_loss(scores);
      };
      CHECK(finite_diff_check(f, {gw, gb}).max_relative_error <= 1e-4);
    }
  }
}

TEST_SUITE("perceptual loss") {
  TEST_CASE("identity and symmetry") {
    const pitch::PitchEmbedder<double> embedder(toy_embedder_config(), 3);
    const auto a = signal(noise(40, 1)), b = signal(noise(40, 2));
    CHECK(losses::perceptual_loss(embedder, a, a, 4).value()[0] == 0.0);
    CHECK(losses::perceptual_loss(embedder, a, b, 4).value()[0] ==
          losses::perceptual_loss(embedder, b, a, 4).value()[0]);
    CHECK(losses::perceptual_loss(embedder, a, b, 4).value()[0] > 0.0);
    CHECK_THROWS_AS(losses::perceptual_loss(embedder, signal(noise(10, 1)), signal(noise(10, 2)), 4), InputError);
  }

  TEST_CASE("gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const pitch::PitchEmbedder<double> embedder(toy_embedder_config(), seed);
      const auto ref = signal(noise(24, seed));
      auto est = signal(noise(24, seed + 99), true);
      const auto report = finite_diff_check([&] { return losses::perceptual_loss(embedder, ref, est, 4); }, {est});
      CAPTURE(seed);
      CHECK(report.max_relative_error <= 1e-4);
    }
  }

  TEST_CASE("sinc upsample gradient") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto x = V(Tensor<double>({2, 1, 16}, noise(32, seed)), true);
      std::mt19937_64 rng(seed);
      Tensor<double> r({2, 1, 32});
      for (double& v : r.storage()) v = std::normal_distribution<double>()(rng);
      const V proj(r);
      CHECK(finite_diff_check([&] { return sum(mul(sinc_upsample(x, 2), proj)); }, {x}).max_relative_error <= 1e-4);
    }
  }
}

TEST_SUITE("total loss") {
  TEST_CASE("weighted sum") {
    const V recon(Tensor<double>({1}, {0.5})), adv(Tensor<double>({1}, {0.2})), percep(Tensor<double>({1}, {0.3}));
    CHECK(losses::total_g_loss<double>(recon, adv, percep, {1.0, 1.0}).value()[0] == doctest::Approx(1.0));
    CHECK(losses::total_g_loss<double>(recon, adv, percep, {0.0, 0.0}).value()[0] == 0.5);
    CHECK(losses::total_g_loss<double>(recon, adv, percep, {2.0, 0.0}).value()[0] == doctest::Approx(0.9));
    CHECK(losses::total_g_loss<double>(recon, std::nullopt, percep, {1.0, 3.0}).value()[0] == doctest::Approx(1.4));
    CHECK_THROWS_AS(losses::total_g_loss<double>(recon, adv, percep, {-1.0, 1.0}), InputError);
  }

  TEST_CASE("a NaN component is named") {
    const V recon(Tensor<double>({1}, {0.5})), bad(Tensor<double>({1}, {std::nan("")}));
    try {
      losses::total_g_loss<double>(recon, bad, std::nullopt, {});
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("adversarial") != std::string::npos);
    }
    CHECK_THROWS_AS(losses::total_g_loss<double>(bad, std::nullopt, std::nullopt, {}), NumericalError);
  }
}

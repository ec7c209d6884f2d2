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

#include "timbre/losses/losses.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "timbre/dsp/spectral.hpp"
#include "timbre/errors.hpp"
#include "timbre/nn/ops.hpp"
#include "timbre/nn/parallel.hpp"
#include "timbre/nn/signal_ops.hpp"

namespace timbre::losses {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InputError("loss weights must be non-negative");
}

namespace {

void require_signal_pair(const nn::Shape& a, const nn::Shape& b, const char* op) {
  if (a.size() != 3 || a[1] != 1) throw InputError(std::string(op) + ": expected (batch, 1, time), got " + nn::to_string(a));
  if (a != b) throw InputError(std::string(op) + ": length mismatch " + nn::to_string(a) + " vs " + nn::to_string(b));
}

}  // namespace

template <typename T>
nn::Var<T> spectral_loss(const nn::Var<T>& reference, const nn::Var<T>& estimate, std::size_t fft_size) {
  require_signal_pair(reference.shape(), estimate.shape(), "spectral_loss");
  const std::size_t batch = reference.dim(0), steps = reference.dim(2);
  if (steps < fft_size) {
    throw InputError("spectral_loss: " + std::to_string(steps) + " samples is shorter than fft size " +
                     std::to_string(fft_size));
  }
  const dsp::StftAnalyzer<T> stft(fft_size, fft_size / 4);
  const bool want_grad = nn::grad_enabled() && estimate.requires_grad();

  std::vector<double> per_item(batch, 0.0);
  std::vector<std::string> failures(batch);
  // d(loss_b)/dX^ as conjugate weights for the adjoint STFT.
  std::vector<std::vector<std::complex<T>>> weights(want_grad ? batch : 0);
  nn::parallel_for(batch, [&](std::size_t b) {
    const auto x = stft.analyze(std::span<const T>(reference.value().data() + b * steps, steps));
    const auto y = stft.analyze(std::span<const T>(estimate.value().data() + b * steps, steps));
    const std::size_t n = x.size();
    double ref_sq = 0.0, diff_sq = 0.0, log_l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::abs(x[i]), s_hat = std::abs(y[i]);
      ref_sq += s * s;
      diff_sq += (s - s_hat) * (s - s_hat);
      log_l1 += std::abs(std::log(std::max(s, kLogFloor)) - std::log(std::max(s_hat, kLogFloor)));
    }
    if (ref_sq == 0.0) {
      failures[b] = "spectral_loss: reference item " + std::to_string(b) + " is silent (undefined ratio)";
      return;
    }
    const double ref_norm = std::sqrt(ref_sq), diff_norm = std::sqrt(diff_sq);
    per_item[b] = diff_norm / ref_norm + log_l1 / double(n);
    if (!want_grad) return;
    auto& w = weights[b];
    w.assign(n, std::complex<T>(0));
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::abs(x[i]), s_hat = std::abs(y[i]);
      if (s_hat == 0.0) continue;  // subgradient 0 at the origin
      double d = diff_norm > 0.0 ? (s_hat - s) / (diff_norm * ref_norm) : 0.0;
      if (s_hat > kLogFloor) {
        const double gap = std::log(std::max(s, kLogFloor)) - std::log(s_hat);
        d += (gap > 0.0 ? -1.0 : (gap < 0.0 ? 1.0 : 0.0)) / (double(n) * s_hat);
      }
      w[i] = std::conj(y[i]) * static_cast<T>(d / s_hat);
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw InputError(f);
  }
  double total = 0.0;
  for (double v : per_item) total += v;
  nn::Tensor<T> out({1}, std::vector<T>{static_cast<T>(total / double(batch))});
  return nn::make_result<T>(std::move(out), {estimate}, [=, weights = std::move(weights)](nn::Node<T>& node) {
    auto& in = *node.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const T scale = node.grad[0] / static_cast<T>(batch);
    nn::parallel_for(batch, [&](std::size_t b) {
      std::vector<std::complex<T>> w(weights[b].begin(), weights[b].end());
      for (auto& v : w) v *= scale;
      stft.adjoint(w, std::span<T>(g.data() + b * steps, steps));
    });
  });
}

template <typename T>
nn::Var<T> multires_spectral_loss(const nn::Var<T>& reference, const nn::Var<T>& estimate,
                                  std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw InputError("multires_spectral_loss: no resolutions");
  nn::Var<T> total;
  for (std::size_t m : sizes) {
    auto term = spectral_loss(reference, estimate, m);
    total = total ? nn::add(total, term) : term;
  }
  return nn::scale(total, static_cast<T>(1.0 / double(sizes.size())));
}

double multires_spectral_distance(const dsp::AudioBuffer& reference, const dsp::AudioBuffer& estimate) {
  if (reference.size() != estimate.size()) {
    throw InputError("multires_spectral_distance: length mismatch " + std::to_string(reference.size()) + " vs " +
                     std::to_string(estimate.size()));
  }
  nn::NoGradGuard guard;
  const nn::Shape shape{1, 1, reference.size()};
  const nn::Var<double> r(nn::Tensor<double>(shape, reference.samples));
  const nn::Var<double> e(nn::Tensor<double>(shape, estimate.samples));
  return multires_spectral_loss(r, e).value()[0];
}

template <typename T>
nn::Var<T> lsgan_d_loss(const nn::Var<T>& real_scores, const nn::Var<T>& fake_scores) {
  return nn::add(nn::mean_squared_offset(real_scores, T(1)), nn::mean_squared_offset(fake_scores, T(0)));
}

template <typename T>
nn::Var<T> adversarial_g_loss(const nn::Var<T>& fake_scores) {
  return nn::mean_squared_offset(fake_scores, T(1));
}

template <typename T>
nn::Var<T> perceptual_loss(const pitch::PitchEmbedder<T>& embedder, const nn::Var<T>& reference,
                           const nn::Var<T>& estimate, std::size_t upsample_factor) {
  require_signal_pair(reference.shape(), estimate.shape(), "perceptual_loss");
  const auto a = embedder.embed(nn::sinc_upsample(reference, upsample_factor));
  const auto b = embedder.embed(nn::sinc_upsample(estimate, upsample_factor));
  return nn::mean_abs_diff(a, b);
}

template <typename T>
nn::Var<T> total_g_loss(const nn::Var<T>& recon, const std::optional<nn::Var<T>>& adv,
                        const std::optional<nn::Var<T>>& percep, const LossWeights& weights) {
  weights.validate();
  auto check = [](const nn::Var<T>& v, const char* name) {
    if (v.value().size() != 1) throw InputError(std::string("total_g_loss: ") + name + " loss is not a scalar");
    if (!std::isfinite(static_cast<double>(v.value()[0]))) {
      throw NumericalError(std::string(name) + " loss is not finite");
    }
  };
  check(recon, "reconstruction");
  auto total = recon;
  if (adv && weights.alpha > 0.0) {
    check(*adv, "adversarial");
    total = nn::add(total, nn::scale(*adv, static_cast<T>(weights.alpha)));
  }
  if (percep && weights.beta > 0.0) {
    check(*percep, "perceptual");
    total = nn::add(total, nn::scale(*percep, static_cast<T>(weights.beta)));
  }
  return total;
}

#define TIMBRE_INSTANTIATE_LOSSES(T)                                                                             \
  template nn::Var<T> spectral_loss(const nn::Var<T>&, const nn::Var<T>&, std::size_t);                          \
  template nn::Var<T> multires_spectral_loss(const nn::Var<T>&, const nn::Var<T>&, std::span<const std::size_t>); \
  template nn::Var<T> lsgan_d_loss(const nn::Var<T>&, const nn::Var<T>&);                                        \
  template nn::Var<T> adversarial_g_loss(const nn::Var<T>&);                                                     \
  template nn::Var<T> perceptual_loss(const pitch::PitchEmbedder<T>&, const nn::Var<T>&, const nn::Var<T>&,      \
                                      std::size_t);                                                              \
  template nn::Var<T> total_g_loss(const nn::Var<T>&, const std::optional<nn::Var<T>>&,                          \
                                   const std::optional<nn::Var<T>>&, const LossWeights&);

TIMBRE_INSTANTIATE_LOSSES(float)
TIMBRE_INSTANTIATE_LOSSES(double)

}  // namespace timbre::losses

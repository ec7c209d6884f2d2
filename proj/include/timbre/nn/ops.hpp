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
#include <optional>

#include "timbre/nn/autograd.hpp"

// Differentiable primitives. Activations are (batch, channels, time) unless
// stated otherwise; every op records its backward pass when grad mode is on.
namespace timbre::nn {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);

template <typename T>
Var<T> tanh(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T negative_slope = T(0.2));

// tanh(first half of channels) * sigmoid(second half): (B, 2C, T) -> (B, C, T).
template <typename T>
Var<T> gated_activation(const Var<T>& x);

// Repeats every time step `factor` times.
template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor);

// Per (batch, channel) standardization over time, no affine parameters.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

// Kernel g * v / ||v|| with the norm taken per output channel (first axis).
template <typename T>
Var<T> weight_norm(const Var<T>& direction, const Var<T>& magnitude);

template <typename T>
struct Conv1dOptions {
  std::size_t dilation = 1;
  // Added to the convolution output before scaling; same shape as the output.
  std::optional<Var<T>> addend;
  // Multiplies the whole result: out = scale * (conv(x) + bias + addend).
  T scale = T(1);
};

// Dilated cross-correlation with zero "same" padding of dilation*(K-1)/2 per
// side. x: (B, Cin, T), weight: (Cout, Cin, K) with K odd, bias: (Cout).
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const Conv1dOptions<T>& options = {});

// Non-overlapping max over windows of `size`; a partial tail window is dropped.
template <typename T>
Var<T> max_pool1d(const Var<T>& x, std::size_t size);

// Cuts (B, 1, T) into frames of `length` every `hop`: (B * F, 1, length).
template <typename T>
Var<T> frame_signal(const Var<T>& x, std::size_t length, std::size_t hop);

template <typename T>
Var<T> slice_time(const Var<T>& x, std::size_t start, std::size_t length);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// x: (N, D), weight: (O, D), bias: (O) -> (N, O).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);

// mean(|a - b|)
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);

// mean((x - target)^2)
template <typename T>
Var<T> mean_squared_offset(const Var<T>& x, T target);

// Mean over rows of -sum_k target_k * log softmax(logits)_k. logits: (N, K).
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const Tensor<T>& target);

}  // namespace timbre::nn

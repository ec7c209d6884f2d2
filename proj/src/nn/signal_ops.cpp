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

#include "timbre/nn/signal_ops.hpp"

#include <span>

#include "timbre/dsp/resample.hpp"
#include "timbre/errors.hpp"

namespace timbre::nn {

template <typename T>
Var<T> sinc_upsample(const Var<T>& x, std::size_t factor) {
  if (x.shape().size() != 3) throw InputError("sinc_upsample: expected (batch, channels, time), got " + to_string(x.shape()));
  if (factor == 0) throw InputError("sinc_upsample: factor must be positive");
  if (factor == 1) return x;
  const std::size_t rows = x.dim(0) * x.dim(1), steps = x.dim(2), out_steps = steps * factor;
  Tensor<T> out({x.dim(0), x.dim(1), out_steps});
  for (std::size_t r = 0; r < rows; ++r) {
    dsp::upsample_samples<T>(std::span<const T>(x.value().data() + r * steps, steps), factor,
                             std::span<T>(out.data() + r * out_steps, out_steps));
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& node) {
    auto& in = *node.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      dsp::upsample_adjoint<T>(std::span<const T>(node.grad.data() + r * out_steps, out_steps), factor,
                               std::span<T>(g.data() + r * steps, steps));
    }
  });
}

template Var<float> sinc_upsample(const Var<float>&, std::size_t);
template Var<double> sinc_upsample(const Var<double>&, std::size_t);

}  // namespace timbre::nn

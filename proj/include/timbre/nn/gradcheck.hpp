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

#include <functional>
#include <vector>

#include "timbre/nn/autograd.hpp"

namespace timbre::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;  // position in the inputs list
  std::size_t worst_index = 0;  // flat element index within that input
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of a scalar computation against central
// differences, one coordinate at a time. Relative error per coordinate is
// |analytic - numeric| / max(1, |numeric|). `computation` must rebuild its
// graph from the current values of `inputs` on every call.
GradCheckReport finite_diff_check(const std::function<Var<double>()>& computation,
                                  std::vector<Var<double>> inputs, double step = 1e-5);

}  // namespace timbre::nn

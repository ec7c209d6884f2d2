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

#include "timbre/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace timbre::nn {

GradCheckReport finite_diff_check(const std::function<Var<double>()>& computation,
                                  std::vector<Var<double>> inputs, double step) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  backward(computation());
  std::vector<Tensor<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) {
    analytic.push_back(in.has_grad() ? in.grad() : Tensor<double>(in.shape()));
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& values = inputs[k].mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = computation().value()[0];
      values[i] = saved - step;
      const double minus = computation().value()[0];
      values[i] = saved;

      const double numeric = (plus - minus) / (2.0 * step);
      const double error = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      ++report.coordinates;
      if (error > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = error;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = analytic[k][i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace timbre::nn

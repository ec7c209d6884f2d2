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

#include "timbre/nn/autograd.hpp"

namespace timbre::nn {

// Windowed-sinc interpolation along time, (B, C, T) -> (B, C, T * factor).
// Linear, so the backward pass is the filter's transpose. factor 1 is identity.
template <typename T>
Var<T> sinc_upsample(const Var<T>& x, std::size_t factor);

}  // namespace timbre::nn

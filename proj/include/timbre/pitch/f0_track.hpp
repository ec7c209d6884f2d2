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
#include <vector>

namespace timbre::pitch {

// Frame-rate fundamental frequency. A frequency of 0 marks an unvoiced frame.
struct F0Track {
  std::vector<double> frequencies;  // Hz
  std::vector<double> confidences;  // [0, 1]
  double frame_rate = 0.0;          // frames per second

  std::size_t size() const noexcept { return frequencies.size(); }
  bool empty() const noexcept { return frequencies.empty(); }
};

}  // namespace timbre::pitch

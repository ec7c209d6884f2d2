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

#include <cstdint>
#include <filesystem>
#include <string>

#include "timbre/pitch/embedder.hpp"
#include "timbre/trainer/dataset.hpp"
#include "timbre/trainer/trainer.hpp"

namespace timbre::cli {

// Sectioned key = value text. Keys before the first section header belong to
// the top level ("seed"). Comments start with '#' or ';'. Every key is
// optional and defaults to the library defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  trainer::DatasetSpec dataset;            // [dataset]
  trainer::TrainSchedule schedule;         // [schedule]
  pitch::EmbedderTrainOptions embedder;    // [embedder]
  std::filesystem::path embedder_path;     // [paths] embedder
  double voicing_threshold = 0.5;          // [transfer] minimum YIN confidence

  // InputError with the line number for syntax errors, unknown sections or
  // keys, and malformed values.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  // Canonical form listing every field; parse(to_string()) round-trips.
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;
};

}  // namespace timbre::cli

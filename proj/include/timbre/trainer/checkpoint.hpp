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
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "timbre/nn/parameters.hpp"
#include "timbre/nn/tensor.hpp"

namespace timbre::trainer {

// Self-describing little-endian container of named arrays:
//   "TPCK" | version u32 | count u32 | entries...
//   entry: name_len u16 | name | dtype u8 | rank u8 | dims u64[rank] | values
// dtype codes: 0 = f32, 1 = f64, 2 = u64.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;
  using Array = std::variant<nn::Tensor<float>, nn::Tensor<double>, nn::Tensor<std::uint64_t>>;

  // Inserting an existing name replaces it in place (order is kept).
  void put(const std::string& name, Array value);
  void put_scalar(const std::string& name, double value);
  void put_u64(const std::string& name, std::uint64_t value);
  void put_u64s(const std::string& name, std::vector<std::uint64_t> values);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Array& get(const std::string& name) const;
  // Typed accessors; a wrong dtype is an InputError.
  const nn::Tensor<float>& f32(const std::string& name) const;
  const nn::Tensor<double>& f64(const std::string& name) const;
  const nn::Tensor<std::uint64_t>& u64s(const std::string& name) const;
  double scalar(const std::string& name) const;
  std::uint64_t u64(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return entries_.size(); }

  // Written to a sibling temporary then renamed, so a crash never leaves a
  // truncated file under the final name.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, Array>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameters under "<prefix>/<name>", Adam moments under
// "<prefix>/<name>@m" and "@v", step counts under "@step".
template <typename T>
void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterStore<T>& store,
                      bool with_optimizer = true);

// Fills an existing store whose names and shapes must match. Optimizer state
// is restored when present and reset otherwise.
template <typename T>
void load_parameters(const Checkpoint& ckpt, const std::string& prefix, nn::ParameterStore<T>& store);

void store_rng(Checkpoint& ckpt, const std::string& name, const std::mt19937_64& rng);
std::mt19937_64 load_rng(const Checkpoint& ckpt, const std::string& name);

}  // namespace timbre::trainer

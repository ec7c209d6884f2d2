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
#include <string>
#include <unordered_map>
#include <vector>

#include "timbre/nn/autograd.hpp"

namespace timbre::nn {

template <typename T>
struct AdamState {
  Tensor<T> first_moment;
  Tensor<T> second_moment;
  std::uint64_t step = 0;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named trainable tensors with their optimizer state. Copies are deep: the
// copy owns fresh graph leaves holding equal values.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var<T> param;
    AdamState<T> adam;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  // Registers a new trainable leaf; names must be unique.
  const Var<T>& add(const std::string& name, Tensor<T> initial);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Var<T>& get(const std::string& name) const;
  Var<T>& get(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void reset_optimizer();
  void set_trainable(bool trainable);

  // Overwrites values from `source`, which must hold the same names and shapes.
  void copy_values_from(const ParameterStore& source);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Bias-corrected Adam on every parameter of the store using its current
// gradient. Throws InputError for a missing gradient and NumericalError
// (naming the parameter) for a non-finite one.
template <typename T>
void adam_step(ParameterStore<T>& store, const AdamOptions& options);

}  // namespace timbre::nn

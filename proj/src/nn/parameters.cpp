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

#include "timbre/nn/parameters.hpp"

#include <cmath>
#include <utility>

namespace timbre::nn {

template <typename T>
ParameterStore<T>::ParameterStore(const ParameterStore& other) : index_(other.index_) {
  entries_.reserve(other.entries_.size());
  for (const auto& e : other.entries_) {
    entries_.push_back({e.name, Var<T>(e.param.value(), e.param.requires_grad()), e.adam});
  }
}

template <typename T>
ParameterStore<T>& ParameterStore<T>::operator=(const ParameterStore& other) {
  if (this != &other) {
    ParameterStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
const Var<T>& ParameterStore<T>::add(const std::string& name, Tensor<T> initial) {
  if (contains(name)) throw InputError("parameter store: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({name, Var<T>(std::move(initial), true), {}});
  return entries_.back().param;
}

template <typename T>
const typename ParameterStore<T>::Entry& ParameterStore<T>::entry(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InputError("parameter store: no parameter named '" + name + "'");
  return entries_[it->second];
}

template <typename T>
typename ParameterStore<T>::Entry& ParameterStore<T>::entry(const std::string& name) {
  return const_cast<Entry&>(std::as_const(*this).entry(name));
}

template <typename T>
const Var<T>& ParameterStore<T>::get(const std::string& name) const {
  return entry(name).param;
}

template <typename T>
Var<T>& ParameterStore<T>::get(const std::string& name) {
  return entry(name).param;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.param.value().size();
  return total;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.param.zero_grad();
}

template <typename T>
void ParameterStore<T>::reset_optimizer() {
  for (auto& e : entries_) e.adam = AdamState<T>{};
}

template <typename T>
void ParameterStore<T>::set_trainable(bool trainable) {
  for (auto& e : entries_) e.param.set_requires_grad(trainable);
}

template <typename T>
void ParameterStore<T>::copy_values_from(const ParameterStore& source) {
  if (source.size() != size()) {
    throw InputError("parameter store: cannot copy " + std::to_string(source.size()) + " tensors into " +
                     std::to_string(size()));
  }
  for (auto& e : entries_) {
    const auto& src = source.get(e.name);
    if (src.shape() != e.param.shape()) {
      throw InputError("parameter store: shape mismatch for '" + e.name + "': " + to_string(src.shape()) +
                       " vs " + to_string(e.param.shape()));
    }
    e.param.mutable_value() = src.value();
  }
}

template <typename T>
void adam_step(ParameterStore<T>& store, const AdamOptions& options) {
  for (auto& e : store.entries()) {
    if (!e.param.has_grad()) throw InputError("adam_step: no gradient for parameter '" + e.name + "'");
    const auto& grad = e.param.grad();
    for (T g : grad.values()) {
      if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient in parameter '" + e.name + "'");
    }
  }
  const T b1 = T(options.beta1), b2 = T(options.beta2), eps = T(options.eps), lr = T(options.learning_rate);
  for (auto& e : store.entries()) {
    auto& state = e.adam;
    auto& value = e.param.mutable_value();
    const auto& grad = e.param.grad();
    if (state.first_moment.size() != value.size()) {
      state.first_moment = Tensor<T>(value.shape());
      state.second_moment = Tensor<T>(value.shape());
    }
    ++state.step;
    const T correction1 = T(1) - std::pow(b1, T(state.step));
    const T correction2 = T(1) - std::pow(b2, T(state.step));
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T g = grad[i];
      T& m = state.first_moment[i];
      T& v = state.second_moment[i];
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g * g;
      value[i] -= lr * (m / correction1) / (std::sqrt(v / correction2) + eps);
    }
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void adam_step(ParameterStore<float>&, const AdamOptions&);
template void adam_step(ParameterStore<double>&, const AdamOptions&);

}  // namespace timbre::nn

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

#include "timbre/trainer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "timbre/errors.hpp"

namespace timbre::trainer {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'P', 'C', 'K'};

template <typename T>
constexpr std::uint8_t dtype_code() {
  if constexpr (std::is_same_v<T, float>) return 0;
  if constexpr (std::is_same_v<T, double>) return 1;
  return 2;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw InputError("checkpoint: truncated while reading " + what);
  }
  return value;
}

template <typename T>
nn::Tensor<T> read_values(std::istream& in, nn::Shape shape, const std::string& name) {
  nn::Tensor<T> t(std::move(shape));
  const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(T));
  if (!in.read(reinterpret_cast<char*>(t.data()), bytes)) {
    throw InputError("checkpoint: truncated values for '" + name + "'");
  }
  return t;
}

}  // namespace

void Checkpoint::put(const std::string& name, Array value) {
  if (name.empty() || name.size() > 0xFFFF) throw InputError("checkpoint: bad entry name length");
  if (auto it = index_.find(name); it != index_.end()) {
    entries_[it->second].second = std::move(value);
    return;
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  put(name, nn::Tensor<double>({1}, std::vector<double>{value}));
}

void Checkpoint::put_u64(const std::string& name, std::uint64_t value) {
  put(name, nn::Tensor<std::uint64_t>({1}, std::vector<std::uint64_t>{value}));
}

void Checkpoint::put_u64s(const std::string& name, std::vector<std::uint64_t> values) {
  const std::size_t n = values.size();
  put(name, nn::Tensor<std::uint64_t>({n}, std::move(values)));
}

const Checkpoint::Array& Checkpoint::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("checkpoint: missing entry '" + name + "'");
  return entries_[it->second].second;
}

namespace {
template <typename T>
const nn::Tensor<T>& typed(const Checkpoint::Array& a, const std::string& name, const char* type) {
  if (const auto* t = std::get_if<nn::Tensor<T>>(&a)) return *t;
  throw InputError("checkpoint: entry '" + name + "' is not " + type);
}
}  // namespace

const nn::Tensor<float>& Checkpoint::f32(const std::string& name) const { return typed<float>(get(name), name, "f32"); }
const nn::Tensor<double>& Checkpoint::f64(const std::string& name) const { return typed<double>(get(name), name, "f64"); }
const nn::Tensor<std::uint64_t>& Checkpoint::u64s(const std::string& name) const {
  return typed<std::uint64_t>(get(name), name, "u64");
}

double Checkpoint::scalar(const std::string& name) const {
  const auto& t = f64(name);
  if (t.size() != 1) throw InputError("checkpoint: entry '" + name + "' is not a scalar");
  return t[0];
}

std::uint64_t Checkpoint::u64(const std::string& name) const {
  const auto& t = u64s(name);
  if (t.size() != 1) throw InputError("checkpoint: entry '" + name + "' is not a scalar");
  return t[0];
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("checkpoint: cannot write " + tmp.string());
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, array] : entries_) {
      write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      std::visit(
          [&](const auto& t) {
            using T = typename std::decay_t<decltype(t)>::value_type;
            if (t.rank() > 255) throw InputError("checkpoint: rank too large for '" + name + "'");
            write_pod<std::uint8_t>(out, dtype_code<T>());
            write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
            for (std::size_t d : t.shape()) write_pod<std::uint64_t>(out, d);
            out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
          },
          array);
    }
    if (!out.flush()) throw InputError("checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("checkpoint: cannot move into place " + path.string() + ": " + ec.message());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw InputError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version) + " in " + path.string());
  }
  const auto count = read_pod<std::uint32_t>(in, "entry count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw InputError("checkpoint: truncated entry name");
    const auto dtype = read_pod<std::uint8_t>(in, "dtype");
    const auto rank = read_pod<std::uint8_t>(in, "rank");
    nn::Shape shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(in, "dims");
    switch (dtype) {
      case 0: ckpt.put(name, read_values<float>(in, std::move(shape), name)); break;
      case 1: ckpt.put(name, read_values<double>(in, std::move(shape), name)); break;
      case 2: ckpt.put(name, read_values<std::uint64_t>(in, std::move(shape), name)); break;
      default: throw InputError("checkpoint: unknown dtype code " + std::to_string(dtype) + " for '" + name + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("checkpoint: trailing bytes in " + path.string());
  return ckpt;
}

template <typename T>
void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterStore<T>& store,
                      bool with_optimizer) {
  for (const auto& e : store.entries()) {
    const std::string key = prefix + "/" + e.name;
    ckpt.put(key, e.param.value());
    if (!with_optimizer) continue;
    ckpt.put_u64(key + "@step", e.adam.step);
    if (e.adam.step > 0) {
      ckpt.put(key + "@m", e.adam.first_moment);
      ckpt.put(key + "@v", e.adam.second_moment);
    }
  }
}

template <typename T>
void load_parameters(const Checkpoint& ckpt, const std::string& prefix, nn::ParameterStore<T>& store) {
  const char* type = std::is_same_v<T, float> ? "f32" : "f64";
  for (auto& e : store.entries()) {
    const std::string key = prefix + "/" + e.name;
    const auto& value = typed<T>(ckpt.get(key), key, type);
    if (value.shape() != e.param.shape()) {
      throw InputError("checkpoint: '" + key + "' has shape " + nn::to_string(value.shape()) + ", model expects " +
                       nn::to_string(e.param.shape()));
    }
    e.param.mutable_value() = value;
    e.param.zero_grad();
    e.adam = {};
    if (ckpt.contains(key + "@step")) {
      e.adam.step = ckpt.u64(key + "@step");
      if (e.adam.step > 0) {
        e.adam.first_moment = typed<T>(ckpt.get(key + "@m"), key + "@m", type);
        e.adam.second_moment = typed<T>(ckpt.get(key + "@v"), key + "@v", type);
      }
    }
  }
}

void store_rng(Checkpoint& ckpt, const std::string& name, const std::mt19937_64& rng) {
  std::stringstream ss;
  ss << rng;
  std::vector<std::uint64_t> words;
  for (std::uint64_t w; ss >> w;) words.push_back(w);
  ckpt.put_u64s(name, std::move(words));
}

std::mt19937_64 load_rng(const Checkpoint& ckpt, const std::string& name) {
  std::stringstream ss;
  for (std::uint64_t w : ckpt.u64s(name).storage()) ss << w << ' ';
  std::mt19937_64 rng;
  if (!(ss >> rng)) throw InputError("checkpoint: corrupt generator state in '" + name + "'");
  return rng;
}

template void store_parameters(Checkpoint&, const std::string&, const nn::ParameterStore<float>&, bool);
template void store_parameters(Checkpoint&, const std::string&, const nn::ParameterStore<double>&, bool);
template void load_parameters(const Checkpoint&, const std::string&, nn::ParameterStore<float>&);
template void load_parameters(const Checkpoint&, const std::string&, nn::ParameterStore<double>&);

}  // namespace timbre::trainer

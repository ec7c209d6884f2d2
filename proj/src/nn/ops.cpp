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

#include "timbre/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>

#include "timbre/nn/parallel.hpp"

namespace timbre::nn {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ')';
  return out.str();
}

namespace {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Matrix<T>>;

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

void require_rank3(const Shape& s, const char* op) {
  require(s.size() == 3, std::string(op) + ": expected (batch, channels, time), got " + to_string(s));
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
}

// Accumulates `delta` into the gradient of input i when it wants one.
template <typename T, typename F>
void accumulate(Node<T>& out, std::size_t i, F&& fn) {
  auto& in = *out.inputs[i];
  if (!in.requires_grad) return;
  fn(in.grad_buffer());
}

template <typename T, typename Forward, typename Derivative>
Var<T> unary_elementwise(const Var<T>& x, Forward f, Derivative df) {
  Tensor<T> out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(std::move(out), {x}, [df](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      const auto& xin = node.inputs[0]->value;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * df(xin[i], node.value[i]);
    });
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& node) {
    for (std::size_t k = 0; k < 2; ++k) {
      accumulate(node, k, [&](Tensor<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
      });
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
    accumulate(node, 1, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= node.grad[i];
    });
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& node) {
    const auto& av = node.inputs[0]->value;
    const auto& bv = node.inputs[1]->value;
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * bv[i];
    });
    accumulate(node, 1, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * av[i];
    });
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary_elementwise(
      a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// tanh and logistic go through Eigen's vectorized kernels; they dominate the
// generator's elementwise cost.
template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const auto n = static_cast<long>(out.size());
  ArrayMap<T>(out.data(), n) = ConstArrayMap<T>(x.value().data(), n).tanh();
  return make_result<T>(std::move(out), {x}, [n](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      const ConstArrayMap<T> y(node.value.data(), n), dy(node.grad.data(), n);
      ArrayMap<T>(g.data(), n) += dy * (T(1) - y.square());
    });
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const auto n = static_cast<long>(out.size());
  ArrayMap<T>(out.data(), n) = ConstArrayMap<T>(x.value().data(), n).logistic();
  return make_result<T>(std::move(out), {x}, [n](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      const ConstArrayMap<T> y(node.value.data(), n), dy(node.grad.data(), n);
      ArrayMap<T>(g.data(), n) += dy * y * (T(1) - y);
    });
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary_elementwise(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T negative_slope) {
  return unary_elementwise(
      x, [negative_slope](T v) { return v > T(0) ? v : negative_slope * v; },
      [negative_slope](T v, T) { return v > T(0) ? T(1) : negative_slope; });
}

template <typename T>
Var<T> gated_activation(const Var<T>& x) {
  require_rank3(x.shape(), "gated_activation");
  const std::size_t batch = x.dim(0), channels = x.dim(1) / 2, steps = x.dim(2);
  require(x.dim(1) % 2 == 0, "gated_activation: channel count must be even");
  Tensor<T> out({batch, channels, steps});
  const auto& in = x.value();
  const auto half = static_cast<long>(channels * steps);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* filter = in.data() + b * 2 * channels * steps;
    ArrayMap<T>(out.data() + b * channels * steps, half) =
        ConstArrayMap<T>(filter, half).tanh() * ConstArrayMap<T>(filter + half, half).logistic();
  }
  return make_result<T>(std::move(out), {x}, [batch, channels, steps, half](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      Eigen::Array<T, Eigen::Dynamic, 1> th(half), sg(half);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t offset = b * 2 * channels * steps;
        th = ConstArrayMap<T>(node.inputs[0]->value.data() + offset, half).tanh();
        sg = ConstArrayMap<T>(node.inputs[0]->value.data() + offset + half, half).logistic();
        const ConstArrayMap<T> dy(node.grad.data() + b * channels * steps, half);
        ArrayMap<T>(g.data() + offset, half) += dy * (T(1) - th.square()) * sg;
        ArrayMap<T>(g.data() + offset + half, half) += dy * th * sg * (T(1) - sg);
      }
    });
  });
}

template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor) {
  require_rank3(x.shape(), "nearest_upsample");
  require(factor >= 1, "nearest_upsample: factor must be positive");
  const std::size_t rows = x.dim(0) * x.dim(1), steps = x.dim(2);
  Tensor<T> out({x.dim(0), x.dim(1), steps * factor});
  const auto& in = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::fill_n(out.data() + (r * steps + t) * factor, factor, in[r * steps + t]);
    }
  }
  return make_result<T>(std::move(out), {x}, [rows, steps, factor](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t t = 0; t < steps; ++t) {
          const T* dy = node.grad.data() + (r * steps + t) * factor;
          T acc = 0;
          for (std::size_t k = 0; k < factor; ++k) acc += dy[k];
          g[r * steps + t] += acc;
        }
      }
    });
  });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  require_rank3(x.shape(), "instance_norm");
  const std::size_t rows = x.dim(0) * x.dim(1), steps = x.dim(2);
  require(steps >= 2, "instance_norm: needs at least 2 time steps, got " + std::to_string(steps));
  Tensor<T> out(x.shape());
  std::vector<T> inv_std(rows);
  const auto& in = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* v = in.data() + r * steps;
    T mu = 0;
    for (std::size_t t = 0; t < steps; ++t) mu += v[t];
    mu /= T(steps);
    T var = 0;
    for (std::size_t t = 0; t < steps; ++t) var += (v[t] - mu) * (v[t] - mu);
    var /= T(steps);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    T* y = out.data() + r * steps;
    for (std::size_t t = 0; t < steps; ++t) y[t] = (v[t] - mu) * inv_std[r];
  }
  return make_result<T>(std::move(out), {x}, [rows, steps, inv_std = std::move(inv_std)](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = node.value.data() + r * steps;
        const T* dy = node.grad.data() + r * steps;
        T mean_dy = 0, mean_dy_y = 0;
        for (std::size_t t = 0; t < steps; ++t) {
          mean_dy += dy[t];
          mean_dy_y += dy[t] * y[t];
        }
        mean_dy /= T(steps);
        mean_dy_y /= T(steps);
        T* dx = g.data() + r * steps;
        for (std::size_t t = 0; t < steps; ++t) dx[t] += inv_std[r] * (dy[t] - mean_dy - y[t] * mean_dy_y);
      }
    });
  });
}

template <typename T>
Var<T> weight_norm(const Var<T>& direction, const Var<T>& magnitude) {
  const std::size_t outputs = direction.dim(0);
  require(magnitude.value().size() == outputs, "weight_norm: magnitude needs one entry per output channel");
  const std::size_t fan = direction.value().size() / outputs;
  Tensor<T> out(direction.shape());
  std::vector<T> norms(outputs);
  const auto& v = direction.value();
  for (std::size_t o = 0; o < outputs; ++o) {
    T sq = 0;
    for (std::size_t i = 0; i < fan; ++i) sq += v[o * fan + i] * v[o * fan + i];
    norms[o] = std::sqrt(sq);
    require(norms[o] > T(0), "weight_norm: zero direction vector for output " + std::to_string(o));
    const T factor = magnitude.value()[o] / norms[o];
    for (std::size_t i = 0; i < fan; ++i) out[o * fan + i] = factor * v[o * fan + i];
  }
  return make_result<T>(std::move(out), {direction, magnitude},
                        [outputs, fan, norms = std::move(norms)](Node<T>& node) {
    const auto& v = node.inputs[0]->value;
    const auto& g = node.inputs[1]->value;
    for (std::size_t o = 0; o < outputs; ++o) {
      const T* dw = node.grad.data() + o * fan;
      const T* vo = v.data() + o * fan;
      T dot = 0;  // dw . v / ||v||
      for (std::size_t i = 0; i < fan; ++i) dot += dw[i] * vo[i];
      dot /= norms[o];
      accumulate(node, 1, [&](Tensor<T>& dg) { dg[o] += dot; });
      accumulate(node, 0, [&](Tensor<T>& dv) {
        const T factor = g[o] / norms[o];
        for (std::size_t i = 0; i < fan; ++i) {
          dv[o * fan + i] += factor * (dw[i] - dot * vo[i] / norms[o]);
        }
      });
    }
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const Conv1dOptions<T>& options) {
  require_rank3(x.shape(), "conv1d");
  require(weight.value().rank() == 3, "conv1d: weight must be (out, in, kernel), got " + to_string(weight.shape()));
  const std::size_t batch = x.dim(0), in_ch = x.dim(1), steps = x.dim(2);
  const std::size_t out_ch = weight.dim(0), kernel = weight.dim(2);
  const std::size_t dilation = options.dilation;
  require(weight.dim(1) == in_ch, "conv1d: weight expects " + std::to_string(weight.dim(1)) +
                                      " input channels, input has " + std::to_string(in_ch));
  require(kernel % 2 == 1, "conv1d: kernel size must be odd");
  require(dilation >= 1, "conv1d: dilation must be >= 1");
  require(bias.value().size() == out_ch, "conv1d: bias size mismatch");
  if (options.addend) {
    require(options.addend->shape() == Shape({batch, out_ch, steps}), "conv1d: addend shape mismatch");
  }

  // One (out, in) matrix per tap.
  std::vector<Matrix<T>> taps(kernel, Matrix<T>(out_ch, in_ch));
  const auto& w = weight.value();
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t i = 0; i < in_ch; ++i) {
      for (std::size_t k = 0; k < kernel; ++k) taps[k](o, i) = w[(o * in_ch + i) * kernel + k];
    }
  }
  const long half = static_cast<long>(kernel / 2);
  const long len = static_cast<long>(steps);
  auto tap_range = [=](std::size_t k) {
    const long shift = (static_cast<long>(k) - half) * static_cast<long>(dilation);
    const long lo = std::max(0L, -shift);
    const long hi = std::min(len, len - shift);
    return std::tuple<long, long, long>(shift, lo, std::max(0L, hi - lo));
  };

  Tensor<T> out({batch, out_ch, steps});
  const T scale_factor = options.scale;
  parallel_for(batch, [&](std::size_t b) {
    MatMap<T> y(out.data() + b * out_ch * steps, out_ch, steps);
    ConstMatMap<T> xb(x.value().data() + b * in_ch * steps, in_ch, steps);
    if (options.addend) {
      y = ConstMatMap<T>(options.addend->value().data() + b * out_ch * steps, out_ch, steps);
    } else {
      y.setZero();
    }
    for (std::size_t o = 0; o < out_ch; ++o) y.row(o).array() += bias.value()[o];
    for (std::size_t k = 0; k < kernel; ++k) {
      const auto [shift, lo, n] = tap_range(k);
      if (n > 0) y.middleCols(lo, n).noalias() += taps[k] * xb.middleCols(lo + shift, n);
    }
    if (scale_factor != T(1)) y *= scale_factor;
  });

  std::vector<Var<T>> inputs{x, weight, bias};
  if (options.addend) inputs.push_back(*options.addend);
  return make_result<T>(
      std::move(out), std::move(inputs),
      [=, taps = std::move(taps)](Node<T>& node) {
        const bool want_x = node.inputs[0]->requires_grad;
        const bool want_w = node.inputs[1]->requires_grad;
        const bool want_b = node.inputs[2]->requires_grad;
        const bool want_add = node.inputs.size() > 3 && node.inputs[3]->requires_grad;
        const auto& xv = node.inputs[0]->value;
        T* dx_all = want_x ? node.inputs[0]->grad_buffer().data() : nullptr;
        std::vector<std::vector<Matrix<T>>> dtaps(want_w ? batch : 0);
        std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbias(want_b ? batch : 0);

        parallel_for(batch, [&](std::size_t b) {
          Matrix<T> gs = ConstMatMap<T>(node.grad.data() + b * out_ch * steps, out_ch, steps);
          if (scale_factor != T(1)) gs *= scale_factor;
          ConstMatMap<T> xb(xv.data() + b * in_ch * steps, in_ch, steps);
          if (want_x) {
            MatMap<T> dxb(dx_all + b * in_ch * steps, in_ch, steps);
            for (std::size_t k = 0; k < kernel; ++k) {
              const auto [shift, lo, n] = tap_range(k);
              if (n > 0) dxb.middleCols(lo + shift, n).noalias() += taps[k].transpose() * gs.middleCols(lo, n);
            }
          }
          if (want_w) {
            dtaps[b].assign(kernel, Matrix<T>::Zero(out_ch, in_ch));
            for (std::size_t k = 0; k < kernel; ++k) {
              const auto [shift, lo, n] = tap_range(k);
              if (n > 0) dtaps[b][k].noalias() += gs.middleCols(lo, n) * xb.middleCols(lo + shift, n).transpose();
            }
          }
          if (want_b) dbias[b] = gs.rowwise().sum();
        });

        if (want_w) {
          auto& dw = node.inputs[1]->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < out_ch; ++o) {
              for (std::size_t i = 0; i < in_ch; ++i) {
                for (std::size_t k = 0; k < kernel; ++k) dw[(o * in_ch + i) * kernel + k] += dtaps[b][k](o, i);
              }
            }
          }
        }
        if (want_b) {
          auto& db = node.inputs[2]->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < out_ch; ++o) db[o] += dbias[b][static_cast<long>(o)];
          }
        }
        if (want_add) {
          auto& da = node.inputs[3]->grad_buffer();
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += scale_factor * node.grad[i];
        }
      });
}

template <typename T>
Var<T> max_pool1d(const Var<T>& x, std::size_t size) {
  require_rank3(x.shape(), "max_pool1d");
  require(size >= 1, "max_pool1d: window must be positive");
  const std::size_t rows = x.dim(0) * x.dim(1), steps = x.dim(2), pooled = steps / size;
  require(pooled >= 1, "max_pool1d: input shorter than the window");
  Tensor<T> out({x.dim(0), x.dim(1), pooled});
  std::vector<std::size_t> argmax(rows * pooled);
  const auto& in = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = 0; p < pooled; ++p) {
      const std::size_t start = r * steps + p * size;
      std::size_t best = start;
      for (std::size_t k = 1; k < size; ++k) {
        if (in[start + k] > in[best]) best = start + k;
      }
      argmax[r * pooled + p] = best;
      out[r * pooled + p] = in[best];
    }
  }
  return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += node.grad[i];
    });
  });
}

template <typename T>
Var<T> frame_signal(const Var<T>& x, std::size_t length, std::size_t hop) {
  require_rank3(x.shape(), "frame_signal");
  require(x.dim(1) == 1, "frame_signal: expects a single channel");
  require(hop >= 1 && length >= 1, "frame_signal: length and hop must be positive");
  const std::size_t batch = x.dim(0), steps = x.dim(2);
  require(steps >= length, "frame_signal: signal of " + std::to_string(steps) +
                               " samples is shorter than one frame of " + std::to_string(length));
  const std::size_t frames = 1 + (steps - length) / hop;
  Tensor<T> out({batch * frames, 1, length});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < frames; ++f) {
      std::copy_n(x.value().data() + b * steps + f * hop, length, out.data() + (b * frames + f) * length);
    }
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < frames; ++f) {
          const T* dy = node.grad.data() + (b * frames + f) * length;
          T* dx = g.data() + b * steps + f * hop;
          for (std::size_t i = 0; i < length; ++i) dx[i] += dy[i];
        }
      }
    });
  });
}

template <typename T>
Var<T> slice_time(const Var<T>& x, std::size_t start, std::size_t length) {
  require_rank3(x.shape(), "slice_time");
  const std::size_t rows = x.dim(0) * x.dim(1), steps = x.dim(2);
  require(start + length <= steps, "slice_time: range exceeds " + std::to_string(steps) + " steps");
  Tensor<T> out({x.dim(0), x.dim(1), length});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.value().data() + r * steps + start, length, out.data() + r * length);
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < length; ++i) g[r * steps + start + i] += node.grad[r * length + i];
      }
    });
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  require(element_count(shape) == x.value().size(),
          "reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  return make_result<T>(x.value().reshaped(std::move(shape)), {x}, [](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require(x.value().rank() == 2 && weight.value().rank() == 2, "linear: expects 2-D input and weight");
  const std::size_t rows = x.dim(0), in = x.dim(1), outs = weight.dim(0);
  require(weight.dim(1) == in, "linear: weight/input width mismatch");
  require(bias.value().size() == outs, "linear: bias size mismatch");
  Tensor<T> out({rows, outs});
  MatMap<T> y(out.data(), rows, outs);
  ConstMatMap<T> xm(x.value().data(), rows, in);
  ConstMatMap<T> wm(weight.value().data(), outs, in);
  y.noalias() = xm * wm.transpose();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < outs; ++o) y(r, o) += bias.value()[o];
  }
  return make_result<T>(std::move(out), {x, weight, bias}, [=](Node<T>& node) {
    ConstMatMap<T> dy(node.grad.data(), rows, outs);
    accumulate(node, 0, [&](Tensor<T>& g) {
      MatMap<T> dx(g.data(), rows, in);
      dx.noalias() += dy * ConstMatMap<T>(node.inputs[1]->value.data(), outs, in);
    });
    accumulate(node, 1, [&](Tensor<T>& g) {
      MatMap<T> dw(g.data(), outs, in);
      dw.noalias() += dy.transpose() * ConstMatMap<T>(node.inputs[0]->value.data(), rows, in);
    });
    accumulate(node, 2, [&](Tensor<T>& g) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < outs; ++o) g[o] += dy(r, o);
      }
    });
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  return make_result<T>(Tensor<T>({1}, total), {x}, [](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0];
    });
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  require(!x.value().empty(), "mean: empty tensor");
  return scale(sum(x), T(1) / T(x.value().size()));
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mean_abs_diff");
  require(!a.value().empty(), "mean_abs_diff: empty tensor");
  const std::size_t n = a.value().size();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(a.value()[i] - b.value()[i]);
  return make_result<T>(Tensor<T>({1}, total / T(n)), {a, b}, [n](Node<T>& node) {
    const auto& av = node.inputs[0]->value;
    const auto& bv = node.inputs[1]->value;
    const T step = node.grad[0] / T(n);
    auto sign = [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); };
    accumulate(node, 0, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < n; ++i) g[i] += step * sign(av[i] - bv[i]);
    });
    accumulate(node, 1, [&](Tensor<T>& g) {
      for (std::size_t i = 0; i < n; ++i) g[i] -= step * sign(av[i] - bv[i]);
    });
  });
}

template <typename T>
Var<T> mean_squared_offset(const Var<T>& x, T target) {
  require(!x.value().empty(), "mean_squared_offset: empty tensor");
  const std::size_t n = x.value().size();
  T total = 0;
  for (T v : x.value().values()) total += (v - target) * (v - target);
  return make_result<T>(Tensor<T>({1}, total / T(n)), {x}, [n, target](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      const auto& xv = node.inputs[0]->value;
      const T step = T(2) * node.grad[0] / T(n);
      for (std::size_t i = 0; i < n; ++i) g[i] += step * (xv[i] - target);
    });
  });
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const Tensor<T>& target) {
  require(logits.value().rank() == 2, "softmax_cross_entropy: logits must be (rows, classes)");
  require(target.shape() == logits.shape(), "softmax_cross_entropy: target shape mismatch");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  Tensor<T> probs(logits.shape());
  T loss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.value().data() + r * classes;
    const T peak = *std::max_element(z, z + classes);
    T denom = 0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - peak);
    const T log_denom = std::log(denom);
    for (std::size_t k = 0; k < classes; ++k) {
      const T log_p = z[k] - peak - log_denom;
      probs[r * classes + k] = std::exp(log_p);
      loss -= target[r * classes + k] * log_p;
    }
  }
  loss /= T(rows);
  return make_result<T>(Tensor<T>({1}, loss), {logits},
                        [rows, classes, target, probs = std::move(probs)](Node<T>& node) {
    accumulate(node, 0, [&](Tensor<T>& g) {
      const T step = node.grad[0] / T(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        T mass = 0;
        for (std::size_t k = 0; k < classes; ++k) mass += target[r * classes + k];
        for (std::size_t k = 0; k < classes; ++k) {
          const std::size_t i = r * classes + k;
          g[i] += step * (probs[i] * mass - target[i]);
        }
      }
    });
  });
}

#define TIMBRE_INSTANTIATE_OPS(T)                                                            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> tanh(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> leaky_relu(const Var<T>&, T);                                              \
  template Var<T> gated_activation(const Var<T>&);                                           \
  template Var<T> nearest_upsample(const Var<T>&, std::size_t);                              \
  template Var<T> instance_norm(const Var<T>&, T);                                           \
  template Var<T> weight_norm(const Var<T>&, const Var<T>&);                                 \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, const Conv1dOptions<T>&); \
  template Var<T> max_pool1d(const Var<T>&, std::size_t);                                    \
  template Var<T> frame_signal(const Var<T>&, std::size_t, std::size_t);                     \
  template Var<T> slice_time(const Var<T>&, std::size_t, std::size_t);                       \
  template Var<T> reshape(const Var<T>&, Shape);                                             \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> mean_abs_diff(const Var<T>&, const Var<T>&);                               \
  template Var<T> mean_squared_offset(const Var<T>&, T);                                     \
  template Var<T> softmax_cross_entropy(const Var<T>&, const Tensor<T>&);

TIMBRE_INSTANTIATE_OPS(float)
TIMBRE_INSTANTIATE_OPS(double)

}  // namespace timbre::nn

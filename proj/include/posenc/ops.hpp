#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "posenc/kernels.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

// Differentiable primitives. Every op takes the tape first, computes its
// forward value eagerly and, when an input needs a gradient, records a node
// whose closure accumulates into the inputs' grad buffers.

namespace posenc::ops {

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

inline void require_axis(std::size_t got, std::size_t want, const char* op, const std::string& what) {
  if (got != want) {
    throw DimensionError(std::string(op) + ": " + what + " mismatch (" + std::to_string(got) +
                         " vs " + std::to_string(want) + ")");
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    for (std::size_t i = 0; i < std::min(a.rank(), b.rank()); ++i) {
      if (a.shape()[i] != b.shape()[i]) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(i) + " mismatch " +
                             shape_string(a.shape()) + " vs " + shape_string(b.shape()));
      }
    }
    throw DimensionError(std::string(op) + ": rank mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// [outer, axis, inner] factorization of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

enum class Elementwise { add, mul, relu, sigmoid, tanh };

// ---------------------------------------------------------------- pointwise

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a, &b})) {
    tape.record("add", {a, b}, y, [a, b, y]() mutable {
      const auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return y;
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a, &b})) {
    tape.record("mul", {a, b}, y, [a, b, y]() mutable {
      const auto g = y.grad();
      const auto av = a.values();
      const auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return y;
}

inline Tensor scale(Tape& tape, const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a})) {
    tape.record("scale", {a}, y, [a, y, factor]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
  }
  return y;
}

namespace detail {

// Unary op whose derivative is expressible from (x, y).
template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a})) {
    tape.record(name, {a}, y, [a, y, deriv]() mutable {
      const auto g = y.grad();
      const auto xv = a.values();
      const auto yv = y.values();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace detail

inline Tensor relu(Tape& tape, const Tensor& a) {
  return detail::unary(
      tape, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  return detail::unary(
      tape, a, "sigmoid", [](double x) { return detail::stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(Tape& tape, const Tensor& a) {
  return detail::unary(
      tape, a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

/// Dispatch form of the pointwise ops; `b` is ignored for unary kinds.
inline Tensor elementwise(Tape& tape, Elementwise kind, const Tensor& a, const Tensor& b = {}) {
  switch (kind) {
    case Elementwise::add: return add(tape, a, b);
    case Elementwise::mul: return mul(tape, a, b);
    case Elementwise::relu: return relu(tape, a);
    case Elementwise::sigmoid: return sigmoid(tape, a);
    case Elementwise::tanh: return tanh(tape, a);
  }
  throw ContractError("elementwise: unknown kind");
}

// ------------------------------------------------------------ linear algebra

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul", "lhs");
  detail::require_rank(b, 2, "matmul", "rhs");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  detail::require_axis(b.dim(0), k, "matmul", "inner axis (lhs axis 1 / rhs axis 0)");
  std::vector<double> out(n * m, 0.0);
  kernels::gemm_nn(a.values().data(), b.values().data(), out.data(), n, k, m);
  Tensor y({n, m}, std::move(out));
  if (tape.wants({&a, &b})) {
    tape.record("matmul", {a, b}, y, [a, b, y, n, k, m]() mutable {
      const auto g = y.grad();
      if (a.requires_grad()) kernels::gemm_nt(g.data(), b.values().data(), a.mutable_grad().data(), n, m, k);
      if (b.requires_grad()) kernels::gemm_tn(a.values().data(), g.data(), b.mutable_grad().data(), n, k, m);
    });
  }
  return y;
}

inline Tensor transpose(Tape& tape, const Tensor& a) {
  detail::require_rank(a, 2, "transpose", "input");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  Tensor y({c, r}, std::move(out));
  if (tape.wants({&a})) {
    tape.record("transpose", {a}, y, [a, y, r, c]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
  }
  return y;
}

/// input [N, D_in] * weight [D_in, D_out] + bias [D_out] broadcast per row.
inline Tensor dense(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  detail::require_rank(input, 2, "dense", "input");
  detail::require_rank(weight, 2, "dense", "weight");
  const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(1);
  detail::require_axis(weight.dim(0), din, "dense", "input features (input axis 1 / weight axis 0)");
  if (bias.defined()) {
    detail::require_rank(bias, 1, "dense", "bias");
    detail::require_axis(bias.dim(0), dout, "dense", "bias axis 0");
  }
  std::vector<double> out(n * dout, 0.0);
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t i = 0; i < n; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * dout);
  }
  kernels::gemm_nn(input.values().data(), weight.values().data(), out.data(), n, din, dout);
  Tensor y({n, dout}, std::move(out));
  if (tape.wants({&input, &weight, &bias})) {
    tape.record("dense", {input, weight, bias}, y, [input, weight, bias, y, n, din, dout]() mutable {
      const auto g = y.grad();
      if (input.requires_grad())
        kernels::gemm_nt(g.data(), weight.values().data(), input.mutable_grad().data(), n, dout, din);
      if (weight.requires_grad())
        kernels::gemm_tn(input.values().data(), g.data(), weight.mutable_grad().data(), n, din, dout);
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < dout; ++j) gb[j] += g[i * dout + j];
      }
    });
  }
  return y;
}

// --------------------------------------------------------------- convolution

enum class Padding { same, valid };

/// Left zero-padding for `same`; even kernels put the extra element on the left.
inline std::size_t same_left_pad(std::size_t kernel_width) { return kernel_width / 2; }

/// 1D convolution along the length axis.
///
/// input is [L, C_in] or time-distributed [B, L, C_in]; kernel is
/// [K, C_in, C_out]; bias is [C_out] or undefined. Output row t is
/// sum_k input[t + k - left] * kernel[k] + bias.
inline Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
                     Padding padding) {
  if (input.rank() != 2 && input.rank() != 3) {
    throw DimensionError("conv1d: input must be [L, C] or [B, L, C], got " + shape_string(input.shape()));
  }
  detail::require_rank(kernel, 3, "conv1d", "kernel");
  const bool batched = input.rank() == 3;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t len = input.dim(batched ? 1 : 0);
  const std::size_t cin = input.dim(batched ? 2 : 1);
  const std::size_t kw = kernel.dim(0), cout = kernel.dim(2);
  detail::require_axis(kernel.dim(1), cin, "conv1d", "channel axis (input channels / kernel axis 1)");
  if (bias.defined()) {
    detail::require_rank(bias, 1, "conv1d", "bias");
    detail::require_axis(bias.dim(0), cout, "conv1d", "bias axis 0");
  }
  std::size_t left = 0, out_len = len;
  if (padding == Padding::same) {
    left = same_left_pad(kw);
  } else {
    if (kw > len) {
      throw DimensionError("conv1d: length axis " + std::to_string(len) +
                           " shorter than kernel width " + std::to_string(kw));
    }
    out_len = len - kw + 1;
  }

  std::vector<double> out(batch * out_len * cout, 0.0);
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t r = 0; r < batch * out_len; ++r) std::copy(bv.begin(), bv.end(), out.begin() + r * cout);
  }
  const double* x = input.values().data();
  const double* w = kernel.values().data();

  // Output rows [t0, t1) read input rows t + k - left, all inside [0, len).
  auto row_range = [=](std::size_t k, std::size_t& t0, std::size_t& t1) {
    const long shift = static_cast<long>(k) - static_cast<long>(left);
    long lo = std::max<long>(0, -shift);
    long hi = std::min<long>(static_cast<long>(out_len), static_cast<long>(len) - shift);
    t0 = static_cast<std::size_t>(lo);
    t1 = hi > lo ? static_cast<std::size_t>(hi) : t0;
  };

  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * len * cin;
    double* yb = out.data() + b * out_len * cout;
    for (std::size_t k = 0; k < kw; ++k) {
      std::size_t t0, t1;
      row_range(k, t0, t1);
      if (t1 <= t0) continue;
      const std::size_t src = t0 + k - left;
      kernels::gemm_nn(xb + src * cin, w + k * cin * cout, yb + t0 * cout, t1 - t0, cin, cout);
    }
  }

  Shape out_shape = batched ? Shape{batch, out_len, cout} : Shape{out_len, cout};
  Tensor y(std::move(out_shape), std::move(out));
  if (tape.wants({&input, &kernel, &bias})) {
    tape.record("conv1d", {input, kernel, bias}, y,
                [input, kernel, bias, y, batch, len, cin, cout, kw, left, out_len, row_range]() mutable {
                  const auto g = y.grad();
                  const double* x = input.values().data();
                  const double* w = kernel.values().data();
                  double* gx = input.requires_grad() ? input.mutable_grad().data() : nullptr;
                  double* gw = kernel.requires_grad() ? kernel.mutable_grad().data() : nullptr;
                  for (std::size_t b = 0; b < batch; ++b) {
                    const double* gb = g.data() + b * out_len * cout;
                    for (std::size_t k = 0; k < kw; ++k) {
                      std::size_t t0, t1;
                      row_range(k, t0, t1);
                      if (t1 <= t0) continue;
                      const std::size_t src = t0 + k - left;
                      const std::size_t rows = t1 - t0;
                      if (gx) kernels::gemm_nt(gb + t0 * cout, w + k * cin * cout, gx + (b * len + src) * cin, rows, cout, cin);
                      if (gw) kernels::gemm_tn(x + (b * len + src) * cin, gb + t0 * cout, gw + k * cin * cout, rows, cin, cout);
                    }
                  }
                  if (bias.requires_grad()) {
                    auto gbias = bias.mutable_grad();
                    for (std::size_t r = 0; r < batch * out_len; ++r)
                      for (std::size_t f = 0; f < cout; ++f) gbias[f] += g[r * cout + f];
                  }
                });
  }
  return y;
}

// ------------------------------------------------------------ normalization

/// Softmax over the last axis with row-max subtraction.
inline Tensor softmax(Tape& tape, const Tensor& a) {
  const std::size_t m = a.shape().back();
  const std::size_t rows = a.size() / m;
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * m;
    double* yr = out.data() + r * m;
    const double mx = *std::max_element(x, x + m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      yr[j] = std::exp(x[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < m; ++j) yr[j] /= total;
  }
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a})) {
    tape.record("softmax", {a}, y, [a, y, rows, m]() mutable {
      const auto g = y.grad();
      const auto yv = y.values();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = yv.data() + r * m;
        const double* gr = g.data() + r * m;
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < m; ++j) ga[r * m + j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return y;
}

/// Per-row (x - mean) / sqrt(var + epsilon) * gain + shift over the last axis.
inline Tensor layer_norm(Tape& tape, const Tensor& input, const Tensor& gain, const Tensor& shift,
                         double epsilon) {
  const std::size_t d = input.shape().back();
  const std::size_t rows = input.size() / d;
  detail::require_rank(gain, 1, "layer_norm", "gain");
  detail::require_rank(shift, 1, "layer_norm", "shift");
  detail::require_axis(gain.dim(0), d, "layer_norm", "gain axis 0");
  detail::require_axis(shift.dim(0), d, "layer_norm", "shift axis 0");
  if (!(epsilon > 0.0)) throw ContractError("layer_norm: epsilon must be positive");

  std::vector<double> out(input.size());
  std::vector<double> xhat(input.size());
  std::vector<double> inv_std(rows);
  const auto x = input.values();
  const auto gv = gain.values();
  const auto sv = shift.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mean) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + sv[j];
    }
  }
  Tensor y(input.shape(), std::move(out));
  if (tape.wants({&input, &gain, &shift})) {
    tape.record("layer_norm", {input, gain, shift}, y,
                [input, gain, shift, y, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
                  const auto g = y.grad();
                  const auto gv = gain.values();
                  if (gain.requires_grad()) {
                    auto gg = gain.mutable_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
                  }
                  if (shift.requires_grad()) {
                    auto gs = shift.mutable_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) gs[j] += g[r * d + j];
                  }
                  if (input.requires_grad()) {
                    auto gx = input.mutable_grad();
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gv[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[r * d + j];
                      }
                      mean_dxhat *= inv_d;
                      mean_dxhat_xhat *= inv_d;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gv[j];
                        gx[r * d + j] += inv_std[r] * (dxh - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
                      }
                    }
                  }
                });
  }
  return y;
}

// ------------------------------------------------------------------- layout

inline Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " cannot become " + shape_string(shape));
  }
  Tensor y(std::move(shape), a.vec());
  if (tape.wants({&a})) {
    tape.record("reshape", {a}, y, [a, y]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return y;
}

/// Joins parts along `axis`; every other axis must agree.
inline Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) {
      throw DimensionError("concat: rank mismatch " + shape_string(p.shape()) + " vs " + shape_string(first));
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.shape()[i] != first[i]) {
        throw DimensionError("concat: non-concat axis " + std::to_string(i) + " mismatch " +
                             shape_string(p.shape()) + " vs " + shape_string(first));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  const auto split = detail::split_at(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t ext = p.shape()[axis];
    const auto pv = p.values();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(pv.begin() + o * ext * split.inner, ext * split.inner,
                  out.begin() + (o * split.extent + offset) * split.inner);
    }
    offset += ext;
  }
  Tensor y(out_shape, std::move(out));
  if (tape.wants(parts)) {
    tape.record("concat", parts, y, [parts, y, split, axis]() mutable {
      const auto g = y.grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t ext = p.shape()[axis];
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t o = 0; o < split.outer; ++o) {
            const std::size_t src = (o * split.extent + offset) * split.inner;
            const std::size_t dst = o * ext * split.inner;
            for (std::size_t i = 0; i < ext * split.inner; ++i) gp[dst + i] += g[src + i];
          }
        }
        offset += ext;
      }
    });
  }
  return y;
}

/// Half-open range [begin, end) along `axis`.
inline Tensor slice(Tape& tape, const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank()) throw DimensionError("slice: axis " + std::to_string(axis) + " out of range");
  if (begin >= end || end > a.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of size " +
                         std::to_string(a.shape()[axis]));
  }
  const auto split = detail::split_at(a.shape(), axis);
  const std::size_t ext = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = ext;
  std::vector<double> out(split.outer * ext * split.inner);
  const auto av = a.values();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(av.begin() + (o * split.extent + begin) * split.inner, ext * split.inner,
                out.begin() + o * ext * split.inner);
  }
  Tensor y(std::move(out_shape), std::move(out));
  if (tape.wants({&a})) {
    tape.record("slice", {a}, y, [a, y, split, begin, ext]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t o = 0; o < split.outer; ++o) {
        const std::size_t dst = (o * split.extent + begin) * split.inner;
        const std::size_t src = o * ext * split.inner;
        for (std::size_t i = 0; i < ext * split.inner; ++i) ga[dst + i] += g[src + i];
      }
    });
  }
  return y;
}

/// Reverses the order along axis 0.
inline Tensor reverse(Tape& tape, const Tensor& a) {
  const auto split = detail::split_at(a.shape(), 0);
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t t = 0; t < split.extent; ++t) {
    std::copy_n(av.begin() + (split.extent - 1 - t) * split.inner, split.inner, out.begin() + t * split.inner);
  }
  Tensor y(a.shape(), std::move(out));
  if (tape.wants({&a})) {
    tape.record("reverse", {a}, y, [a, y, split]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t t = 0; t < split.extent; ++t)
        for (std::size_t i = 0; i < split.inner; ++i)
          ga[(split.extent - 1 - t) * split.inner + i] += g[t * split.inner + i];
    });
  }
  return y;
}

// -------------------------------------------------------------- reductions

/// Mean over the time axis: [T, D] -> [D].
inline Tensor global_avg_pool(Tape& tape, const Tensor& a) {
  detail::require_rank(a, 2, "global_avg_pool", "input");
  const std::size_t t_len = a.dim(0), d = a.dim(1);
  std::vector<double> out(d, 0.0);
  const auto av = a.values();
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < d; ++j) out[j] += av[t * d + j];
  for (double& v : out) v /= static_cast<double>(t_len);
  Tensor y({d}, std::move(out));
  if (tape.wants({&a})) {
    tape.record("global_avg_pool", {a}, y, [a, y, t_len, d]() mutable {
      const auto g = y.grad();
      auto ga = a.mutable_grad();
      const double inv = 1.0 / static_cast<double>(t_len);
      for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t j = 0; j < d; ++j) ga[t * d + j] += g[j] * inv;
    });
  }
  return y;
}

inline Tensor sum(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor y = Tensor::scalar(total);
  if (tape.wants({&a})) {
    tape.record("sum", {a}, y, [a, y]() mutable {
      const double g = y.grad()[0];
      for (double& v : a.mutable_grad()) v += g;
    });
  }
  return y;
}

/// -log(max(probs[label], floor)). Zero gradient once the floor is active.
inline Tensor negative_log_likelihood(Tape& tape, const Tensor& probs, std::size_t label,
                                      double floor = 1e-12) {
  if (label >= probs.size()) {
    throw ContractError("negative_log_likelihood: label " + std::to_string(label) +
                        " out of range for " + std::to_string(probs.size()) + " classes");
  }
  const double p = probs[label];
  const bool clamped = p < floor;
  Tensor y = Tensor::scalar(-std::log(clamped ? floor : p));
  if (tape.wants({&probs})) {
    tape.record("nll", {probs}, y, [probs, y, label, clamped, p]() mutable {
      if (clamped) return;
      probs.mutable_grad()[label] += -y.grad()[0] / p;
    });
  }
  return y;
}

}  // namespace posenc::ops

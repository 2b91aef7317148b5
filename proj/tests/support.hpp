#pragma once

// Helpers shared by the test binaries. Oracles here use plain loops over
// std::vector and never call into the library's kernels or ops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "posenc/tensor.hpp"

namespace testing_support {

using posenc::Shape;
using posenc::Tensor;

/// Test-side RNG, independent of the library's generator.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }

  std::vector<double> values(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return v;
  }

  Tensor tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
    const std::size_t n = posenc::shape_size(shape);
    return Tensor(std::move(shape), values(n, lo, hi));
  }

  /// Values with |v| in [0.1, 1], so ReLU kinks are far from any probe.
  Tensor kink_free(Shape shape) {
    const std::size_t n = posenc::shape_size(shape);
    std::vector<double> v(n);
    for (double& x : v) x = (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(0.1, 1.0);
    return Tensor(std::move(shape), std::move(v));
  }

 private:
  std::mt19937_64 engine_;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

/// C[n,m] = A[n,k] B[k,m]
inline std::vector<double> loop_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                                       std::size_t k, std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
      c[i * m + j] = s;
    }
  return c;
}

/// Direct sliding-window conv over [L, Cin] with kernel [K, Cin, Cout];
/// `left` zero rows of padding, output length `out_len`.
inline std::vector<double> loop_conv1d(const std::vector<double>& x, const std::vector<double>& w,
                                       const std::vector<double>& bias, std::size_t L, std::size_t cin, std::size_t K,
                                       std::size_t cout, std::size_t left, std::size_t out_len) {
  std::vector<double> y(out_len * cout, 0.0);
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t f = 0; f < cout; ++f) {
      double s = bias.empty() ? 0.0 : bias[f];
      for (std::size_t k = 0; k < K; ++k) {
        const long src = static_cast<long>(t + k) - static_cast<long>(left);
        if (src < 0 || src >= static_cast<long>(L)) continue;
        for (std::size_t c = 0; c < cin; ++c) s += x[static_cast<std::size_t>(src) * cin + c] * w[(k * cin + c) * cout + f];
      }
      y[t * cout + f] = s;
    }
  return y;
}

inline std::vector<double> loop_softmax_rows(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  std::vector<double> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = x[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[r * cols + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[r * cols + c] - mx);
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = std::exp(x[r * cols + c] - mx) / z;
  }
  return y;
}

inline std::vector<double> transpose_loop(const std::vector<double>& a, std::size_t rows, std::size_t cols) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("posenc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support

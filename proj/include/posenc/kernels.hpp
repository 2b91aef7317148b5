#pragma once

#include <cstddef>

#include <Eigen/Core>

// Row-major GEMM entry points shared by the differentiable ops. All variants
// accumulate into C. Backed by Eigen's blocked GEMM over mapped buffers.

namespace posenc::kernels {

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

}  // namespace detail

/// C[n,m] += A[n,k] * B[k,m]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  if (n == 0 || k == 0 || m == 0) return;
  const Eigen::Index ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k),
                     mi = static_cast<Eigen::Index>(m);
  detail::Map(c, ni, mi).noalias() += detail::ConstMap(a, ni, ki) * detail::ConstMap(b, ki, mi);
}

/// C[n,k] += A[n,m] * B[k,m]^T
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
                    std::size_t k) {
  if (n == 0 || k == 0 || m == 0) return;
  const Eigen::Index ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k),
                     mi = static_cast<Eigen::Index>(m);
  detail::Map(c, ni, ki).noalias() += detail::ConstMap(a, ni, mi) * detail::ConstMap(b, ki, mi).transpose();
}

/// C[k,m] += A[n,k]^T * B[n,m]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  if (n == 0 || k == 0 || m == 0) return;
  const Eigen::Index ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k),
                     mi = static_cast<Eigen::Index>(m);
  detail::Map(c, ki, mi).noalias() += detail::ConstMap(a, ni, ki).transpose() * detail::ConstMap(b, ni, mi);
}

}  // namespace posenc::kernels

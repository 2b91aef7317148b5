#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace posenc {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible. The message names the axis.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an API precondition that is not about shape.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

struct TensorStorage {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major double tensor with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape and the parameter tree refer to one buffer. Use clone() for
/// an independent copy.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : s_(std::make_shared<detail::TensorStorage>()) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] == 0) {
        throw DimensionError("tensor axis " + std::to_string(i) + " has size 0");
      }
    }
    if (shape_size(shape) != values.size()) {
      throw DimensionError("shape " + shape_string(shape) + " needs " +
                           std::to_string(shape_size(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    s_->shape = std::move(shape);
    s_->value = std::move(values);
    s_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor filled(Shape shape, double v, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  bool defined() const noexcept { return static_cast<bool>(s_); }
  explicit operator bool() const noexcept { return defined(); }

  const Shape& shape() const { return storage().shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                           std::to_string(rank()));
    }
    return shape()[axis];
  }
  std::size_t size() const { return storage().value.size(); }

  std::span<const double> values() const { return storage().value; }
  std::span<double> mutable_values() { return storage().value; }
  const std::vector<double>& vec() const { return storage().value; }

  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return storage().value[0];
  }
  double operator[](std::size_t i) const { return storage().value[i]; }
  double at(std::size_t i, std::size_t j) const { return storage().value[i * shape()[1] + j]; }

  bool requires_grad() const { return defined() && s_->requires_grad; }
  void set_requires_grad(bool on) { storage().requires_grad = on; }

  bool has_grad() const { return defined() && !s_->grad.empty(); }
  /// Gradient view; all zeros if nothing has been accumulated yet.
  std::span<const double> grad() const {
    auto& st = storage();
    if (st.grad.empty()) st.grad.assign(st.value.size(), 0.0);
    return st.grad;
  }
  // Gradient buffers are accumulation state owned by the storage, not part
  // of the tensor's value, so const handles may write them.
  std::span<double> mutable_grad() const {
    auto& st = storage();
    if (st.grad.empty()) st.grad.assign(st.value.size(), 0.0);
    return st.grad;
  }
  void zero_grad() const {
    if (defined()) s_->grad.clear();
  }

  /// Deep copy detached from any tape; does not carry the gradient.
  Tensor clone() const {
    return Tensor(shape(), storage().value, false);
  }

  bool is(const Tensor& other) const noexcept { return s_ == other.s_; }

 private:
  detail::TensorStorage& storage() const {
    if (!s_) throw ContractError("use of an undefined tensor");
    return *s_;
  }

  std::shared_ptr<detail::TensorStorage> s_;
};

inline bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace posenc

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

namespace posenc {

/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

struct GradCheckReport {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using ScalarFn = std::function<Tensor(Tape&)>;

namespace detail {

inline double evaluate_scalar(const ScalarFn& f) {
  Tape tape(Tape::Mode::inference);
  Tensor y = f(tape);
  if (y.size() != 1) throw ContractError("gradient_check: function is not scalar-valued, shape " + shape_string(y.shape()));
  return y.item();
}

}  // namespace detail

/// Compares reverse-mode gradients of a scalar function against central
/// differences for every coordinate of each named tensor. The tensors are
/// perturbed in place and restored; `f` must read them on every call.
inline std::vector<GradCheckReport> gradient_check_all(const ScalarFn& f,
                                                       std::vector<std::pair<std::string, Tensor>> targets,
                                                       double eps = 1e-5) {
  std::vector<bool> had_flag;
  for (auto& [name, t] : targets) {
    had_flag.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    if (loss.size() != 1) throw ContractError("gradient_check: function is not scalar-valued, shape " + shape_string(loss.shape()));
    tape.backward(loss);
    for (auto& [name, t] : targets) analytic.emplace_back(t.grad().begin(), t.grad().end());
  }

  std::vector<GradCheckReport> reports;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto& [name, t] = targets[k];
    GradCheckReport rep;
    rep.name = name;
    rep.coordinates = t.size();
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = detail::evaluate_scalar(f);
      values[i] = saved - eps;
      const double down = detail::evaluate_scalar(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[k][i], numeric);
      if (i == 0 || err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_index = i;
        rep.worst_analytic = analytic[k][i];
        rep.worst_numeric = numeric;
      }
    }
    reports.push_back(rep);
  }

  for (std::size_t k = 0; k < targets.size(); ++k) {
    targets[k].second.zero_grad();
    targets[k].second.set_requires_grad(had_flag[k]);
  }
  return reports;
}

/// Single-input form: max relative error of d f(x) / dx.
inline double gradient_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                             double eps = 1e-5) {
  Tensor probe = x;
  auto reports = gradient_check_all([&](Tape& tape) { return f(tape, probe); }, {{"x", probe}}, eps);
  return reports.front().max_rel_error;
}

}  // namespace posenc

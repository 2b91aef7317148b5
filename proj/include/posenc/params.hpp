#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "posenc/tensor.hpp"

namespace posenc {

/// Seeded generator. Distributions are computed by hand from the raw 64-bit
/// stream so results do not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    // Rejection sampling avoids modulo bias for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor(std::move(shape), std::move(v), true);
}

/// Ordered, named collection of trainable tensors. Names are dotted paths
/// ("pose.spatial.post.l0.kernel"), which gives the hierarchy.
class ParamTree {
 public:
  using Entry = std::pair<std::string, Tensor>;

  Tensor add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    t.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, t);
    return t;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("missing parameter '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t tensor_count() const noexcept { return entries_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, t] : entries_) out.push_back(n);
    return out;
  }

  /// Total scalar count, optionally restricted to names under `prefix`.
  std::size_t parameter_count(const std::string& prefix = "") const {
    std::size_t total = 0;
    for (const auto& [n, t] : entries_) {
      if (prefix.empty() || n == prefix || n.rfind(prefix + ".", 0) == 0) total += t.size();
    }
    return total;
  }

  void zero_grad() {
    for (auto& [n, t] : entries_) t.zero_grad();
  }

  ParamTree clone() const {
    ParamTree out;
    for (const auto& [n, t] : entries_) out.add(n, t.clone());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Prefix-scoped read access into a ParamTree.
class ParamView {
 public:
  ParamView(const ParamTree& tree, std::string prefix) : tree_(&tree), prefix_(std::move(prefix)) {}

  const Tensor& at(const std::string& name) const { return tree_->at(full(name)); }
  bool contains(const std::string& name) const { return tree_->contains(full(name)); }
  ParamView sub(const std::string& name) const { return ParamView(*tree_, full(name)); }
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string full(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  const ParamTree* tree_;
  std::string prefix_;
};

}  // namespace posenc

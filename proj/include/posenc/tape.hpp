#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "posenc/tensor.hpp"

namespace posenc {

/// Define-by-run record of executed primitives.
///
/// Ops append a node when recording is on and at least one input needs a
/// gradient. Nodes are stored in execution order, so replaying them in
/// reverse is a valid topological order for the backward pass.
class Tape {
 public:
  enum class Mode { record, inference };

  using BackwardFn = std::function<void()>;

  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const noexcept { return mode_ == Mode::record; }

  /// True when an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const {
    if (!recording()) return false;
    for (const Tensor* t : inputs) {
      if (t && t->requires_grad()) return true;
    }
    return false;
  }
  bool wants(const std::vector<Tensor>& inputs) const {
    if (!recording()) return false;
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) return true;
    }
    return false;
  }

  /// Appends a node. The backward closure reads output.grad() and
  /// accumulates into the inputs that require a gradient.
  void record(std::string op, std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
    output.set_requires_grad(true);
    nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  /// accumulate into existing grad buffers; callers zero parameter grads
  /// between steps.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " +
                          (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss does not depend on any tensor requiring a gradient");
    }
    Tensor seed = loss;
    seed.mutable_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.has_grad()) it->backward();
    }
  }

  void clear() { nodes_.clear(); }

 private:
  Mode mode_;
  std::vector<Node> nodes_;
};

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace posenc

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "posenc/attention.hpp"
#include "posenc/gradcheck.hpp"
#include "posenc/model.hpp"
#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/pose_streams.hpp"
#include "posenc/recurrent.hpp"

// Finite-difference sweeps over the library at three granularities:
// every primitive op, every sub-module, and the whole model at tiny dims.

namespace posenc {

enum class GradScope { op, module, model };

inline GradScope parse_grad_scope(const std::string& s) {
  if (s == "op") return GradScope::op;
  if (s == "module") return GradScope::module;
  if (s == "model") return GradScope::model;
  throw ContractError("unknown gradcheck scope '" + s + "' (expected op|module|model)");
}

inline constexpr double kGradTolerance = 1e-4;

/// One checked tensor within a component.
struct GradcheckEntry {
  std::string component;
  GradCheckReport report;
  bool passed() const { return report.max_rel_error < kGradTolerance; }
};

struct GradcheckSummary {
  std::vector<GradcheckEntry> entries;
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed(); });
  }
  double max_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.report.max_rel_error);
    return m;
  }
};

/// Dimensions small enough to finite-difference the full model quickly.
inline ModelDims tiny_model_dims() {
  ModelDims d;
  d.frames = 4;
  d.joints = 3;
  d.coords = 3;
  d.streams.seu_filters = {4, 4, 4};
  d.streams.teu_filters = {4, 4, 4};
  d.streams.post_filters = {4, 4, 8};
  d.streams.channel_dim = 8;
  d.heads = 4;
  d.hidden = 4;
  d.rgb_dim = 8;
  d.num_classes = 3;
  return d;
}

namespace detail {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero, so ReLU kinks stay outside +-eps.
inline Tensor kink_free_tensor(Rng& rng, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

/// sum(y * r) for a fixed random r: a scalar that weights every output.
inline Tensor project(Tape& tape, const Tensor& y, const Tensor& r) { return ops::sum(tape, ops::mul(tape, y, r)); }

/// Biases and shifts start at zero, which can park a ReLU input exactly on
/// its kink; move them off.
inline void jitter_offsets(const ParamTree& tree, Rng& rng) {
  for (const auto& [name, t] : tree.entries()) {
    if (name.ends_with("bias") || name.ends_with("shift")) {
      Tensor h = t;
      for (double& v : h.mutable_values()) v += rng.uniform(-0.1, 0.1);
    }
  }
}

class Collector {
 public:
  Collector(std::vector<GradcheckEntry>& out, Rng& rng) : out_(out), rng_(rng) {}

  void check(const std::string& component, const ScalarFn& f, std::vector<std::pair<std::string, Tensor>> targets) {
    for (auto& rep : gradient_check_all(f, std::move(targets))) out_.push_back({component, rep});
  }

  /// Every tensor of `tree` plus the named extra inputs.
  void check_tree(const std::string& component, const ScalarFn& f, const ParamTree& tree,
                  std::vector<std::pair<std::string, Tensor>> extra = {}) {
    jitter_offsets(tree, rng_);
    std::vector<std::pair<std::string, Tensor>> targets = std::move(extra);
    for (const auto& [name, t] : tree.entries()) targets.emplace_back(name, t);
    check(component, f, std::move(targets));
  }

 private:
  std::vector<GradcheckEntry>& out_;
  Rng& rng_;
};

inline void op_suite(Collector& c, Rng& rng) {
  using namespace ops;
  {
    Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {3, 4}), r = random_tensor(rng, {3, 4});
    c.check("add", [&](Tape& t) { return project(t, add(t, a, b), r); }, {{"a", a}, {"b", b}});
    c.check("mul", [&](Tape& t) { return project(t, mul(t, a, b), r); }, {{"a", a}, {"b", b}});
    c.check("scale", [&](Tape& t) { return project(t, scale(t, a, -1.7), r); }, {{"a", a}});
    c.check("sigmoid", [&](Tape& t) { return project(t, sigmoid(t, scale(t, a, 3.0)), r); }, {{"a", a}});
    c.check("tanh", [&](Tape& t) { return project(t, ops::tanh(t, scale(t, a, 2.0)), r); }, {{"a", a}});
    Tensor k = kink_free_tensor(rng, {3, 4});
    c.check("relu", [&](Tape& t) { return project(t, relu(t, k), r); }, {{"a", k}});
    c.check("transpose", [&](Tape& t) { return project(t, transpose(t, a), transpose(t, r)); }, {{"a", a}});
    c.check("reshape", [&](Tape& t) { return project(t, reshape(t, a, {2, 6}), reshape(t, r, {2, 6})); }, {{"a", a}});
    c.check("reverse", [&](Tape& t) { return project(t, reverse(t, a), r); }, {{"a", a}});
    c.check("sum", [&](Tape& t) { return sum(t, mul(t, a, a)); }, {{"a", a}});
    Tensor rs = random_tensor(rng, {4});
    c.check("global_avg_pool", [&](Tape& t) { return project(t, global_avg_pool(t, a), rs); }, {{"a", a}});
  }
  {
    Tensor a = random_tensor(rng, {3, 5}), b = random_tensor(rng, {5, 2}), bias = random_tensor(rng, {2});
    Tensor r = random_tensor(rng, {3, 2});
    c.check("matmul", [&](Tape& t) { return project(t, matmul(t, a, b), r); }, {{"a", a}, {"b", b}});
    c.check("dense", [&](Tape& t) { return project(t, dense(t, a, b, bias), r); },
            {{"input", a}, {"weight", b}, {"bias", bias}});
  }
  {
    Tensor x = random_tensor(rng, {6, 3}), k3 = random_tensor(rng, {3, 3, 2}), b = random_tensor(rng, {2});
    Tensor r_same = random_tensor(rng, {6, 2}), r_valid = random_tensor(rng, {4, 2});
    c.check("conv1d[same]", [&](Tape& t) { return project(t, conv1d(t, x, k3, b, Padding::same), r_same); },
            {{"input", x}, {"kernel", k3}, {"bias", b}});
    c.check("conv1d[valid]", [&](Tape& t) { return project(t, conv1d(t, x, k3, b, Padding::valid), r_valid); },
            {{"input", x}, {"kernel", k3}, {"bias", b}});
    Tensor xb = random_tensor(rng, {2, 5, 3}), k2 = random_tensor(rng, {2, 3, 4}), b4 = random_tensor(rng, {4});
    Tensor rb = random_tensor(rng, {2, 5, 4});
    c.check("conv1d[batched,even]", [&](Tape& t) { return project(t, conv1d(t, xb, k2, b4, Padding::same), rb); },
            {{"input", xb}, {"kernel", k2}, {"bias", b4}});
  }
  {
    Tensor a = random_tensor(rng, {3, 4}, -2.0, 2.0), r = random_tensor(rng, {3, 4});
    c.check("softmax", [&](Tape& t) { return project(t, softmax(t, a), r); }, {{"a", a}});
    Tensor gain = random_tensor(rng, {4}, 0.5, 1.5), shift = random_tensor(rng, {4});
    c.check("layer_norm", [&](Tape& t) { return project(t, layer_norm(t, a, gain, shift, 1e-6), r); },
            {{"input", a}, {"gain", gain}, {"shift", shift}});
    Tensor logits = random_tensor(rng, {5});
    c.check("negative_log_likelihood",
            [&](Tape& t) { return negative_log_likelihood(t, softmax(t, reshape(t, logits, {1, 5})), 2); },
            {{"probs(logits)", logits}});
  }
  {
    Tensor a = random_tensor(rng, {2, 3}), b = random_tensor(rng, {4, 3}), r0 = random_tensor(rng, {6, 3});
    c.check("concat[axis0]", [&](Tape& t) { return project(t, concat(t, {a, b}, 0), r0); }, {{"a", a}, {"b", b}});
    Tensor d = random_tensor(rng, {2, 5}), r1 = random_tensor(rng, {2, 8});
    c.check("concat[axis1]", [&](Tape& t) { return project(t, concat(t, {a, d}, 1), r1); }, {{"a", a}, {"b", d}});
    Tensor rs = random_tensor(rng, {4, 2});
    c.check("slice", [&](Tape& t) { return project(t, slice(t, b, 1, 1, 3), rs); }, {{"a", b}});
  }
}

inline void module_suite(Collector& c, Rng& rng) {
  const std::size_t frames = 4, joints = 3, coords = 3;
  StreamConfig sc;
  sc.seu_filters = {4, 4, 4};
  sc.teu_filters = {4, 4, 4};
  sc.post_filters = {4, 4, 8};
  sc.channel_dim = 8;
  {
    ParamTree tree;
    init_conv_stack(tree, "seu", coords, sc.seu(), rng);
    PoseTensor pose(random_tensor(rng, {frames, joints, coords}));
    Tensor r = random_tensor(rng, {frames, joints * 4});
    c.check_tree("seu", [&](Tape& t) { return project(t, seu_encode(t, pose, ParamView(tree, "seu"), sc.seu()), r); },
                 tree, {{"pose", pose.tensor()}});
  }
  {
    ParamTree tree;
    init_conv_stack(tree, "teu", frames, sc.teu(), rng);
    PoseTensor pose(random_tensor(rng, {frames, joints, coords}));
    Tensor r = random_tensor(rng, {4, joints * coords});
    c.check_tree("teu", [&](Tape& t) { return project(t, teu_encode(t, pose, ParamView(tree, "teu"), sc.teu()), r); },
                 tree, {{"pose", pose.tensor()}});
  }
  {
    ParamTree tree;
    init_stream(tree, "stream", 5, sc, rng);
    Tensor x = random_tensor(rng, {frames, 5});
    Tensor r = random_tensor(rng, {frames, 8});
    c.check_tree("stream[projected residual]",
                 [&](Tape& t) { return project(t, stream_forward(t, x, ParamView(tree, "stream"), sc), r); }, tree,
                 {{"input", x}});
  }
  {
    ParamTree tree;
    init_stream(tree, "stream", 8, sc, rng);
    Tensor x = random_tensor(rng, {frames, 8});
    Tensor r = random_tensor(rng, {frames, 8});
    c.check_tree("stream[identity residual]",
                 [&](Tape& t) { return project(t, stream_forward(t, x, ParamView(tree, "stream"), sc), r); }, tree,
                 {{"input", x}});
  }
  for (HeadLayout layout : {HeadLayout::full_width, HeadLayout::split}) {
    AttentionConfig cfg{4, 2, layout, false};
    ParamTree tree;
    init_attention(tree, "mha", cfg, rng);
    Tensor x = random_tensor(rng, {3, 4});
    Tensor r = random_tensor(rng, {3, 4});
    const std::string name = layout == HeadLayout::full_width ? "attention[full_width]" : "attention[split]";
    c.check_tree(name, [&](Tape& t) { return project(t, multi_head_self_attention(t, x, ParamView(tree, "mha"), cfg), r); },
                 tree, {{"input", x}});
  }
  {
    AttentionConfig cfg{4, 2, HeadLayout::full_width, true};
    ParamTree tree;
    init_attention(tree, "mha", cfg, rng);
    Tensor x = random_tensor(rng, {3, 4});
    Tensor r = random_tensor(rng, {3, 4});
    c.check_tree("attention[tied]",
                 [&](Tape& t) { return project(t, multi_head_self_attention(t, x, ParamView(tree, "mha"), cfg), r); },
                 tree, {{"input", x}});
  }
  {
    ParamTree tree;
    init_lstm(tree, "lstm", 2, 2, rng);
    Tensor x = random_tensor(rng, {3, 2});
    Tensor r = random_tensor(rng, {3, 2});
    c.check_tree("lstm", [&](Tape& t) { return project(t, lstm_forward(t, x, ParamView(tree, "lstm")), r); }, tree,
                 {{"input", x}});
  }
  {
    ParamTree tree;
    init_lstm(tree, "fwd", 2, 2, rng);
    init_lstm(tree, "bwd", 2, 2, rng);
    Tensor x = random_tensor(rng, {3, 2});
    Tensor r = random_tensor(rng, {3, 4});
    c.check_tree("bilstm",
                 [&](Tape& t) { return project(t, bilstm(t, x, ParamView(tree, "fwd"), ParamView(tree, "bwd")), r); },
                 tree, {{"input", x}});
  }
}

inline void model_suite(Collector& c, Rng& rng, std::uint64_t seed) {
  const ModelDims dims = tiny_model_dims();
  Model m = build_variant(AblationConfig::variant("full", Branch::both), dims, seed);
  ModelInput in;
  in.pose = PoseTensor(random_tensor(rng, {dims.frames, dims.joints, dims.coords}));
  in.features = random_tensor(rng, {dims.frames, dims.rgb_dim});
  const std::size_t label = rng.below(dims.num_classes);
  c.check_tree("model[full,both]", [&](Tape& t) { return ops::negative_log_likelihood(t, predict(t, m, in), label); },
               m.params);
}

}  // namespace detail

/// Runs the finite-difference suite for one scope; every entry must stay
/// below kGradTolerance.
inline GradcheckSummary run_gradcheck(GradScope scope, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  GradcheckSummary s;
  Rng rng(seed);
  detail::Collector c(s.entries, rng);
  switch (scope) {
    case GradScope::op: detail::op_suite(c, rng); break;
    case GradScope::module: detail::module_suite(c, rng); break;
    case GradScope::model: detail::model_suite(c, rng, seed); break;
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return s;
}

}  // namespace posenc

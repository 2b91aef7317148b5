#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "posenc/attention.hpp"
#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/pose_streams.hpp"
#include "posenc/recurrent.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

namespace posenc {

enum class Branch { pose, rgb, both };

/// Where the two branch sequences meet: concatenated on time before one
/// GAP, or pooled per branch and concatenated on features.
enum class LateFusion { time_concat, pooled_concat };

inline std::string to_string(Branch b) {
  switch (b) {
    case Branch::pose: return "pose";
    case Branch::rgb: return "rgb";
    case Branch::both: return "both";
  }
  return "?";
}

inline Branch parse_branch(const std::string& s) {
  if (s == "pose") return Branch::pose;
  if (s == "rgb") return Branch::rgb;
  if (s == "both") return Branch::both;
  throw ContractError("unknown branch '" + s + "' (expected pose|rgb|both)");
}

/// Which sub-modules a model variant contains.
struct AblationConfig {
  bool use_seu = true;
  bool use_teu = true;
  bool use_attention = true;
  Branch branch = Branch::both;

  bool has_pose() const { return branch != Branch::rgb; }
  bool has_rgb() const { return branch != Branch::pose; }

  /// Named variants: baseline, seu, seu+teu, full.
  static AblationConfig variant(const std::string& name, Branch branch) {
    AblationConfig a;
    a.branch = branch;
    if (name == "baseline") {
      a.use_seu = a.use_teu = a.use_attention = false;
    } else if (name == "seu") {
      a.use_teu = a.use_attention = false;
    } else if (name == "seu+teu") {
      a.use_attention = false;
    } else if (name != "full") {
      throw ContractError("unknown variant '" + name + "' (expected baseline|seu|seu+teu|full)");
    }
    return a;
  }

  std::string variant_name() const {
    if (use_seu && use_teu && use_attention) return "full";
    if (use_seu && use_teu) return "seu+teu";
    if (use_seu && !use_teu && !use_attention) return "seu";
    if (!use_seu && !use_teu && !use_attention) return "baseline";
    std::string s = "custom";
    if (use_seu) s += "+seu";
    if (use_teu) s += "+teu";
    if (use_attention) s += "+attention";
    return s;
  }
};

struct ModelDims {
  std::size_t frames = 20;
  std::size_t joints = 25;
  std::size_t coords = 3;
  StreamConfig streams;
  std::size_t heads = 4;
  HeadLayout head_layout = HeadLayout::full_width;
  bool tied_projections = false;
  std::size_t hidden = 128;
  std::size_t rgb_dim = 1536;
  std::size_t num_classes = 4;
  LateFusion fusion = LateFusion::time_concat;
  double ln_epsilon = 1e-6;
  /// Diagnostic: skip the bi-LSTMs and return the attention output.
  bool bypass_lstm = false;

  void validate() const {
    if (frames == 0 || joints == 0 || coords == 0) throw ContractError("model dims: frames, joints and coords must be positive");
    if (hidden == 0 || num_classes < 2) throw ContractError("model dims: hidden must be positive and num_classes >= 2");
    streams.validate();
    pose_attention().validate();
    rgb_attention().validate();
  }

  AttentionConfig pose_attention() const { return {streams.channel_dim, heads, head_layout, tied_projections}; }
  AttentionConfig rgb_attention() const { return {rgb_dim, heads, head_layout, tied_projections}; }
};

/// Parameters plus the configuration needed to run them.
struct Model {
  ModelDims dims;
  AblationConfig ablation;
  std::uint64_t seed = 0;
  ParamTree params;

  /// Width of a branch output sequence.
  std::size_t branch_width() const {
    if (dims.bypass_lstm) return ablation.branch == Branch::rgb ? dims.rgb_dim : dims.streams.channel_dim;
    return 2 * dims.hidden;
  }

  std::size_t classifier_input() const {
    if (ablation.branch == Branch::both && dims.fusion == LateFusion::pooled_concat) return 2 * branch_width();
    return branch_width();
  }
};

/// Allocates and initializes exactly the sub-modules the variant needs.
/// Initialization order is fixed, so (ablation, dims, seed) determines
/// every value.
inline Model build_variant(const AblationConfig& ablation, const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  if (dims.bypass_lstm && ablation.branch == Branch::both) {
    throw ContractError("bypass_lstm is a single-branch diagnostic");
  }
  Model m{dims, ablation, seed, {}};
  Rng rng(seed);
  const StreamConfig& sc = dims.streams;
  const std::size_t raw_channels = dims.joints * dims.coords;

  if (ablation.has_pose()) {
    std::size_t spatial_in = raw_channels;
    if (ablation.use_seu) {
      init_conv_stack(m.params, "pose.spatial.seu", dims.coords, sc.seu(), rng);
      spatial_in = dims.joints * sc.seu_filters.back();
    }
    init_stream(m.params, "pose.spatial", spatial_in, sc, rng);

    if (ablation.use_teu) init_conv_stack(m.params, "pose.temporal.teu", dims.frames, sc.teu(), rng);
    init_stream(m.params, "pose.temporal", raw_channels, sc, rng);

    if (ablation.use_attention) init_attention(m.params, "pose.attention", dims.pose_attention(), rng);
    if (!dims.bypass_lstm) {
      init_lstm(m.params, "pose.lstm.fwd", sc.channel_dim, dims.hidden, rng);
      init_lstm(m.params, "pose.lstm.bwd", sc.channel_dim, dims.hidden, rng);
    }
  }
  if (ablation.has_rgb()) {
    if (ablation.use_attention) init_attention(m.params, "rgb.attention", dims.rgb_attention(), rng);
    if (!dims.bypass_lstm) {
      init_lstm(m.params, "rgb.lstm.fwd", dims.rgb_dim, dims.hidden, rng);
      init_lstm(m.params, "rgb.lstm.bwd", dims.rgb_dim, dims.hidden, rng);
    }
  }
  const std::size_t fc_in = m.classifier_input();
  m.params.add("classifier.weight", glorot_uniform(rng, {fc_in, dims.num_classes}, fc_in, dims.num_classes));
  m.params.add("classifier.bias", Tensor::zeros({dims.num_classes}));
  return m;
}

/// Spatial and temporal streams fused on time: [T_s + T_t, channel_dim].
inline Tensor pose_streams(Tape& tape, const Model& m, const PoseTensor& pose) {
  const ModelDims& dims = m.dims;
  if (pose.joints() != dims.joints || pose.coords() != dims.coords || pose.frames() != dims.frames) {
    throw DimensionError("pose input " + shape_string(pose.tensor().shape()) + " does not match model dims (" +
                         std::to_string(dims.frames) + ", " + std::to_string(dims.joints) + ", " +
                         std::to_string(dims.coords) + ")");
  }
  const ParamView root(m.params, "pose");
  const StreamConfig& sc = dims.streams;

  Tensor spatial_in = m.ablation.use_seu ? seu_encode(tape, pose, root.sub("spatial.seu"), sc.seu())
                                         : raw_sequence(tape, pose);
  Tensor spatial = stream_forward(tape, spatial_in, root.sub("spatial"), sc, dims.ln_epsilon);

  Tensor temporal_in = m.ablation.use_teu ? teu_encode(tape, pose, root.sub("temporal.teu"), sc.teu())
                                          : raw_sequence(tape, pose);
  Tensor temporal = stream_forward(tape, temporal_in, root.sub("temporal"), sc, dims.ln_epsilon);
  return fuse_pose_streams(tape, spatial, temporal);
}

/// Pose branch: fused streams, optional self-attention, bi-LSTM: [T_p, 2H].
inline Tensor pose_branch(Tape& tape, const Model& m, const PoseTensor& pose) {
  if (!m.ablation.has_pose()) throw ContractError("pose_branch: model was built without the pose branch");
  const ParamView root(m.params, "pose");
  Tensor x = pose_streams(tape, m, pose);
  if (m.ablation.use_attention) x = multi_head_self_attention(tape, x, root.sub("attention"), m.dims.pose_attention());
  if (m.dims.bypass_lstm) return x;
  return bilstm(tape, x, root.sub("lstm.fwd"), root.sub("lstm.bwd"));
}

/// RGB branch over precomputed per-frame features [T, rgb_dim]: optional
/// self-attention, bi-LSTM: [T, 2H].
inline Tensor rgb_branch(Tape& tape, const Model& m, const Tensor& features) {
  if (!m.ablation.has_rgb()) throw ContractError("rgb_branch: model was built without the rgb branch");
  if (features.rank() != 2 || features.dim(1) != m.dims.rgb_dim) {
    throw DimensionError("rgb_branch: features must be [T, " + std::to_string(m.dims.rgb_dim) + "], got " +
                         shape_string(features.shape()));
  }
  if (features.dim(0) != m.dims.frames) {
    throw DimensionError("rgb_branch: time axis 0 is " + std::to_string(features.dim(0)) + ", expected " +
                         std::to_string(m.dims.frames));
  }
  const ParamView root(m.params, "rgb");
  Tensor x = features;
  if (m.ablation.use_attention) x = multi_head_self_attention(tape, x, root.sub("attention"), m.dims.rgb_attention());
  if (m.dims.bypass_lstm) return x;
  return bilstm(tape, x, root.sub("lstm.fwd"), root.sub("lstm.bwd"));
}

/// GAP + FC + softmax over one branch's sequence.
inline Tensor classify_sequence(Tape& tape, const Model& m, const Tensor& seq) {
  Tensor pooled = ops::global_avg_pool(tape, seq);
  Tensor logits = ops::dense(tape, ops::reshape(tape, pooled, {1, pooled.size()}), m.params.at("classifier.weight"),
                             m.params.at("classifier.bias"));
  return ops::reshape(tape, ops::softmax(tape, logits), {m.dims.num_classes});
}

/// Late fusion of both branches, then GAP + FC + softmax: [num_classes].
inline Tensor late_fuse_and_classify(Tape& tape, const Model& m, const Tensor& pose_out, const Tensor& rgb_out) {
  if (pose_out.rank() != 2 || rgb_out.rank() != 2 || pose_out.dim(1) != rgb_out.dim(1)) {
    throw DimensionError("late fusion: feature axis 1 mismatch " + shape_string(pose_out.shape()) + " vs " +
                         shape_string(rgb_out.shape()));
  }
  if (m.dims.fusion == LateFusion::time_concat) {
    return classify_sequence(tape, m, ops::concat(tape, {pose_out, rgb_out}, 0));
  }
  Tensor pooled = ops::concat(tape, {ops::global_avg_pool(tape, pose_out), ops::global_avg_pool(tape, rgb_out)}, 0);
  Tensor logits = ops::dense(tape, ops::reshape(tape, pooled, {1, pooled.size()}), m.params.at("classifier.weight"),
                             m.params.at("classifier.bias"));
  return ops::reshape(tape, ops::softmax(tape, logits), {m.dims.num_classes});
}

/// One example's inputs; which fields are required depends on the branch.
struct ModelInput {
  std::optional<PoseTensor> pose;
  std::optional<Tensor> features;
};

/// Class probabilities for whichever branches the model has.
inline Tensor predict(Tape& tape, const Model& m, const ModelInput& in) {
  const Branch b = m.ablation.branch;
  if (m.ablation.has_pose() && !in.pose) throw ContractError("predict: pose input required for branch " + to_string(b));
  if (m.ablation.has_rgb() && !in.features) throw ContractError("predict: rgb features required for branch " + to_string(b));
  switch (b) {
    case Branch::pose: return classify_sequence(tape, m, pose_branch(tape, m, *in.pose));
    case Branch::rgb: return classify_sequence(tape, m, rgb_branch(tape, m, *in.features));
    case Branch::both:
      return late_fuse_and_classify(tape, m, pose_branch(tape, m, *in.pose), rgb_branch(tape, m, *in.features));
  }
  throw ContractError("predict: unknown branch");
}

}  // namespace posenc

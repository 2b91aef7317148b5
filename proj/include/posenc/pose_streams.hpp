#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

namespace posenc {

/// A preprocessed pose sequence: [T frames, J joints, D coordinates].
class PoseTensor {
 public:
  PoseTensor() = default;
  explicit PoseTensor(Tensor values) : values_(std::move(values)) {
    if (values_.rank() != 3) {
      throw DimensionError("pose tensor must be [T, J, D], got " + shape_string(values_.shape()));
    }
    if (!all_finite(values_)) throw ContractError("pose tensor contains non-finite values");
  }

  const Tensor& tensor() const noexcept { return values_; }
  std::size_t frames() const { return values_.dim(0); }
  std::size_t joints() const { return values_.dim(1); }
  std::size_t coords() const { return values_.dim(2); }
  double at(std::size_t t, std::size_t j, std::size_t d) const {
    return values_[(t * joints() + j) * coords() + d];
  }

 private:
  Tensor values_;
};

enum class Activation { relu, linear };

/// A block of stacked conv1d layers. Hidden layers use `hidden_activation`;
/// the last layer is always linear.
struct ConvStackSpec {
  std::vector<std::size_t> filters;
  std::size_t kernel_width = 3;
  ops::Padding padding = ops::Padding::same;
  Activation hidden_activation = Activation::relu;
};

/// Filter counts and kernel widths for the two pose streams.
struct StreamConfig {
  std::vector<std::size_t> seu_filters{32, 48, 64};
  std::vector<std::size_t> teu_filters{32, 48, 64};
  std::vector<std::size_t> post_filters{96, 112, 120};
  std::size_t seu_kernel = 1;
  std::size_t teu_kernel = 3;
  std::size_t post_kernel = 3;
  std::size_t channel_dim = 120;
  Activation hidden_activation = Activation::relu;

  void validate() const {
    auto check = [](const std::vector<std::size_t>& f, const char* what) {
      if (f.size() != 3) throw ContractError(std::string(what) + " must have exactly 3 layers");
      for (std::size_t v : f) {
        if (v == 0) throw ContractError(std::string(what) + " filter counts must be positive");
      }
    };
    check(seu_filters, "seu_filters");
    check(teu_filters, "teu_filters");
    check(post_filters, "post_filters");
    if (post_filters.back() != channel_dim) {
      throw ContractError("final post filter count " + std::to_string(post_filters.back()) +
                          " must equal channel_dim " + std::to_string(channel_dim));
    }
    if (seu_kernel == 0 || teu_kernel == 0 || post_kernel == 0) throw ContractError("kernel widths must be positive");
  }

  ConvStackSpec seu() const { return {seu_filters, seu_kernel, ops::Padding::same, hidden_activation}; }
  ConvStackSpec teu() const { return {teu_filters, teu_kernel, ops::Padding::same, hidden_activation}; }
  ConvStackSpec post() const { return {post_filters, post_kernel, ops::Padding::same, hidden_activation}; }
};

// ------------------------------------------------------------- conv stacks

inline void init_conv_stack(ParamTree& tree, const std::string& prefix, std::size_t in_channels,
                            const ConvStackSpec& spec, Rng& rng) {
  std::size_t cin = in_channels;
  for (std::size_t i = 0; i < spec.filters.size(); ++i) {
    const std::size_t cout = spec.filters[i];
    const std::string layer = prefix + ".l" + std::to_string(i);
    tree.add(layer + ".kernel",
             glorot_uniform(rng, {spec.kernel_width, cin, cout}, spec.kernel_width * cin, spec.kernel_width * cout));
    tree.add(layer + ".bias", Tensor::zeros({cout}));
    cin = cout;
  }
}

inline Tensor conv_stack(Tape& tape, const Tensor& input, const ParamView& params, const ConvStackSpec& spec) {
  Tensor x = input;
  for (std::size_t i = 0; i < spec.filters.size(); ++i) {
    const ParamView layer = params.sub("l" + std::to_string(i));
    x = ops::conv1d(tape, x, layer.at("kernel"), layer.at("bias"), spec.padding);
    const bool last = i + 1 == spec.filters.size();
    if (!last && spec.hidden_activation == Activation::relu) x = ops::relu(tape, x);
  }
  return x;
}

// -------------------------------------------------------------- encoders

/// Spatial Encoding Unit: every frame's [J, D] slice goes through the conv
/// stack over the joint axis (coordinates as channels); per-frame maps
/// [J, F] are flattened and stacked in time order into [T, J*F].
inline Tensor seu_encode(Tape& tape, const PoseTensor& pose, const ParamView& params, const ConvStackSpec& spec) {
  Tensor maps = conv_stack(tape, pose.tensor(), params, spec);  // [T, J', F]
  return ops::reshape(tape, maps, {maps.dim(0), maps.dim(1) * maps.dim(2)});
}

/// Temporal Encoding Unit pre-transpose map: the J*D coordinate
/// trajectories form the length axis, their T frame values the channels.
/// The conv stack maps the T frame values of each trajectory to F learned
/// temporal features: [J*D, F].
inline Tensor teu_feature_map(Tape& tape, const PoseTensor& pose, const ParamView& params, const ConvStackSpec& spec) {
  Tensor flat = ops::reshape(tape, pose.tensor(), {pose.frames(), pose.joints() * pose.coords()});
  Tensor trajectories = ops::transpose(tape, flat);  // [J*D, T]
  return conv_stack(tape, trajectories, params, spec);
}

/// Temporal Encoding Unit: the learned-filter axis replaces time, [F, J*D].
inline Tensor teu_encode(Tape& tape, const PoseTensor& pose, const ParamView& params, const ConvStackSpec& spec) {
  return ops::transpose(tape, teu_feature_map(tape, pose, params, spec));
}

/// Raw coordinate sequence [T, J*D], the stream input when an encoder is
/// ablated away.
inline Tensor raw_sequence(Tape& tape, const PoseTensor& pose) {
  return ops::reshape(tape, pose.tensor(), {pose.frames(), pose.joints() * pose.coords()});
}

// ---------------------------------------------------------------- streams

inline void init_stream(ParamTree& tree, const std::string& prefix, std::size_t in_channels,
                        const StreamConfig& cfg, Rng& rng) {
  init_conv_stack(tree, prefix + ".post", in_channels, cfg.post(), rng);
  if (in_channels != cfg.channel_dim) {
    tree.add(prefix + ".residual.kernel", glorot_uniform(rng, {1, in_channels, cfg.channel_dim}, in_channels, cfg.channel_dim));
    tree.add(prefix + ".residual.bias", Tensor::zeros({cfg.channel_dim}));
  }
  tree.add(prefix + ".norm.gain", Tensor::filled({cfg.channel_dim}, 1.0));
  tree.add(prefix + ".norm.shift", Tensor::zeros({cfg.channel_dim}));
}

/// Post conv layers, residual from the stream input (1x1 projection when
/// widths differ), then layer normalization.
inline Tensor stream_forward(Tape& tape, const Tensor& encoded, const ParamView& params, const StreamConfig& cfg,
                             double ln_epsilon = 1e-6) {
  if (encoded.rank() != 2) throw DimensionError("stream_forward: input must be [L, C], got " + shape_string(encoded.shape()));
  Tensor body = conv_stack(tape, encoded, params.sub("post"), cfg.post());
  Tensor skip = encoded;
  if (params.contains("residual.kernel")) {
    skip = ops::conv1d(tape, encoded, params.at("residual.kernel"), params.at("residual.bias"), ops::Padding::same);
  }
  Tensor sum = ops::add(tape, body, skip);
  return ops::layer_norm(tape, sum, params.at("norm.gain"), params.at("norm.shift"), ln_epsilon);
}

/// Time-axis concatenation: spatial rows first, then temporal rows.
inline Tensor fuse_pose_streams(Tape& tape, const Tensor& spatial_out, const Tensor& temporal_out) {
  if (spatial_out.rank() != 2 || temporal_out.rank() != 2) {
    throw DimensionError("fuse_pose_streams: inputs must be [T, C]");
  }
  if (spatial_out.dim(1) != temporal_out.dim(1)) {
    throw DimensionError("fuse_pose_streams: channel axis 1 mismatch (" + std::to_string(spatial_out.dim(1)) +
                         " vs " + std::to_string(temporal_out.dim(1)) + ")");
  }
  return ops::concat(tape, {spatial_out, temporal_out}, 0);
}

}  // namespace posenc

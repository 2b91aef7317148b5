#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

namespace posenc {

/// How per-head projections are dimensioned.
///
/// `full_width`: every head projects D -> D and W_o maps h*D -> D.
/// `split`: every head projects D -> D/h and W_o maps D -> D.
enum class HeadLayout { full_width, split };

struct AttentionConfig {
  std::size_t model_dim = 120;
  std::size_t heads = 4;
  HeadLayout layout = HeadLayout::full_width;
  /// One shared projection per head for Q, K and V.
  bool tied_projections = false;

  void validate() const {
    if (model_dim == 0 || heads == 0) throw ContractError("attention: model_dim and heads must be positive");
    if (model_dim % heads != 0) {
      throw ContractError("attention: heads (" + std::to_string(heads) + ") must divide model_dim (" +
                          std::to_string(model_dim) + ")");
    }
  }

  double key_scale() const { return static_cast<double>(model_dim) / static_cast<double>(heads); }
  std::size_t head_width() const { return layout == HeadLayout::full_width ? model_dim : model_dim / heads; }
};

inline void init_attention(ParamTree& tree, const std::string& prefix, const AttentionConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim, w = cfg.head_width();
  for (std::size_t i = 0; i < cfg.heads; ++i) {
    const std::string head = prefix + ".head" + std::to_string(i);
    if (cfg.tied_projections) {
      tree.add(head + ".w", glorot_uniform(rng, {d, w}, d, w));
    } else {
      tree.add(head + ".wq", glorot_uniform(rng, {d, w}, d, w));
      tree.add(head + ".wk", glorot_uniform(rng, {d, w}, d, w));
      tree.add(head + ".wv", glorot_uniform(rng, {d, w}, d, w));
    }
  }
  tree.add(prefix + ".wo", glorot_uniform(rng, {cfg.heads * w, d}, cfg.heads * w, d));
}

struct AttentionResult {
  Tensor output;   // [T, D_v]
  Tensor weights;  // [T, T], rows sum to 1
};

/// softmax(Q K^T / sqrt(d_k)) V, also returning the attention matrix.
inline AttentionResult scaled_dot_attention_full(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                                                 double d_k) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw DimensionError("attention: Q, K, V must be rank 2");
  if (q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: feature axis 1 mismatch between Q and K (" + std::to_string(q.dim(1)) +
                         " vs " + std::to_string(k.dim(1)) + ")");
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: time axis 0 mismatch between K and V (" + std::to_string(k.dim(0)) + " vs " +
                         std::to_string(v.dim(0)) + ")");
  }
  if (!(d_k > 0.0)) throw ContractError("attention: d_k must be positive");
  Tensor scores = ops::matmul(tape, q, ops::transpose(tape, k));
  Tensor weights = ops::softmax(tape, ops::scale(tape, scores, 1.0 / std::sqrt(d_k)));
  return {ops::matmul(tape, weights, v), weights};
}

inline Tensor scaled_dot_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v, double d_k) {
  return scaled_dot_attention_full(tape, q, k, v, d_k).output;
}

/// Self-attention with Q = K = V = X. Each head projects X, attends with
/// scale d_k = D/h, heads are concatenated on the feature axis and mapped
/// back to D by W_o. If `weights` is given, it receives each head's
/// attention matrix.
inline Tensor multi_head_self_attention(Tape& tape, const Tensor& x, const ParamView& params,
                                        const AttentionConfig& cfg, std::vector<Tensor>* weights = nullptr) {
  cfg.validate();
  if (x.rank() != 2) throw DimensionError("multi_head_self_attention: input must be [T, D], got " + shape_string(x.shape()));
  if (x.dim(1) != cfg.model_dim) {
    throw DimensionError("multi_head_self_attention: feature axis 1 is " + std::to_string(x.dim(1)) +
                         ", expected model_dim " + std::to_string(cfg.model_dim));
  }
  std::vector<Tensor> heads;
  heads.reserve(cfg.heads);
  for (std::size_t i = 0; i < cfg.heads; ++i) {
    const ParamView head = params.sub("head" + std::to_string(i));
    Tensor q, k, v;
    if (cfg.tied_projections) {
      q = k = v = ops::matmul(tape, x, head.at("w"));
    } else {
      q = ops::matmul(tape, x, head.at("wq"));
      k = ops::matmul(tape, x, head.at("wk"));
      v = ops::matmul(tape, x, head.at("wv"));
    }
    AttentionResult r = scaled_dot_attention_full(tape, q, k, v, cfg.key_scale());
    if (weights) weights->push_back(r.weights);
    heads.push_back(r.output);
  }
  Tensor joined = heads.size() == 1 ? heads.front() : ops::concat(tape, heads, 1);
  return ops::matmul(tape, joined, params.at("wo"));
}

}  // namespace posenc

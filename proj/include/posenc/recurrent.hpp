#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "posenc/kernels.hpp"
#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"

namespace posenc {

// Gate blocks are laid out [input | forget | cell | output] along the 4H axis.

inline void init_lstm(ParamTree& tree, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                      Rng& rng) {
  tree.add(prefix + ".w_x", glorot_uniform(rng, {input_dim, 4 * hidden}, input_dim, 4 * hidden));
  tree.add(prefix + ".w_h", glorot_uniform(rng, {hidden, 4 * hidden}, hidden, 4 * hidden));
  std::vector<double> bias(4 * hidden, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
  tree.add(prefix + ".bias", Tensor({4 * hidden}, std::move(bias)));
}

/// Unidirectional LSTM over seq [T, D], zero initial state, returning the
/// full hidden sequence [T, H]. Recorded as a single tape node with a
/// hand-written backpropagation-through-time closure.
inline Tensor lstm_forward(Tape& tape, const Tensor& seq, const ParamView& params) {
  const Tensor& w_x = params.at("w_x");
  const Tensor& w_h = params.at("w_h");
  const Tensor& bias = params.at("bias");
  if (seq.rank() != 2) throw DimensionError("lstm: sequence must be [T, D], got " + shape_string(seq.shape()));
  const std::size_t steps = seq.dim(0), d = seq.dim(1), h = w_h.dim(0), g4 = 4 * h;
  if (w_x.rank() != 2 || w_x.dim(0) != d) {
    throw DimensionError("lstm: input axis 1 (" + std::to_string(d) + ") does not match w_x axis 0 " +
                         shape_string(w_x.shape()));
  }
  if (w_x.dim(1) != g4 || w_h.dim(1) != g4 || bias.size() != g4) {
    throw DimensionError("lstm: gate axis must be 4H = " + std::to_string(g4));
  }

  // gates[t] holds activated (i, f, g, o); cells[t] holds c_t.
  std::vector<double> gates(steps * g4);
  std::vector<double> cells(steps * h);
  std::vector<double> hidden(steps * h);
  for (std::size_t t = 0; t < steps; ++t) std::copy(bias.values().begin(), bias.values().end(), gates.begin() + t * g4);
  kernels::gemm_nn(seq.values().data(), w_x.values().data(), gates.data(), steps, d, g4);

  const double* wh = w_h.values().data();
  for (std::size_t t = 0; t < steps; ++t) {
    double* z = gates.data() + t * g4;
    if (t > 0) kernels::gemm_nn(hidden.data() + (t - 1) * h, wh, z, 1, h, g4);
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = ops::detail::stable_sigmoid(z[j]);
      const double f_g = ops::detail::stable_sigmoid(z[h + j]);
      const double c_g = std::tanh(z[2 * h + j]);
      const double o_g = ops::detail::stable_sigmoid(z[3 * h + j]);
      z[j] = i_g;
      z[h + j] = f_g;
      z[2 * h + j] = c_g;
      z[3 * h + j] = o_g;
      const double c_prev = t > 0 ? cells[(t - 1) * h + j] : 0.0;
      const double c = f_g * c_prev + i_g * c_g;
      cells[t * h + j] = c;
      hidden[t * h + j] = o_g * std::tanh(c);
    }
  }

  Tensor y({steps, h}, hidden);
  if (tape.wants({&seq, &w_x, &w_h, &bias})) {
    tape.record("lstm", {seq, w_x, w_h, bias}, y,
                [seq, w_x, w_h, bias, y, steps, d, h, g4, gates = std::move(gates), cells = std::move(cells)]() mutable {
                  const auto gy = y.grad();
                  const auto hv = y.values();
                  std::vector<double> dz(steps * g4, 0.0);
                  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
                  const double* wh = w_h.values().data();
                  double* gwh = w_h.requires_grad() ? w_h.mutable_grad().data() : nullptr;
                  for (std::size_t t = steps; t-- > 0;) {
                    const double* a = gates.data() + t * g4;
                    double* dzt = dz.data() + t * g4;
                    for (std::size_t j = 0; j < h; ++j) {
                      const double i_g = a[j], f_g = a[h + j], c_g = a[2 * h + j], o_g = a[3 * h + j];
                      const double c = cells[t * h + j];
                      const double c_prev = t > 0 ? cells[(t - 1) * h + j] : 0.0;
                      const double tc = std::tanh(c);
                      const double dh = gy[t * h + j] + dh_next[j];
                      const double dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
                      dzt[j] = dc * c_g * i_g * (1.0 - i_g);
                      dzt[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                      dzt[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                      dzt[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
                      dc_next[j] = dc * f_g;
                    }
                    std::fill(dh_next.begin(), dh_next.end(), 0.0);
                    if (t > 0) {
                      kernels::gemm_nt(dzt, wh, dh_next.data(), 1, g4, h);
                      if (gwh) kernels::gemm_tn(hv.data() + (t - 1) * h, dzt, gwh, 1, h, g4);
                    }
                  }
                  if (seq.requires_grad())
                    kernels::gemm_nt(dz.data(), w_x.values().data(), seq.mutable_grad().data(), steps, g4, d);
                  if (w_x.requires_grad())
                    kernels::gemm_tn(seq.values().data(), dz.data(), w_x.mutable_grad().data(), steps, d, g4);
                  if (bias.requires_grad()) {
                    auto gb = bias.mutable_grad();
                    for (std::size_t t = 0; t < steps; ++t)
                      for (std::size_t j = 0; j < g4; ++j) gb[j] += dz[t * g4 + j];
                  }
                });
  }
  return y;
}

/// Forward LSTM plus an LSTM over the reversed sequence whose outputs are
/// re-reversed to align with time; features concatenated: [T, 2H].
inline Tensor bilstm(Tape& tape, const Tensor& seq, const ParamView& fwd, const ParamView& bwd) {
  Tensor forward = lstm_forward(tape, seq, fwd);
  Tensor backward = ops::reverse(tape, lstm_forward(tape, ops::reverse(tape, seq), bwd));
  return ops::concat(tape, {forward, backward}, 1);
}

}  // namespace posenc

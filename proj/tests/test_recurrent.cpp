#include <gtest/gtest.h>

#include "posenc/gradcheck.hpp"
#include "posenc/recurrent.hpp"
#include "support.hpp"

using namespace posenc;
using testing_support::TestRng;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Reference recurrence with gates [i | f | g | o], written out per unit.
std::vector<double> loop_lstm(const std::vector<double>& x, std::size_t T, std::size_t D, const ParamTree& tree,
                              const std::string& p) {
  const auto& wx = tree.at(p + ".w_x").vec();
  const auto& wh = tree.at(p + ".w_h").vec();
  const auto& b = tree.at(p + ".bias").vec();
  const std::size_t H = tree.at(p + ".w_h").dim(0);
  std::vector<double> h(H, 0.0), c(H, 0.0), out(T * H);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> z(b.begin(), b.end());
    for (std::size_t g = 0; g < 4 * H; ++g) {
      for (std::size_t d = 0; d < D; ++d) z[g] += x[t * D + d] * wx[d * 4 * H + g];
      for (std::size_t k = 0; k < H; ++k) z[g] += h[k] * wh[k * 4 * H + g];
    }
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = sig(z[H + j]) * c[j] + sig(z[j]) * std::tanh(z[2 * H + j]);
      h[j] = sig(z[3 * H + j]) * std::tanh(c[j]);
      out[t * H + j] = h[j];
    }
  }
  return out;
}

std::vector<double> reverse_rows(const std::vector<double>& v, std::size_t T, std::size_t w) {
  std::vector<double> out(v.size());
  for (std::size_t t = 0; t < T; ++t) std::copy_n(v.begin() + (T - 1 - t) * w, w, out.begin() + t * w);
  return out;
}

ParamTree two_lstms(std::size_t D, std::size_t H, std::uint64_t seed) {
  ParamTree tree;
  Rng init(seed);
  init_lstm(tree, "p", D, H, init);
  init_lstm(tree, "q", D, H, init);
  return tree;
}

}  // namespace

TEST(Lstm, ForgetBiasStartsAtOne) {
  ParamTree tree;
  Rng init(1);
  init_lstm(tree, "l", 3, 4, init);
  const auto& b = tree.at("l.bias").vec();
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(b[j], (j >= 4 && j < 8) ? 1.0 : 0.0);
}

TEST(Lstm, ZeroParametersGiveZeroStates) {
  ParamTree tree;
  tree.add("l.w_x", Tensor::zeros({2, 12}));
  tree.add("l.w_h", Tensor::zeros({3, 12}));
  tree.add("l.bias", Tensor::zeros({12}));
  TestRng rng(2);
  Tape tape;
  Tensor y = lstm_forward(tape, rng.tensor({5, 2}), ParamView(tree, "l"));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, HandComputedTwoStepRecurrence) {
  // H=1, D=1: z = x*wx + h*wh + b for each gate.
  ParamTree tree;
  tree.add("l.w_x", Tensor({1, 4}, {0.5, -0.3, 0.8, 0.2}));
  tree.add("l.w_h", Tensor({1, 4}, {0.1, 0.4, -0.6, 0.7}));
  tree.add("l.bias", Tensor({4}, {0.0, 1.0, 0.1, -0.2}));
  const double x0 = 0.7, x1 = -1.1;
  const double i0 = sig(0.5 * x0), f0 = sig(-0.3 * x0 + 1.0), g0 = std::tanh(0.8 * x0 + 0.1), o0 = sig(0.2 * x0 - 0.2);
  const double c0 = f0 * 0.0 + i0 * g0, h0 = o0 * std::tanh(c0);
  const double i1 = sig(0.5 * x1 + 0.1 * h0), f1 = sig(-0.3 * x1 + 0.4 * h0 + 1.0);
  const double g1 = std::tanh(0.8 * x1 - 0.6 * h0 + 0.1), o1 = sig(0.2 * x1 + 0.7 * h0 - 0.2);
  const double c1 = f1 * c0 + i1 * g1, h1 = o1 * std::tanh(c1);
  Tape tape;
  Tensor y = lstm_forward(tape, Tensor({2, 1}, {x0, x1}), ParamView(tree, "l"));
  EXPECT_NEAR(y[0], h0, 1e-12);
  EXPECT_NEAR(y[1], h1, 1e-12);
}

TEST(Lstm, MatchesLoopRecurrenceAndStaysBounded) {
  TestRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = rng.integer(1, 8), D = rng.integer(1, 5), H = rng.integer(1, 5);
    ParamTree tree = two_lstms(D, H, trial);
    Tensor x = rng.tensor({T, D}, -20, 20);
    Tape tape;
    Tensor y = lstm_forward(tape, x, ParamView(tree, "p"));
    ASSERT_EQ(y.shape(), (Shape{T, H}));
    ASSERT_LT(testing_support::max_abs_diff(y.values(), loop_lstm(x.vec(), T, D, tree, "p")), 1e-12);
    for (double v : y.values()) ASSERT_TRUE(v > -1.0 && v < 1.0);
  }
}

TEST(Lstm, DimensionErrors) {
  ParamTree tree = two_lstms(3, 2, 1);
  Tape tape;
  TestRng rng(4);
  EXPECT_THROW(lstm_forward(tape, rng.tensor({4, 2}), ParamView(tree, "p")), DimensionError);
  EXPECT_THROW(lstm_forward(tape, rng.tensor({4}), ParamView(tree, "p")), DimensionError);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  TestRng rng(5);
  ParamTree tree = two_lstms(2, 2, 5);
  Tensor x = rng.tensor({3, 2});
  Tensor r = rng.tensor({3, 2});
  ScalarFn f = [&](Tape& tape) { return ops::sum(tape, ops::mul(tape, lstm_forward(tape, x, ParamView(tree, "p")), r)); };
  std::vector<std::pair<std::string, Tensor>> targets{{"x", x}};
  for (const auto& [n, t] : tree.entries()) {
    if (n.starts_with("p.")) targets.emplace_back(n, t);
  }
  for (const auto& rep : gradient_check_all(f, targets)) EXPECT_LT(rep.max_rel_error, 1e-4) << rep.name;
}

// ------------------------------------------------------------------ bilstm

TEST(BiLstm, MatchesTwoPassOracle) {
  TestRng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = trial == 0 ? 3 : rng.integer(1, 7), D = trial == 0 ? 2 : rng.integer(1, 4),
                      H = trial == 0 ? 2 : rng.integer(1, 4);
    ParamTree tree = two_lstms(D, H, trial);
    Tensor x = rng.tensor({T, D});
    Tape tape;
    Tensor y = bilstm(tape, x, ParamView(tree, "p"), ParamView(tree, "q"));
    ASSERT_EQ(y.shape(), (Shape{T, 2 * H}));
    const auto fwd = loop_lstm(x.vec(), T, D, tree, "p");
    const auto bwd = reverse_rows(loop_lstm(reverse_rows(x.vec(), T, D), T, D, tree, "q"), T, H);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < H; ++j) {
        ASSERT_NEAR(y.at(t, j), fwd[t * H + j], 1e-12);
        ASSERT_NEAR(y.at(t, H + j), bwd[t * H + j], 1e-12);
      }
  }
}

TEST(BiLstm, ReversalSymmetry) {
  // bilstm(reverse(x), p, q) == reverse(swap_halves(bilstm(x, q, p)))
  TestRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = rng.integer(1, 9), D = rng.integer(1, 4), H = rng.integer(1, 4);
    ParamTree tree = two_lstms(D, H, trial + 1000);
    Tensor x = rng.tensor({T, D}, -3, 3);
    Tape tape(Tape::Mode::inference);
    Tensor lhs = bilstm(tape, ops::reverse(tape, x), ParamView(tree, "p"), ParamView(tree, "q"));
    Tensor rhs = bilstm(tape, x, ParamView(tree, "q"), ParamView(tree, "p"));
    Tensor swapped = ops::concat(tape, {ops::slice(tape, rhs, 1, H, 2 * H), ops::slice(tape, rhs, 1, 0, H)}, 1);
    ASSERT_LT(testing_support::max_abs_diff(lhs.values(), ops::reverse(tape, swapped).values()), 1e-12);
  }
}

TEST(BiLstm, GradientsMatchFiniteDifferences) {
  TestRng rng(8);
  ParamTree tree = two_lstms(2, 2, 8);
  Tensor x = rng.tensor({3, 2});
  Tensor r = rng.tensor({3, 4});
  ScalarFn f = [&](Tape& tape) {
    return ops::sum(tape, ops::mul(tape, bilstm(tape, x, ParamView(tree, "p"), ParamView(tree, "q")), r));
  };
  std::vector<std::pair<std::string, Tensor>> targets{{"x", x}};
  for (const auto& [n, t] : tree.entries()) targets.emplace_back(n, t);
  for (const auto& rep : gradient_check_all(f, targets)) EXPECT_LT(rep.max_rel_error, 1e-4) << rep.name;
}

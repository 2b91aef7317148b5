#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "posenc/gradcheck.hpp"
#include "posenc/ops.hpp"
#include "posenc/tape.hpp"
#include "posenc/tensor.hpp"
#include "support.hpp"

using namespace posenc;
using testing_support::TestRng;

namespace {

Tensor t2(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor({r, c}, std::move(v)); }

}  // namespace

// ------------------------------------------------------------------ Tensor

TEST(Tensor, ShapeMustMatchValueCount) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}, {}), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(t.dim(2), DimensionError);
}

TEST(Tensor, HandlesAliasAndCloneDetaches) {
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  b.mutable_values()[1] = 5.0;
  EXPECT_EQ(a[1], 5.0);
  Tensor c = a.clone();
  c.mutable_values()[1] = 7.0;
  EXPECT_EQ(a[1], 5.0);
}

TEST(Tensor, GradHasValueShape) {
  Tensor a = Tensor::zeros({2, 2}, true);
  EXPECT_FALSE(a.has_grad());
  EXPECT_EQ(a.grad().size(), a.size());
}

// ------------------------------------------------------------------ conv1d

TEST(Conv1d, IdentityKernelReproducesInput) {
  TestRng rng(1);
  Tape tape;
  Tensor x = rng.tensor({6, 3});
  std::vector<double> k(9, 0.0);
  for (int c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  Tensor y = ops::conv1d(tape, x, Tensor({1, 3, 3}, k), Tensor::zeros({3}), ops::Padding::same);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(testing_support::max_abs_diff(y.values(), x.values()), 0.0);
}

TEST(Conv1d, PerFrameSeuShape) {
  TestRng rng(2);
  Tape tape;
  Tensor y = ops::conv1d(tape, rng.tensor({25, 3}), rng.tensor({1, 3, 64}), rng.tensor({64}), ops::Padding::same);
  EXPECT_EQ(y.shape(), (Shape{25, 64}));
}

TEST(Conv1d, ValidMatchesNestedLoopOracle) {
  TestRng rng(3);
  Tape tape;
  Tensor x = rng.tensor({5, 2}), k = rng.tensor({2, 2, 3}), b = rng.tensor({3});
  Tensor y = ops::conv1d(tape, x, k, b, ops::Padding::valid);
  ASSERT_EQ(y.shape(), (Shape{4, 3}));
  const auto want = testing_support::loop_conv1d(x.vec(), k.vec(), b.vec(), 5, 2, 2, 3, 0, 4);
  EXPECT_LT(testing_support::max_abs_diff(y.values(), want), 1e-12);
}

TEST(Conv1d, RandomSizesMatchOracleWithin1e12) {
  TestRng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = rng.integer(1, 32), cin = rng.integer(1, 8), cout = rng.integer(1, 8);
    const bool same = trial % 2 == 0;
    const std::size_t K = rng.integer(1, same ? 7 : std::min<std::size_t>(L, 7));
    Tensor x = rng.tensor({L, cin}, -10, 10), k = rng.tensor({K, cin, cout}, -10, 10), b = rng.tensor({cout}, -10, 10);
    Tape tape;
    Tensor y = ops::conv1d(tape, x, k, b, same ? ops::Padding::same : ops::Padding::valid);
    const std::size_t left = same ? K / 2 : 0, out = same ? L : L - K + 1;
    const auto want = testing_support::loop_conv1d(x.vec(), k.vec(), b.vec(), L, cin, K, cout, left, out);
    double scale = 1.0;
    for (double v : want) scale = std::max(scale, std::abs(v));
    ASSERT_LT(testing_support::max_abs_diff(y.values(), want), 1e-12 * scale) << "trial " << trial;
  }
}

TEST(Conv1d, EvenKernelPadsMoreOnTheLeft) {
  // K=2 same: output[t] = x[t-1]*k0 + x[t]*k1
  Tape tape;
  Tensor x({3, 1}, {1, 2, 3});
  Tensor y = ops::conv1d(tape, x, Tensor({2, 1, 1}, {10, 1}), Tensor(), ops::Padding::same);
  EXPECT_EQ(y.vec(), (std::vector<double>{1, 12, 23}));
}

TEST(Conv1d, BatchedEqualsPerRowCalls) {
  TestRng rng(5);
  Tensor xb = rng.tensor({4, 6, 3}), k = rng.tensor({3, 3, 5}), b = rng.tensor({5});
  Tape tape;
  Tensor yb = ops::conv1d(tape, xb, k, b, ops::Padding::same);
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor row = ops::slice(tape, xb, 0, i, i + 1);
    Tensor yi = ops::conv1d(tape, ops::reshape(tape, row, {6, 3}), k, b, ops::Padding::same);
    Tensor got = ops::reshape(tape, ops::slice(tape, yb, 0, i, i + 1), {6, 5});
    EXPECT_LT(testing_support::max_abs_diff(got.values(), yi.values()), 1e-14);
  }
}

TEST(Conv1d, ShapeErrorsNameTheAxis) {
  Tape tape;
  TestRng rng(6);
  try {
    ops::conv1d(tape, rng.tensor({5, 2}), rng.tensor({1, 3, 4}), Tensor(), ops::Padding::same);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel axis"), std::string::npos) << e.what();
  }
  try {
    ops::conv1d(tape, rng.tensor({2, 2}), rng.tensor({3, 2, 4}), Tensor(), ops::Padding::valid);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("length axis"), std::string::npos) << e.what();
  }
}

// ------------------------------------------------------------------- dense

TEST(Dense, IdentityWeightIsIdentity) {
  TestRng rng(7);
  Tape tape;
  Tensor x = rng.tensor({3, 4});
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  Tensor y = ops::dense(tape, x, Tensor({4, 4}, eye), Tensor::zeros({4}));
  EXPECT_EQ(testing_support::max_abs_diff(y.values(), x.values()), 0.0);
}

TEST(Dense, ClosedForm) {
  Tape tape;
  Tensor y = ops::dense(tape, t2(1, 2, {1, 2}), t2(2, 2, {1, 0, 0, 1}), Tensor({2}, {3, -3}));
  EXPECT_EQ(y.vec(), (std::vector<double>{4, -1}));
}

TEST(Dense, MatchesLoopMatmulOracle) {
  TestRng rng(8);
  Tape tape;
  Tensor a = rng.tensor({3, 4}), w = rng.tensor({4, 2});
  Tensor y = ops::dense(tape, a, w, Tensor());
  EXPECT_LT(testing_support::max_abs_diff(y.values(), testing_support::loop_matmul(a.vec(), w.vec(), 3, 4, 2)), 1e-14);
  EXPECT_THROW(ops::dense(tape, a, rng.tensor({3, 2}), Tensor()), DimensionError);
}

TEST(Matmul, TransposeMatchesLoop) {
  TestRng rng(9);
  Tape tape;
  Tensor a = rng.tensor({3, 5});
  EXPECT_EQ(ops::transpose(tape, a).vec(), testing_support::transpose_loop(a.vec(), 3, 5));
}

// ----------------------------------------------------------------- softmax

TEST(Softmax, ClosedForms) {
  Tape tape;
  Tensor u = ops::softmax(tape, t2(1, 3, {4, 4, 4}));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Tensor p = ops::softmax(tape, t2(1, 2, {0.0, std::log(2.0)}));
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  TestRng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.integer(1, 6), m = rng.integer(1, 9);
    Tensor x = rng.tensor({n, m}, -30, 30);
    std::vector<double> shifted = x.vec();
    for (std::size_t r = 0; r < n; ++r) {
      const double c = rng.uniform(-50, 50);
      for (std::size_t j = 0; j < m; ++j) shifted[r * m + j] += c;
    }
    Tape tape;
    Tensor y = ops::softmax(tape, x);
    Tensor ys = ops::softmax(tape, Tensor({n, m}, shifted));
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        EXPECT_GE(y.at(r, j), 0.0);
        s += y.at(r, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_LT(testing_support::max_abs_diff(y.values(), ys.values()), 1e-12);
    EXPECT_LT(testing_support::max_abs_diff(y.values(), testing_support::loop_softmax_rows(x.vec(), n, m)), 1e-14);
  }
}

TEST(Softmax, PlusSevenGivesIdenticalRow) {
  Tape tape;
  Tensor a = ops::softmax(tape, t2(1, 3, {0.3, -1.2, 2.5}));
  Tensor b = ops::softmax(tape, t2(1, 3, {7.3, 5.8, 9.5}));
  EXPECT_LT(testing_support::max_abs_diff(a.values(), b.values()), 1e-15);
}

// -------------------------------------------------------------- layer_norm

TEST(LayerNorm, ConstantRowGivesZeros) {
  Tape tape;
  Tensor y = ops::layer_norm(tape, t2(1, 4, {3, 3, 3, 3}), Tensor::filled({4}, 1.0), Tensor::zeros({4}), 1e-6);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, UnitGainNormalizesRows) {
  TestRng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.integer(1, 5), d = rng.integer(2, 16);
    Tensor x = rng.tensor({n, d}, -10, 10);
    // Rows with variance >= 1 keep the epsilon effect below 1e-6.
    std::vector<double> v = x.vec();
    for (std::size_t r = 0; r < n; ++r) {
      v[r * d] = 5.0;
      v[r * d + 1] = -5.0;
    }
    Tape tape;
    Tensor y = ops::layer_norm(tape, Tensor({n, d}, v), Tensor::filled({d}, 1.0), Tensor::zeros({d}), 1e-6);
    for (std::size_t r = 0; r < n; ++r) {
      double mean = 0.0, var = 0.0;
      for (std::size_t j = 0; j < d; ++j) mean += y.at(r, j);
      mean /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) var += (y.at(r, j) - mean) * (y.at(r, j) - mean);
      var /= static_cast<double>(d);
      EXPECT_LT(std::abs(mean), 1e-10);
      EXPECT_LT(std::abs(var - 1.0), 1e-6);
    }
  }
}

TEST(LayerNorm, MatchesTwoPassOracle) {
  TestRng rng(12);
  Tensor x = rng.tensor({2, 5}), g = rng.tensor({5}), s = rng.tensor({5});
  Tape tape;
  Tensor y = ops::layer_norm(tape, x, g, s, 1e-6);
  for (std::size_t r = 0; r < 2; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 5; ++j) mean += x.at(r, j);
    mean /= 5.0;
    double var = 0.0;
    for (std::size_t j = 0; j < 5; ++j) var += (x.at(r, j) - mean) * (x.at(r, j) - mean);
    var /= 5.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(y.at(r, j), (x.at(r, j) - mean) / std::sqrt(var + 1e-6) * g[j] + s[j], 1e-13);
    }
  }
}

// ------------------------------------------------------------- elementwise

TEST(Elementwise, ClosedForms) {
  Tape tape;
  TestRng rng(13);
  Tensor x = rng.tensor({2, 3});
  EXPECT_EQ(ops::elementwise(tape, ops::Elementwise::add, x, Tensor::zeros({2, 3})).vec(), x.vec());
  EXPECT_EQ(ops::sigmoid(tape, Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(ops::tanh(tape, Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_EQ(ops::relu(tape, Tensor({2}, {-1, 2})).vec(), (std::vector<double>{0, 2}));
  EXPECT_THROW(ops::add(tape, x, Tensor::zeros({3, 2})), DimensionError);
  EXPECT_THROW(ops::mul(tape, x, Tensor::zeros({6})), DimensionError);
}

TEST(Elementwise, SigmoidIsFiniteForLargeInputs) {
  Tape tape;
  Tensor y = ops::sigmoid(tape, Tensor({2}, {-800.0, 800.0}));
  EXPECT_TRUE(all_finite(y));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

// ------------------------------------------------------------------ concat

TEST(Concat, SinglePartUnchanged) {
  TestRng rng(14);
  Tape tape;
  Tensor a = rng.tensor({3, 4});
  EXPECT_EQ(ops::concat(tape, {a}, 0).vec(), a.vec());
}

TEST(Concat, PoseFusionShape) {
  TestRng rng(15);
  Tape tape;
  EXPECT_EQ(ops::concat(tape, {rng.tensor({20, 120}), rng.tensor({64, 120})}, 0).shape(), (Shape{84, 120}));
  EXPECT_THROW(ops::concat(tape, {rng.tensor({2, 3}), rng.tensor({2, 4})}, 0), DimensionError);
}

TEST(Concat, SlicingRecoversPartsBitExactly) {
  TestRng rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t axis = trial % 2, other = rng.integer(1, 5);
    std::vector<Tensor> parts;
    for (std::size_t p = 0, n = rng.integer(1, 4); p < n; ++p) {
      const std::size_t len = rng.integer(1, 6);
      parts.push_back(rng.tensor(axis == 0 ? Shape{len, other} : Shape{other, len}, -1e3, 1e3));
    }
    Tape tape;
    Tensor joined = ops::concat(tape, parts, axis);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      Tensor back = ops::slice(tape, joined, axis, offset, offset + p.dim(axis));
      ASSERT_TRUE(testing_support::bit_equal(back.values(), p.values()));
      offset += p.dim(axis);
    }
    EXPECT_EQ(offset, joined.dim(axis));
  }
}

// -------------------------------------------------------- global_avg_pool

TEST(GlobalAvgPool, ClosedForms) {
  Tape tape;
  EXPECT_EQ(ops::global_avg_pool(tape, t2(1, 3, {1, 2, 3})).vec(), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(ops::global_avg_pool(tape, t2(2, 2, {1, 3, 3, 1})).vec(), (std::vector<double>{2, 2}));
  EXPECT_THROW(ops::global_avg_pool(tape, Tensor::zeros({4})), DimensionError);
}

TEST(GlobalAvgPool, MatchesLoopSum) {
  TestRng rng(17);
  Tape tape;
  Tensor x = rng.tensor({7, 5});
  Tensor y = ops::global_avg_pool(tape, x);
  for (std::size_t d = 0; d < 5; ++d) {
    double s = 0.0;
    for (std::size_t t = 0; t < 7; ++t) s += x.at(t, d);
    EXPECT_NEAR(y[d], s / 7.0, 1e-15);
  }
}

// ---------------------------------------------------------------- backward

TEST(Backward, LinearAndQuadraticClosedForms) {
  TestRng rng(18);
  Tensor x = rng.tensor({3, 2});
  x.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(ops::sum(tape, x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  }
  x.zero_grad();
  {
    Tape tape;
    tape.backward(ops::sum(tape, ops::mul(tape, x, x)));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i]);
  }
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor x = Tensor::filled({2}, 1.0, true);
  Tape tape;
  Tensor y = ops::scale(tape, x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, DiamondGraphSumsBothPaths) {
  TestRng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = rng.tensor({2, 3});
    auto f = [](Tape& tape, const Tensor& in) {
      Tensor a = ops::tanh(tape, in);
      Tensor b = ops::mul(tape, in, in);
      return ops::sum(tape, ops::mul(tape, a, b));
    };
    EXPECT_LT(gradient_check(f, x), 1e-4);
    // Analytic: d/dx tanh(x) x^2 = (1 - tanh^2) x^2 + 2x tanh(x).
    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    Tape tape;
    tape.backward(f(tape, probe));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double th = std::tanh(x[i]);
      EXPECT_NEAR(probe.grad()[i], (1 - th * th) * x[i] * x[i] + 2 * x[i] * th, 1e-14);
    }
  }
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  Tensor x = Tensor::filled({3}, 2.0, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(ops::sum(tape, x));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
}

TEST(Backward, InferenceTapeRecordsNothing) {
  Tensor x = Tensor::filled({3}, 2.0, true);
  Tape tape(Tape::Mode::inference);
  Tensor y = ops::sum(tape, ops::mul(tape, x, x));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

// ---------------------------------------------------------- gradient_check

TEST(GradientCheck, ExactForLinearFunction) {
  TestRng rng(20);
  Tensor x = rng.tensor({4, 3});
  EXPECT_LT(gradient_check([](Tape& t, const Tensor& in) { return ops::sum(t, in); }, x), 1e-10);
}

TEST(GradientCheck, SoftmaxPickFirst) {
  TestRng rng(21);
  Tensor x = rng.tensor({1, 4});
  auto f = [](Tape& t, const Tensor& in) { return ops::slice(t, ops::reshape(t, ops::softmax(t, in), {4}), 0, 0, 1); };
  EXPECT_LT(gradient_check(f, x, 1e-5), 1e-6);
}

TEST(GradientCheck, RejectsNonScalarFunction) {
  Tensor x = Tensor::filled({3}, 1.0);
  EXPECT_THROW(gradient_check([](Tape& t, const Tensor& in) { return ops::scale(t, in, 2.0); }, x), ContractError);
}

TEST(GradientCheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  auto f = [](Tape& tape, const Tensor& in) {
    std::vector<double> v(in.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = in[i] * in[i];
    Tensor y(in.shape(), v);
    if (tape.wants({&in})) {
      tape.record("bad_square", {in}, y, [in, y]() mutable {
        for (std::size_t i = 0; i < in.size(); ++i) in.mutable_grad()[i] += 3.0 * in[i] * y.grad()[i];
      });
    }
    return ops::sum(tape, y);
  };
  EXPECT_GT(gradient_check(f, Tensor({2}, {0.5, -1.5})), 0.1);
}

// ------------------------------------ finite differences, every primitive

namespace {

using Builder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct PrimitiveCase {
  std::string name;
  std::function<std::vector<Tensor>(TestRng&)> inputs;
  Builder build;
};

std::vector<PrimitiveCase> primitive_cases() {
  using P = ops::Padding;
  return {
      {"add", [](TestRng& r) { return std::vector{r.tensor({3, 4}), r.tensor({3, 4})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::add(t, in[0], in[1]); }},
      {"mul", [](TestRng& r) { return std::vector{r.tensor({3, 4}), r.tensor({3, 4})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::mul(t, in[0], in[1]); }},
      {"relu", [](TestRng& r) { return std::vector{r.kink_free({3, 4})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::relu(t, in[0]); }},
      {"sigmoid", [](TestRng& r) { return std::vector{r.tensor({3, 4}, -4, 4)}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::sigmoid(t, in[0]); }},
      {"tanh", [](TestRng& r) { return std::vector{r.tensor({3, 4}, -3, 3)}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::tanh(t, in[0]); }},
      {"matmul", [](TestRng& r) { return std::vector{r.tensor({3, 5}), r.tensor({5, 2})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::matmul(t, in[0], in[1]); }},
      {"transpose", [](TestRng& r) { return std::vector{r.tensor({3, 5})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::transpose(t, in[0]); }},
      {"dense", [](TestRng& r) { return std::vector{r.tensor({3, 4}), r.tensor({4, 2}), r.tensor({2})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::dense(t, in[0], in[1], in[2]); }},
      {"conv1d_same", [](TestRng& r) { return std::vector{r.tensor({6, 3}), r.tensor({3, 3, 2}), r.tensor({2})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::conv1d(t, in[0], in[1], in[2], P::same); }},
      {"conv1d_valid", [](TestRng& r) { return std::vector{r.tensor({6, 3}), r.tensor({4, 3, 2}), r.tensor({2})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::conv1d(t, in[0], in[1], in[2], P::valid); }},
      {"conv1d_batched", [](TestRng& r) { return std::vector{r.tensor({2, 5, 3}), r.tensor({2, 3, 4}), r.tensor({4})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::conv1d(t, in[0], in[1], in[2], P::same); }},
      {"softmax", [](TestRng& r) { return std::vector{r.tensor({3, 4}, -3, 3)}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::softmax(t, in[0]); }},
      {"layer_norm", [](TestRng& r) { return std::vector{r.tensor({3, 5}), r.tensor({5}), r.tensor({5})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::layer_norm(t, in[0], in[1], in[2], 1e-6); }},
      {"reshape", [](TestRng& r) { return std::vector{r.tensor({3, 4})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::reshape(t, in[0], {6, 2}); }},
      {"concat", [](TestRng& r) { return std::vector{r.tensor({2, 3}), r.tensor({4, 3})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::concat(t, {in[0], in[1]}, 0); }},
      {"slice", [](TestRng& r) { return std::vector{r.tensor({4, 5})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::slice(t, in[0], 1, 1, 4); }},
      {"reverse", [](TestRng& r) { return std::vector{r.tensor({4, 3})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::reverse(t, in[0]); }},
      {"global_avg_pool", [](TestRng& r) { return std::vector{r.tensor({5, 3})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::global_avg_pool(t, in[0]); }},
      {"scale", [](TestRng& r) { return std::vector{r.tensor({3, 2})}; },
       [](Tape& t, const std::vector<Tensor>& in) { return ops::scale(t, in[0], -2.5); }},
      {"nll", [](TestRng& r) { return std::vector{r.tensor({1, 5}, -2, 2)}; },
       [](Tape& t, const std::vector<Tensor>& in) {
         return ops::negative_log_likelihood(t, ops::reshape(t, ops::softmax(t, in[0]), {5}), 3);
       }},
  };
}

}  // namespace

class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradient, AgreesWithCentralDifferencesOver100Trials) {
  const auto& pc = GetParam();
  TestRng rng(std::hash<std::string>{}(pc.name));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> in = pc.inputs(rng);
    TestRng proj(static_cast<std::uint64_t>(trial) + 1000);
    const Tensor r = [&] {
      Tape probe(Tape::Mode::inference);
      return proj.tensor(pc.build(probe, in).shape());
    }();
    ScalarFn f = [&](Tape& t) {
      Tensor y = pc.build(t, in);
      return y.size() == 1 ? y : ops::sum(t, ops::mul(t, y, r));
    };
    std::vector<std::pair<std::string, Tensor>> targets;
    for (std::size_t i = 0; i < in.size(); ++i) targets.emplace_back("in" + std::to_string(i), in[i]);
    for (const auto& rep : gradient_check_all(f, targets, 1e-5)) worst = std::max(worst, rep.max_rel_error);
  }
  EXPECT_LT(worst, 1e-4) << pc.name;
}

INSTANTIATE_TEST_SUITE_P(EveryPrimitive, PrimitiveGradient, ::testing::ValuesIn(primitive_cases()),
                         [](const auto& info) { return info.param.name; });

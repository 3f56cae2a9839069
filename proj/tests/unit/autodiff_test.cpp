// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "gemo/autodiff/grad_check.hpp"
#include "gemo/autodiff/ops.hpp"

namespace gemo::ad {
namespace {

using T64 = Tensor<double>;
using Fn = std::function<Var<double>(Graph<double>&)>;

T64 random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  T64 t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Parameter<double> make_param(const std::string& name, T64 value) {
  Parameter<double> p{name, std::move(value), {}};
  p.zero_grad();
  return p;
}

// Independent central-difference oracle: perturbs p in place, evaluates f
// without recording gradients.
std::vector<double> numeric_grad(Parameter<double>& p, const Fn& f, double h = 1e-5) {
  std::vector<double> out(p.value.size());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double x = p.value[i];
    p.value[i] = x + h;
    Graph<double> gp(GradMode::kDisabled);
    const double fp = f(gp).item();
    p.value[i] = x - h;
    Graph<double> gm(GradMode::kDisabled);
    const double fm = f(gm).item();
    p.value[i] = x;
    out[i] = (fp - fm) / (2 * h);
  }
  return out;
}

void expect_fd_agrees(std::vector<Parameter<double>*> params, const Fn& f) {
  for (auto* p : params) p->zero_grad();
  Graph<double> g;
  g.backward(f(g));
  for (auto* p : params) {
    const auto num = numeric_grad(*p, f);
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double err = std::abs(p->grad[i] - num[i]) / std::max(1.0, std::abs(num[i]));
      EXPECT_LT(err, 1e-4) << p->name << "[" << i << "] analytic " << p->grad[i] << " numeric "
                           << num[i];
    }
  }
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(T64({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  T64 t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_THROW((void)t.item(), ContractError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Graph<double> g;
  auto a = g.constant(T64::matrix({{1, 2}, {3, 4}}));
  auto i = g.constant(T64::matrix({{1, 0}, {0, 1}}));
  EXPECT_EQ(matmul(a, i).value(), T64::matrix({{1, 2}, {3, 4}}));
}

TEST(Matmul, RowTimesColumn) {
  Graph<double> g;
  auto out = matmul(g.constant(T64::row({1, 0})), g.constant(T64::matrix({{0}, {5}})));
  EXPECT_EQ(out.value(), T64::matrix({{0}}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Graph<double> g;
  auto a = g.constant(T64({2, 3}));
  auto b = g.constant(T64({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

TEST(Matmul, GradientOfSumMatchesOnesProducts) {
  auto a = make_param("a", random_tensor({3, 4}, 1));
  auto b = make_param("b", random_tensor({4, 2}, 2));
  Graph<double> g;
  g.backward(sum(matmul(g.parameter(a), g.parameter(b))));
  // d/da sum(ab) = 1·bᵀ, d/db = aᵀ·1
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(a.grad(i, k), b.value(k, 0) + b.value(k, 1), 1e-12);
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(b.grad(k, j), a.value(0, k) + a.value(1, k) + a.value(2, k), 1e-12);
    }
  }
  expect_fd_agrees({&a, &b}, [&](Graph<double>& gg) {
    return sum(matmul(gg.parameter(a), gg.parameter(b)));
  });
}

TEST(Softmax, UniformAndForcedCases) {
  Graph<double> g;
  auto s = softmax_rows(g.constant(T64::row({0, 0, 0})));
  for (double v : s.value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  auto one = softmax_rows(g.constant(T64::row({5.0})));
  EXPECT_DOUBLE_EQ(one.value()[0], 1.0);
  auto two = softmax_rows(g.constant(T64::row({0, std::log(2.0)})));
  EXPECT_NEAR(two.value()[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(two.value()[1], 2.0 / 3.0, 1e-15);
}

TEST(Softmax, MaskedEntriesAreExactlyZero) {
  Graph<double> g;
  auto x = g.variable(T64::matrix({{0.3, 2.0, -1.0}, {1.0, 0.0, 4.0}}));
  auto y = softmax_masked(x, RowMask{1, 0, 1});
  EXPECT_EQ(y.value()(0, 1), 0.0);
  EXPECT_EQ(y.value()(1, 1), 0.0);
  EXPECT_NEAR(y.value()(0, 0) + y.value()(0, 2), 1.0, 1e-15);
  // weight the outputs so the gradient is not trivially zero
  auto loss = sum(mul(y, g.constant(T64::matrix({{1, 2, 3}, {-1, 5, 0.5}}))));
  g.backward(loss);
  const auto* grad = g.grad(x);
  ASSERT_NE(grad, nullptr);
  EXPECT_EQ((*grad)(0, 1), 0.0);
  EXPECT_EQ((*grad)(1, 1), 0.0);
}

TEST(Softmax, FullyMaskedRowIsRejected) {
  Graph<double> g;
  auto x = g.constant(T64::row({1, 2}));
  EXPECT_THROW(softmax_masked(x, RowMask{0, 0}), InvalidMaskError);
  std::vector<std::uint8_t> full{1, 1, 0, 0};
  auto x2 = g.constant(T64::matrix({{1, 2}, {3, 4}}));
  EXPECT_THROW(softmax_masked(x2, std::span<const std::uint8_t>(full)), InvalidMaskError);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph<double> g;
    T64 x = random_tensor({3, 5}, seed, -40, 40);
    T64 shifted = x;
    Rng rng(seed + 100);
    for (std::size_t r = 0; r < 3; ++r) {
      const double c = rng.uniform(-100, 100);
      for (std::size_t j = 0; j < 5; ++j) shifted(r, j) += c;
    }
    auto a = softmax_rows(g.constant(x)).value();
    auto b = softmax_rows(g.constant(shifted)).value();
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        s += a(r, j);
        EXPECT_NEAR(a(r, j), b(r, j), 1e-6);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Elementwise, ScalarValues) {
  Graph<double> g;
  EXPECT_DOUBLE_EQ(sigmoid(g.constant(T64::scalar(0))).item(), 0.5);
  EXPECT_DOUBLE_EQ(relu(g.constant(T64::scalar(-3))).item(), 0.0);
  auto b = add_row(g.constant(T64({2, 2})), g.constant(T64::row({1, 1})));
  EXPECT_EQ(b.value(), T64::matrix({{1, 1}, {1, 1}}));
  EXPECT_THROW(log(g.constant(T64::row({1, 0}))), DomainError);
  EXPECT_THROW(log(g.constant(T64::row({-2}))), DomainError);
  EXPECT_THROW(add(g.constant(T64({2, 2})), g.constant(T64({1, 2}))), DimensionError);
}

TEST(Elementwise, SigmoidIsStableForLargeInputs) {
  Graph<double> g;
  auto s = sigmoid(g.constant(T64::row({-800, 800}))).value();
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Reduce, ExactValues) {
  Graph<double> g;
  auto x = g.constant(T64::matrix({{1, 3}, {3, 1}}));
  EXPECT_EQ(mean_rows(x).value(), T64::row({2, 2}));
  EXPECT_EQ(max_rows(x).value(), T64::row({3, 3}));
  EXPECT_EQ(sum(x).item(), 8.0);
  auto y = g.constant(T64::matrix({{1, 2}, {7, 8}, {9, 9}}));
  EXPECT_EQ(masked_mean_rows(y, RowMask{0, 1, 0}).value(), T64::row({7, 8}));
  EXPECT_THROW(masked_mean_rows(y, RowMask{0, 0, 0}), InvalidMaskError);
}

TEST(Reduce, MaskedRowsGetZeroGradient) {
  Graph<double> g;
  auto y = g.variable(random_tensor({3, 2}, 9));
  g.backward(sum(masked_mean_rows(y, RowMask{1, 0, 1})));
  const auto& grad = *g.grad(y);
  EXPECT_EQ(grad(1, 0), 0.0);
  EXPECT_EQ(grad(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(grad(0, 0), 0.5);
}

TEST(Cosine, KnownValues) {
  Graph<double> g;
  EXPECT_NEAR(cosine_similarity(g.constant(T64::row({2, 0})), g.constant(T64::row({2, 0}))).item(),
              1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(g.constant(T64::row({1, 0})), g.constant(T64::row({0, 1}))).item(),
              0.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(g.constant(T64::row({1, 0})), g.constant(T64::row({1, 1}))).item(),
              0.70710678, 1e-8);
  EXPECT_THROW(cosine_similarity(g.constant(T64::row({0, 0})), g.constant(T64::row({1, 1}))),
               DegenerateVectorError);
}

TEST(Backward, ScalarExamples) {
  {
    Graph<double> g;
    auto x = g.variable(T64::scalar(3));
    g.backward(mul(x, x));
    EXPECT_DOUBLE_EQ(g.grad(x)->item(), 6.0);
  }
  {
    Graph<double> g;
    auto x = g.variable(T64::scalar(0));
    g.backward(sigmoid(x));
    EXPECT_DOUBLE_EQ(g.grad(x)->item(), 0.25);
  }
}

TEST(Backward, NonScalarSeedIsAContractError) {
  Graph<double> g;
  auto x = g.variable(T64::row({1, 2}));
  EXPECT_THROW(g.backward(x), ContractError);
}

TEST(Backward, VisitsEachRecordedOperationOnce) {
  Graph<double> g;
  auto x = g.variable(T64::row({1, 2}));
  auto y = scale(x, 2.0);
  auto z = add(y, y);
  auto loss = sum(z);
  EXPECT_EQ(g.backward(loss), 3u);
  EXPECT_DOUBLE_EQ((*g.grad(x))[0], 4.0);
}

TEST(Backward, FanOutAccumulatesExactly) {
  // x used in two linear branches: the gradient is the sum of per-use gradients.
  auto x = make_param("x", random_tensor({2, 3}, 4));
  auto w1 = random_tensor({3, 1}, 5);
  auto w2 = random_tensor({3, 1}, 6);
  auto run = [&](bool first, bool second) {
    x.zero_grad();
    Graph<double> g;
    auto xv = g.parameter(x);
    Var<double> acc = g.constant(T64::scalar(0));
    if (first) acc = add(acc, sum(matmul(xv, g.constant(w1))));
    if (second) acc = add(acc, sum(matmul(xv, g.constant(w2))));
    g.backward(acc);
    return x.grad;
  };
  T64 both = run(true, true);
  T64 a = run(true, false);
  T64 b = run(false, true);
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_EQ(both[i], a[i] + b[i]);
}

TEST(Backward, ParameterGradientAccumulatesAcrossGraphs) {
  auto p = make_param("p", T64::row({1.0, -2.0}));
  for (int k = 0; k < 2; ++k) {
    Graph<double> g;
    g.backward(sum(g.parameter(p)));
  }
  EXPECT_EQ(p.grad, T64::row({2.0, 2.0}));
}

TEST(Dropout, InvertedScalingAndEvalIdentity) {
  Graph<double> g;
  T64 ones({1, 2000}, 1.0);
  Rng rng(3);
  auto x = g.variable(ones);
  auto y = dropout(x, 0.25, rng, true);
  std::size_t kept = 0;
  for (double v : y.value().values()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.75, 0.04);
  g.backward(sum(y));
  const auto& gr = *g.grad(x);
  for (std::size_t i = 0; i < gr.size(); ++i) EXPECT_EQ(gr[i], y.value()[i]);

  auto e = dropout(g.constant(ones), 0.5, rng, false);
  EXPECT_EQ(e.value(), ones);
  EXPECT_THROW(dropout(g.constant(ones), 1.0, rng, true), ContractError);
}

TEST(WeightedLogSum, ZeroWeightsIgnoreTheirEntries) {
  Graph<double> g;
  auto x = g.variable(T64::row({0.0, 0.5}));
  auto s = weighted_log_sum(x, T64::row({0.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(s.item(), 2.0 * std::log(0.5));
  g.backward(s);
  EXPECT_EQ((*g.grad(x))[0], 0.0);
  EXPECT_DOUBLE_EQ((*g.grad(x))[1], 4.0);
  EXPECT_THROW(weighted_log_sum(x, T64::row({1.0, 1.0}), 0.0), DomainError);
}

TEST(Standardize, TwoPointCase) {
  Graph<double> g;
  auto z = standardize(g.constant(T64({2, 1}, std::vector<double>{0.2, 0.8})), 1e-8);
  EXPECT_NEAR(z.value()[0], -1.0, 1e-7);
  EXPECT_NEAR(z.value()[1], 1.0, 1e-7);
  auto flat = standardize(g.constant(T64({3, 1}, 0.4)), 1e-8);
  for (double v : flat.value().values()) EXPECT_EQ(v, 0.0);
}

// Finite-difference agreement for every differentiable primitive.
class PrimitiveGradients : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradients, MatchCentralDifferences) {
  const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(GetParam());
  auto a = make_param("a", random_tensor({3, 4}, seed));
  auto b = make_param("b", random_tensor({3, 4}, seed + 1));
  auto row = make_param("row", random_tensor({1, 4}, seed + 2));
  auto gate = make_param("gate", random_tensor({3, 1}, seed + 3));
  auto pos = make_param("pos", random_tensor({3, 4}, seed + 4, 0.5, 2.0));
  auto w = random_tensor({3, 4}, seed + 5);  // fixed weighting so sums are not degenerate
  auto weighted = [&](Graph<double>& g, Var<double> v) {
    if (v.shape() == w.shape()) return sum(mul(v, g.constant(w)));
    T64 wv(v.shape());
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = std::sin(1.0 + i);
    return sum(mul(v, g.constant(wv)));
  };
  std::vector<std::pair<std::string, Fn>> cases = {
      {"matmul_t", [&](auto& g) { return weighted(g, matmul(g.parameter(a), transpose(g.parameter(b)))); }},
      {"add", [&](auto& g) { return weighted(g, add(g.parameter(a), g.parameter(b))); }},
      {"sub", [&](auto& g) { return weighted(g, sub(g.parameter(a), g.parameter(b))); }},
      {"mul", [&](auto& g) { return weighted(g, mul(g.parameter(a), g.parameter(b))); }},
      {"scale", [&](auto& g) { return weighted(g, scale(g.parameter(a), -1.7)); }},
      {"add_scalar", [&](auto& g) { return weighted(g, add_scalar(g.parameter(a), 0.3)); }},
      {"add_row", [&](auto& g) { return weighted(g, add_row(g.parameter(a), g.parameter(row))); }},
      {"scale_rows", [&](auto& g) { return weighted(g, scale_rows(g.parameter(a), g.parameter(gate))); }},
      {"sigmoid", [&](auto& g) { return weighted(g, sigmoid(g.parameter(a))); }},
      {"relu", [&](auto& g) { return weighted(g, relu(g.parameter(a))); }},
      {"exp", [&](auto& g) { return weighted(g, exp(g.parameter(a))); }},
      {"log", [&](auto& g) { return weighted(g, log(g.parameter(pos))); }},
      {"softmax", [&](auto& g) { return weighted(g, softmax_rows(scale(g.parameter(a), 3.0))); }},
      {"softmax_masked", [&](auto& g) { return weighted(g, softmax_masked(g.parameter(a), RowMask{1, 0, 1, 1})); }},
      {"log_softmax", [&](auto& g) { return weighted(g, log_softmax_rows(g.parameter(a))); }},
      {"mean_rows", [&](auto& g) { return weighted(g, mean_rows(g.parameter(a))); }},
      {"max_rows", [&](auto& g) { return weighted(g, max_rows(g.parameter(a))); }},
      {"masked_mean", [&](auto& g) { return weighted(g, masked_mean_rows(g.parameter(a), RowMask{1, 0, 1})); }},
      {"concat_rows", [&](auto& g) { return weighted(g, concat_rows<double>({g.parameter(a), g.parameter(row)})); }},
      {"concat_cols", [&](auto& g) { return weighted(g, concat_cols<double>({g.parameter(a), g.parameter(gate)})); }},
      {"slice_rows", [&](auto& g) { return weighted(g, slice_rows(g.parameter(a), 1, 2)); }},
      {"slice_cols", [&](auto& g) { return weighted(g, slice_cols(g.parameter(a), 1, 2)); }},
      {"layer_norm", [&](auto& g) {
         return weighted(g, layer_norm_rows(g.parameter(a), g.parameter(row), g.parameter(row)));
       }},
      {"normalize", [&](auto& g) { return weighted(g, normalize_rows(g.parameter(a))); }},
      {"cosine", [&](auto& g) { return cosine_similarity(g.parameter(row), slice_rows(g.parameter(a), 0, 1)); }},
      {"pairwise_cosine", [&](auto& g) { return weighted(g, pairwise_cosine(g.parameter(a), g.parameter(b))); }},
      {"weighted_log_sum", [&](auto& g) { return weighted_log_sum(g.parameter(pos), w, 1e-8); }},
      {"standardize", [&](auto& g) { return weighted(g, standardize(g.parameter(gate), 1e-8)); }},
  };
  std::vector<Parameter<double>*> all{&a, &b, &row, &gate, &pos};
  for (const auto& [name, fn] : cases) {
    SCOPED_TRACE(name);
    expect_fd_agrees(all, fn);
    auto report = check_gradients<double>(all, fn);
    EXPECT_TRUE(report.passed) << name << ": " << report.worst_name << " err " << report.max_rel_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, PrimitiveGradients, ::testing::Range(0, 3));

TEST(GradCheck, CorruptedGradientIsReported) {
  auto a = make_param("a", random_tensor({2, 2}, 77));
  // square with a backward rule that is off by a factor of 3
  Fn broken = [&](Graph<double>& g) {
    auto x = g.parameter(a);
    T64 v = x.value();
    for (auto& e : v.data()) e = e * e;
    auto y = g.record(v, {x}, [id = x.id(), src = x.value()](Graph<double>& gg, const T64& gy) {
      if (auto* gx = gg.grad_slot(id)) {
        for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += 6.0 * src[i] * gy[i];
      }
    });
    return sum(y);
  };
  auto report = check_gradients<double>({&a}, broken);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_name, "a");
  EXPECT_GT(report.max_rel_error, 1e-2);
}

}  // namespace
}  // namespace gemo::ad

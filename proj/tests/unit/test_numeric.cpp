#include <gtest/gtest.h>

#include <cmath>

#include "kgif/numeric.hpp"

using namespace kgif;

TEST(Matrix, RowMajorLayout) {
  Matrix m(2, 3);
  m(1, 2) = 5.0;
  EXPECT_EQ(m.flat()[5], 5.0);
  EXPECT_EQ(m.row(1).size(), 3u);
  EXPECT_EQ(Matrix::identity(3, 3)(2, 2), 1.0);
  EXPECT_EQ(Matrix::identity(3, 3)(0, 2), 0.0);
}

TEST(Xavier, UnitBoundForOneByFive) {
  const auto m = xavier_init(1, 5, 7);
  for (double v : m.flat()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Xavier, BoundFor64x64) {
  const auto m = xavier_init(64, 64, 1);
  const double bound = std::sqrt(6.0 / 128.0);
  EXPECT_NEAR(bound, 0.2165, 1e-4);
  double lo = 0, hi = 0;
  for (double v : m.flat()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -bound);
  EXPECT_LE(hi, bound);
  // The extremes should come close to the bound with 4096 draws.
  EXPECT_LT(lo, -0.9 * bound);
  EXPECT_GT(hi, 0.9 * bound);
}

TEST(Xavier, DeterministicPerSeed) {
  EXPECT_EQ(xavier_init(8, 3, 42), xavier_init(8, 3, 42));
  EXPECT_NE(xavier_init(8, 3, 42), xavier_init(8, 3, 43));
}

TEST(Xavier, ZeroDimensionThrows) {
  EXPECT_THROW(xavier_init(0, 3, 1), DimensionError);
  EXPECT_THROW(xavier_init(3, 0, 1), DimensionError);
}

TEST(Adam, ZeroGradientIsIdentity) {
  AdamState s;
  Vector p{1.0, -2.0, 3.5};
  const Vector before = p;
  for (int k = 0; k < 5; ++k) adam_step(s, p, Vector{0, 0, 0});
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState s;
  s.config.learning_rate = 0.1;
  Vector p{1.0};
  adam_step(s, p, Vector{1.0});
  // m_hat = 1, v_hat = 1, so the update is 0.1 / (1 + 1e-8).
  EXPECT_NEAR(p[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0], 0.9, 1e-7);
}

TEST(Adam, TwoStepsDifferFromOneDoubledStep) {
  // Scripted trace: with constant gradient g, both steps have m_hat = g and
  // v_hat = g², so each moves by ρ·g/(|g|+ε).
  const double g = 0.5, rho = 0.01, eps = 1e-8;
  AdamState two;
  two.config.learning_rate = rho;
  Vector p2{2.0};
  adam_step(two, p2, Vector{g});
  adam_step(two, p2, Vector{g});
  EXPECT_NEAR(p2[0], 2.0 - 2 * rho * g / (g + eps), 1e-14);

  AdamState one;
  one.config.learning_rate = 2 * rho;
  Vector p1{2.0};
  adam_step(one, p1, Vector{g});
  EXPECT_NEAR(p1[0], 2.0 - 2 * rho * g / (g + eps), 1e-14);
  // Equal in value, but the accumulated state differs.
  EXPECT_EQ(two.step, 2u);
  EXPECT_EQ(one.step, 1u);
  EXPECT_NE(two.second_moment[0], one.second_moment[0]);

  // With a changing gradient the trajectories separate.
  AdamState a, b;
  a.config.learning_rate = rho;
  b.config.learning_rate = 2 * rho;
  Vector pa{2.0}, pb{2.0};
  adam_step(a, pa, Vector{0.5});
  adam_step(a, pa, Vector{-0.25});
  adam_step(b, pb, Vector{0.5});
  EXPECT_NE(pa[0], pb[0]);
}

TEST(Adam, ShapeMismatchAndNaNAreReported) {
  AdamState s;
  Vector p{1.0, 2.0};
  EXPECT_THROW(adam_step(s, p, Vector{1.0}), DimensionError);
  try {
    adam_step(s, p, Vector{1.0, std::nan("")}, "fusion.w1");
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("fusion.w1"), std::string::npos);
    EXPECT_EQ(e.kind(), "numeric");
  }
}

TEST(Optimizer, KeepsStatePerTensorName) {
  Optimizer opt(AdamConfig{0.1});
  Matrix a(1, 1), b(1, 1), g(1, 1);
  g(0, 0) = 1.0;
  opt.step("a", a, g);
  opt.step("a", a, g);
  opt.step("b", b, g);
  EXPECT_EQ(opt.states().at("a").step, 2u);
  EXPECT_EQ(opt.states().at("b").step, 1u);
  EXPECT_THROW(opt.step("a", a, Matrix(2, 1)), DimensionError);
}

TEST(FiniteDiff, SumOfSquares) {
  auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const auto g = finite_diff_grad(f, Vector{3.0}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantLossGivesZero) {
  auto f = [](std::span<const double>) { return 4.2; };
  const auto g = finite_diff_grad(f, Vector{1.0, 2.0, 3.0}, 1e-5);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDiff, NonFiniteLossThrows) {
  auto f = [](std::span<const double> x) { return std::log(x[0]); };
  EXPECT_THROW(finite_diff_grad(f, Vector{0.0}, 1e-5), NumericError);
  EXPECT_THROW(finite_diff_grad(f, Vector{1.0}, 0.0), DimensionError);
}

TEST(Activations, Values) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_DOUBLE_EQ(leaky_relu(-1.0, 0.01), -0.01);
  EXPECT_DOUBLE_EQ(leaky_relu(-1.0), -0.01);
  EXPECT_EQ(relu(-3.0), 0.0);
  EXPECT_EQ(relu(2.0), 2.0);
  EXPECT_EQ(std::tanh(1e6), 1.0);
  const auto t = kgif::tanh(Vector{1e300, -1e300});
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], -1.0);
}

TEST(Activations, StableSoftplusAndSigmoid) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_NEAR(neg_log_sigmoid(-1000.0), 1000.0, 1e-9);
  EXPECT_NEAR(neg_log_sigmoid(0.0), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(softplus(800.0)));
}

TEST(Kernels, VecMatAndBackward) {
  Matrix w(2, 3);
  for (std::size_t k = 0; k < 6; ++k) w.flat()[k] = static_cast<double>(k + 1);
  const Vector x{1.0, -1.0};
  const auto y = vec_mat(x, w);
  EXPECT_EQ(y, (Vector{-3.0, -3.0, -3.0}));
  Vector dx(2, 0.0);
  vec_mat_backward_input(Vector{1.0, 0.0, 0.0}, w, dx);
  EXPECT_EQ(dx, (Vector{1.0, 4.0}));
  Matrix dw(2, 3);
  vec_mat_backward_weight(x, Vector{1.0, 2.0, 3.0}, dw);
  EXPECT_EQ(dw(1, 2), -3.0);
  EXPECT_THROW(vec_mat(Vector{1.0}, w), DimensionError);
}

TEST(Random, DeterministicAndInRange) {
  Random a(5), b(5);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a(), b());
  Random r(9);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_LT(r.index(7), 7u);
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_THROW(r.index(0), DimensionError);
}

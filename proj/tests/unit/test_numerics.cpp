#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ccbf/errors.hpp"
#include "ccbf/numerics.hpp"

using namespace ccbf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Rk4, ExponentialDecay) {
  auto f = [](double, const Vector& y) { return Vector(-y); };
  const Vector y = integrate_rk4(f, vec({1.0}), 0.0, 1.0, 0.01);
  EXPECT_NEAR(y[0], std::exp(-1.0), 1e-6);
}

TEST(Rk4, ConstantFieldKeepsState) {
  auto f = [](double, const Vector& y) { return Vector::Zero(y.size()).eval(); };
  const Vector y = integrate_rk4(f, vec({3.0, -2.0}), 0.0, 7.3, 0.1);
  EXPECT_EQ(y, vec({3.0, -2.0}));
}

TEST(Rk4, QuadratureOfTime) {
  auto f = [](double t, const Vector&) { return Vector::Constant(1, t).eval(); };
  EXPECT_NEAR(integrate_rk4(f, vec({0.0}), 0.0, 2.0, 0.01)[0], 2.0, 1e-9);
}

TEST(Rk4, FourthOrderConvergence) {
  const double lambda = -1.7;
  auto f = [lambda](double, const Vector& y) { return Vector(lambda * y); };
  const double exact = std::exp(lambda * 2.0);
  const double e1 = std::abs(integrate_rk4(f, vec({1.0}), 0.0, 2.0, 0.1)[0] - exact);
  const double e2 = std::abs(integrate_rk4(f, vec({1.0}), 0.0, 2.0, 0.05)[0] - exact);
  EXPECT_GE(e1 / e2, 12.0);
}

TEST(Rk4, LastStepLandsOnEndpoint) {
  auto f = [](double, const Vector&) { return Vector::Ones(1).eval(); };
  EXPECT_NEAR(integrate_rk4(f, vec({0.0}), 0.0, 1.05, 0.1)[0], 1.05, 1e-12);
}

TEST(Rk4, NonFiniteStageThrows) {
  auto f = [](double, const Vector& y) {
    return Vector::Constant(y.size(), std::numeric_limits<double>::quiet_NaN()).eval();
  };
  EXPECT_THROW(rk4_step(f, 0.0, vec({1.0}), 0.1), IntegrationDiverged);
}

TEST(Rk4Interior, HalvesStepsToStayInside) {
  // Constant drift towards the wall at 0.
  auto f = [](double, const Vector& y) { return Vector::Constant(y.size(), -1.0).eval(); };
  auto inside = [](double, const Vector& y) { return y[0] > 0.0; };
  const Vector y = rk4_step_interior(f, 0.0, vec({0.15}), 0.1, inside);
  EXPECT_NEAR(y[0], 0.05, 1e-12);
  EXPECT_THROW(rk4_step_interior(f, 0.0, vec({0.05}), 0.2, inside, 3), LeftFeasibleRegion);
}

TEST(FiniteDiff, GradientOfQuadratic) {
  auto f = [](const Vector& y) { return 0.5 * y.squaredNorm(); };
  const Vector g = finite_diff_gradient(f, vec({1.0, 2.0}), 1e-5);
  EXPECT_NEAR(g[0], 1.0, 1e-8);
  EXPECT_NEAR(g[1], 2.0, 1e-8);
}

TEST(FiniteDiff, GradientOfConstantIsZero) {
  auto f = [](const Vector&) { return 3.0; };
  EXPECT_EQ(finite_diff_gradient(f, vec({0.3, -8.0, 1e3}), 1e-5), Vector::Zero(3));
}

TEST(FiniteDiff, GradientOfProduct) {
  auto f = [](const Vector& y) { return y[0] * y[1]; };
  const Vector g = finite_diff_gradient(f, vec({3.0, 4.0}), 1e-5);
  EXPECT_NEAR(g[0], 4.0, 1e-8);
  EXPECT_NEAR(g[1], 3.0, 1e-8);
}

TEST(FiniteDiff, GradientOfRandomPolynomials) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
    auto f = [=](const Vector& y) {
      return a * std::pow(y[0], 3) + b * y[0] * y[1] * y[1] + c * y[1] + d * y[0] * y[1];
    };
    const Vector y = vec({coef(rng), coef(rng)});
    const Vector g = finite_diff_gradient(f, y, 1e-5);
    EXPECT_NEAR(g[0], 3 * a * y[0] * y[0] + b * y[1] * y[1] + d * y[1], 1e-6);
    EXPECT_NEAR(g[1], 2 * b * y[0] * y[1] + c + d * y[0], 1e-6);
  }
}

TEST(FiniteDiff, NonFiniteStencilNamesComponent) {
  auto f = [](const Vector& y) { return y[1] > 0.0 ? std::log(-y[1]) : 0.0; };
  try {
    finite_diff_gradient(f, vec({0.0, 0.0}), 1e-5);
    FAIL() << "expected DifferentiationError";
  } catch (const DifferentiationError& e) {
    EXPECT_EQ(e.component(), 1u);
  }
}

TEST(FiniteDiff, HessianExamples) {
  auto quad = [](const Vector& y) { return 0.5 * y.squaredNorm(); };
  EXPECT_TRUE(finite_diff_hessian(quad, vec({0.4, -1.0}), 1e-4).isApprox(Matrix::Identity(2, 2), 1e-6));

  auto prod = [](const Vector& y) { return y[0] * y[1]; };
  const Matrix h = finite_diff_hessian(prod, vec({0.5, 2.0}), 1e-4);
  EXPECT_NEAR(h(0, 0), 0.0, 1e-6);
  EXPECT_NEAR(h(1, 1), 0.0, 1e-6);
  EXPECT_NEAR(h(0, 1), 1.0, 1e-6);
  EXPECT_EQ(h(0, 1), h(1, 0));

  auto ex = [](const Vector& y) { return std::exp(y[0]); };
  EXPECT_NEAR(finite_diff_hessian(ex, vec({0.0}), 1e-4)(0, 0), 1.0, 1e-6);
}

TEST(FiniteDiff, JacobianColumns) {
  auto f = [](const Vector& y) { return vec({y[0] * y[1], std::sin(y[0])}); };
  const Matrix j = finite_diff_jacobian(f, vec({0.3, 2.0}), 1e-5);
  EXPECT_NEAR(j(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(j(0, 1), 0.3, 1e-8);
  EXPECT_NEAR(j(1, 0), std::cos(0.3), 1e-8);
  EXPECT_NEAR(j(1, 1), 0.0, 1e-12);
}

TEST(MinEigenvalue, Examples) {
  Matrix a(2, 2);
  a << 2, 0, 0, 5;
  EXPECT_NEAR(min_eigenvalue_symmetric(a), 2.0, 1e-12);
  a << 0, 1, 1, 0;
  EXPECT_NEAR(min_eigenvalue_symmetric(a), -1.0, 1e-12);
  a << 2, 1, 1, 2;
  EXPECT_NEAR(min_eigenvalue_symmetric(a), 1.0, 1e-12);
}

TEST(MinEigenvalue, RejectsAsymmetric) {
  Matrix a(2, 2);
  a << 1, 0.5, 0.4, 1;
  EXPECT_THROW(min_eigenvalue_symmetric(a), ContractViolation);
}

TEST(SolveLinear, Examples) {
  EXPECT_EQ(solve_linear(Matrix::Identity(2, 2), vec({4.0, 7.0})), vec({4.0, 7.0}));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  const Vector x = solve_linear(d, vec({2.0, 8.0}));
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 2.0, 1e-14);
  EXPECT_THROW(solve_linear(Matrix::Ones(2, 2), vec({1.0, 2.0})), SingularSystem);
}

TEST(SolveLinear, ResidualBound) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(5, 5);
    Vector b(5);
    for (Eigen::Index i = 0; i < 25; ++i) a.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < 5; ++i) b[i] = nd(rng);
    a += 3.0 * Matrix::Identity(5, 5);
    const Vector x = solve_linear(a, b);
    EXPECT_LE((a * x - b).norm(), 1e-8 * (1.0 + b.norm()));
  }
}

TEST(BoxQp, SpecExamples) {
  const Vector lo = vec({-1.0, -1.0});
  const Vector hi = vec({1.0, 1.0});
  auto r = solve_box_qp(vec({0.0, 0.0}), lo, hi, {{1.0, vec({1.0, 0.0})}});
  EXPECT_NEAR(r.u.norm(), 0.0, 1e-14);
  EXPECT_TRUE(r.active_rows.empty());

  r = solve_box_qp(vec({2.0, 0.0}), lo, hi, {});
  EXPECT_NEAR(r.u[0], 1.0, 1e-14);
  EXPECT_NEAR(r.u[1], 0.0, 1e-14);

  // Projection onto u1 + u2 >= 1: (0.5, 0.5).
  r = solve_box_qp(vec({0.0, 0.0}), lo, hi, {{-1.0, vec({1.0, 1.0})}});
  EXPECT_NEAR(r.u[0], 0.5, 1e-12);
  EXPECT_NEAR(r.u[1], 0.5, 1e-12);
  ASSERT_EQ(r.active_rows.size(), 1u);
}

TEST(BoxQp, InfeasibleCarriesConflict) {
  const Vector lo = vec({-1.0, -1.0});
  const Vector hi = vec({1.0, 1.0});
  // u1 >= 0.5 and u1 <= 0.2 together; the third row is harmless.
  std::vector<AffineRow> rows{{-0.5, vec({1.0, 0.0})}, {0.2, vec({-1.0, 0.0})}, {5.0, vec({0.0, 1.0})}};
  try {
    solve_box_qp(vec({0.0, 0.0}), lo, hi, rows);
    FAIL() << "expected Infeasible";
  } catch (const Infeasible& e) {
    EXPECT_EQ(e.conflicting_rows(), (std::vector<std::size_t>{0, 1}));
  }
  // A single row beyond the box.
  EXPECT_THROW(solve_box_qp(vec({0.0, 0.0}), lo, hi, {{-3.0, vec({1.0, 1.0})}}), Infeasible);
}

TEST(BoxQp, MaxViolation) {
  const Vector lo = vec({-1.0});
  const Vector hi = vec({1.0});
  EXPECT_EQ(max_violation(vec({0.0}), lo, hi, {{1.0, vec({1.0})}}), 0.0);
  EXPECT_NEAR(max_violation(vec({1.5}), lo, hi, {}), 0.5, 1e-15);
  EXPECT_NEAR(max_violation(vec({0.0}), lo, hi, {{-0.25, vec({1.0})}}), 0.25, 1e-15);
}

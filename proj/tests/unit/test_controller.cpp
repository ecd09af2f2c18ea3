#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ccbf/controller.hpp"
#include "ccbf/scenarios.hpp"

using namespace ccbf;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

// x' = u on the line.
ControlAffineSystem integrator(double u_max) {
  ControlAffineSystem sys;
  sys.n = 1;
  sys.m = 1;
  sys.f = [](const Vector&) { return Vector::Zero(1).eval(); };
  sys.g = [](const Vector&) { return Matrix::Identity(1, 1).eval(); };
  sys.u_max = Vector::Constant(1, u_max);
  return sys;
}

ConstraintSpec h_equals_x() {
  return {"h", [](double, const Vector& x) { return x[0]; }, [](double, const Vector&) { return 0.0; },
          [](double, const Vector&) { return Vector::Ones(1).eval(); }, nullptr, 1};
}

CcbfDerivatives row_data(double alpha_arg, double drift, double gain) {
  // One constraint, m = 1; H and the Lie terms are chosen so the row is
  // alpha(H) + drift + gain * u with alpha = identity.
  CcbfDerivatives d;
  d.H = alpha_arg;
  d.dH_dt = drift;
  d.dH_dx = Vector::Zero(1);
  d.dH_dw = Vector::Zero(1);
  d.h = Vector::Ones(1);
  d.p_h = Vector::Constant(1, -1.0);
  d.p_w = Vector::Zero(1);
  d.p_hw = Vector::Zero(1);
  d.p_ww = Vector::Zero(1);
  d.L_t = Vector::Zero(1);
  d.L_f = Vector::Zero(1);
  d.L_g = Matrix::Constant(1, 1, gain);
  return d;
}

}  // namespace

TEST(CcbfQp, NominalFeasibleIsKept) {
  const auto d = row_data(0.5, 0.0, 1.0);
  const auto dec = ccbf_qp(d, Vector::Zero(1), Matrix::Zero(1, 1), integrator(1.0),
                           ClassK::linear(1.0), scalar(0.2));
  EXPECT_TRUE(dec.feasible);
  EXPECT_EQ(dec.u[0], 0.2);
}

TEST(CcbfQp, InactiveRowClipsToBox) {
  const auto d = row_data(0.5, 0.0, 0.0);
  const auto dec = ccbf_qp(d, Vector::Zero(1), Matrix::Zero(1, 1), integrator(1.0),
                           ClassK::linear(1.0), scalar(3.0));
  EXPECT_EQ(dec.u[0], 1.0);
}

TEST(CcbfQp, SingleRowProjection) {
  // a = -0.5, b = 1, u_nominal = 0 -> u = 0.5
  const auto d = row_data(0.0, -0.5, 1.0);
  const auto dec = ccbf_qp(d, Vector::Zero(1), Matrix::Zero(1, 1), integrator(1.0),
                           ClassK::linear(1.0), scalar(0.0));
  EXPECT_TRUE(dec.feasible);
  EXPECT_NEAR(dec.u[0], 0.5, 1e-12);
  double best = 1e9, best_u = 0.0;
  for (int i = -1000; i <= 1000; ++i) {
    const double u = 0.001 * i;
    if (-0.5 + u >= 0.0 && u * u < best) {
      best = u * u;
      best_u = u;
    }
  }
  EXPECT_NEAR(dec.u[0], best_u, 1e-3);
}

TEST(CcbfQp, RowUsesTrueAdaptationTerms) {
  auto d = row_data(0.2, 0.1, 0.5);
  d.dH_dw = Vector::Constant(1, 2.0);
  const Vector mu = scalar(-0.3);
  const Matrix nu = Matrix::Constant(1, 1, 0.25);
  const AffineRow row = ccbf_condition_row(d, mu, nu, ClassK::linear(1.0));
  EXPECT_NEAR(row.offset, 0.2 + 0.1 + 2.0 * -0.3, 1e-15);
  EXPECT_NEAR(row.gain[0], 0.5 + 0.25 * 2.0, 1e-15);
}

TEST(SingleCbfQp, IntegratorExample) {
  const auto dec = single_cbf_qp(h_equals_x(), integrator(2.0), ClassK::linear(1.0), 0.0,
                                 scalar(1.0), scalar(-5.0));
  EXPECT_TRUE(dec.feasible);
  EXPECT_NEAR(dec.u[0], -1.0, 1e-12);
}

TEST(SingleCbfQp, FarFromBoundaryKeepsNominal) {
  const auto dec = single_cbf_qp(h_equals_x(), integrator(2.0), ClassK::linear(1.0), 0.0,
                                 scalar(50.0), scalar(0.0));
  EXPECT_EQ(dec.u[0], 0.0);
}

TEST(SingleCbfQp, NoAuthorityAndNegativeDriftIsInfeasible) {
  auto sys = integrator(1.0);
  sys.f = [](const Vector&) { return Vector::Constant(1, -1.0).eval(); };
  sys.g = [](const Vector&) { return Matrix::Zero(1, 1).eval(); };
  const auto dec = single_cbf_qp(h_equals_x(), sys, ClassK::linear(1.0), 0.0, scalar(0.1),
                                 scalar(0.0));
  EXPECT_FALSE(dec.feasible);
  EXPECT_EQ(dec.conflict, std::vector<std::string>{"h"});
}

TEST(SingleCbfQp, ForwardInvarianceOnRandomRuns) {
  ConstraintSpec h{"h", [](double, const Vector& x) { return 1.0 - x[0] * x[0]; },
                   [](double, const Vector&) { return 0.0; },
                   [](double, const Vector& x) { return Vector::Constant(1, -2.0 * x[0]).eval(); },
                   nullptr, 1};
  const auto sys = integrator(2.0);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> x0d(-0.99, 0.99), amp(1.0, 5.0), phase(0.0, 6.28);
  for (int run = 0; run < 5; ++run) {
    Vector x = scalar(x0d(rng));
    const double a = amp(rng), ph = phase(rng);
    for (int k = 0; k < 1000; ++k) {
      const double t = 0.01 * k;
      const auto dec = single_cbf_qp(h, sys, ClassK::linear(1.0), t, x,
                                     scalar(a * std::sin(2.0 * t + ph)));
      ASSERT_TRUE(dec.feasible);
      x = integrate_rk4([&](double, const Vector&) { return dec.u; }, x, t, t + 0.01, 0.01);
      ASSERT_GE(h.h(t, x), -1e-6);
    }
  }
}

TEST(CcbfQp, ReducesToSingleCbfWithoutAdaptation) {
  // c = 1, exponential kernel: H_dot + alpha(H) is a positive multiple of
  // h_dot + alpha'(h) for a suitably matched alpha, so the active sets agree
  // whenever the rows agree in sign at the nominal input.
  const auto sys = integrator(1.0);
  const auto spec = h_equals_x();
  const std::vector<ConstraintSpec> one{spec};
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> xd(0.05, 2.0), ud(-3.0, 3.0), wd(0.5, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = scalar(xd(rng));
    const double w = wd(rng);
    const Vector u_nom = scalar(ud(rng));
    const auto d = ccbf_derivatives(PhiKernel::exponential(), one, sys, 0.0, scalar(w), x);
    // H' = w e^{-wh} h'; choose alpha(H) so the C-CBF row equals
    // w e^{-wh} (h' + h) and compare with alpha(h) = h.
    const double scale = w * std::exp(-w * x[0]);
    const ClassK matched{"matched", [=](double) { return scale * x[0]; }, [](double) { return 0.0; }};
    const auto a = ccbf_qp(d, Vector::Zero(1), Matrix::Zero(1, 1), sys, matched, u_nom);
    const auto b = single_cbf_qp(spec, sys, ClassK::linear(1.0), 0.0, x, u_nom);
    EXPECT_EQ(a.active_set.size(), b.active_set.size());
    EXPECT_NEAR(a.u[0], b.u[0], 1e-12);
  }
}

TEST(EcbfQp, DoubleIntegratorExample) {
  ControlAffineSystem sys;
  sys.n = 2;
  sys.m = 1;
  sys.f = [](const Vector& x) { return Eigen::Vector2d(x[1], 0.0).eval(); };
  sys.g = [](const Vector&) { return Eigen::Vector2d(0.0, 1.0).eval(); };
  sys.u_max = Vector::Ones(1);
  ConstraintSpec h{"wall", [](double, const Vector& x) { return 1.0 - x[0]; },
                   [](double, const Vector&) { return 0.0; },
                   [](double, const Vector&) { return Eigen::Vector2d(-1.0, 0.0).eval(); },
                   [](double, const Vector&) { return Matrix::Zero(2, 2).eval(); }, 2};
  const std::vector<ConstraintSpec> cs{h};
  const std::vector<EcbfGains> gains{{2.0, 1.0}};
  // row: -u + 0 + 1 >= 0
  auto dec = ecbf_qp(cs, gains, sys, ClassK::linear(1.0), 0.0, Vector::Zero(2), scalar(0.0));
  EXPECT_TRUE(dec.feasible);
  EXPECT_EQ(dec.u[0], 0.0);
  EXPECT_NEAR(dec.margin, 1.0, 1e-8);

  // Approaching: row -u - 2v + (1 - x) >= 0 forces braking.
  Vector x(2);
  x << 0.5, 0.5;
  dec = ecbf_qp(cs, gains, sys, ClassK::linear(1.0), 0.0, x, scalar(0.0));
  EXPECT_TRUE(dec.feasible);
  EXPECT_NEAR(dec.u[0], -0.5, 1e-8);

  // Even full braking cannot satisfy the row.
  x << 0.9, 3.0;
  dec = ecbf_qp(cs, gains, sys, ClassK::linear(1.0), 0.0, x, scalar(0.0));
  EXPECT_FALSE(dec.feasible);
  EXPECT_EQ(dec.conflict, std::vector<std::string>{"wall"});
}

TEST(EcbfQp, DeepInsideKeepsClippedNominal) {
  const Scenario sc = build_scenario_bicycle();
  Vector x(5);
  x << 2.9, 0.0, 0.0, 0.0, 0.0;  // at rest, away from every obstacle
  const std::vector<EcbfGains> gains(sc.constraints.size(), EcbfGains{1.0, 1.0});
  Vector u_nom(2);
  u_nom << 10.0, -0.5;
  const auto dec = ecbf_qp(sc.constraints, gains, sc.system, sc.alpha, 0.0, x, u_nom);
  ASSERT_TRUE(dec.feasible);
  EXPECT_EQ(dec.u[0], sc.system.u_max[0]);
  EXPECT_EQ(dec.u[1], -0.5);
}

TEST(OmegaFlow, RestsAtStaticMinimizer) {
  // Large s: the minimizer of Omega is essentially the nominal input.
  RowSample from{0.0, {1.0, Vector::Ones(1)}, scalar(0.3)};
  RowSample to = from;
  to.t = 0.01;
  OmegaFlowOptions opts;
  opts.B = 100.0 * Matrix::Identity(1, 1);
  opts.s = 1e9;
  const auto dec = omega_flow_control(scalar(0.3), from, to, Vector::Ones(1), opts);
  EXPECT_NEAR(dec.u[0], 0.3, 1e-6);
}

TEST(OmegaFlow, TracksMovingNominal) {
  OmegaFlowOptions opts;
  opts.B = 100.0 * Matrix::Identity(1, 1);
  opts.s = 1e6;
  Vector u = scalar(0.0);
  for (int k = 0; k < 100; ++k) {
    const double t0 = 0.01 * k, t1 = t0 + 0.01;
    RowSample from{t0, {5.0, Vector::Ones(1)}, scalar(0.5 * std::sin(t0))};
    RowSample to{t1, {5.0, Vector::Ones(1)}, scalar(0.5 * std::sin(t1))};
    u = omega_flow_control(u, from, to, Vector::Ones(1), opts).u;
    ASSERT_LT(std::abs(u[0]), 1.0);
  }
  EXPECT_NEAR(u[0], 0.5 * std::sin(1.0), 1e-3);
}

TEST(OmegaFlow, RejectsExteriorStart) {
  RowSample from{0.0, {-0.5, Vector::Ones(1)}, scalar(0.0)};
  RowSample to = from;
  to.t = 0.01;
  OmegaFlowOptions opts;
  opts.B = Matrix::Identity(1, 1);
  EXPECT_THROW(omega_flow_control(scalar(0.2), from, to, Vector::Ones(1), opts), LeftFeasibleRegion);
}

TEST(InteriorStart, IsStrictlyInside) {
  AffineRow row{-0.5, Vector::Ones(1)};
  const auto u = interior_start(scalar(0.5), row, Vector::Ones(1));
  ASSERT_TRUE(u.has_value());
  EXPECT_GT(row.offset + row.gain.dot(*u), 0.0);
  EXPECT_LT((*u)[0], 1.0);
  EXPECT_FALSE(interior_start(scalar(1.0), {-2.0, Vector::Ones(1)}, Vector::Ones(1)).has_value());
}

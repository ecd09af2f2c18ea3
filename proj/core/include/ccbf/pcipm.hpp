#pragma once

#include <functional>
#include <vector>

#include "ccbf/errors.hpp"
#include "ccbf/numerics.hpp"

namespace ccbf {

using TimeScalarField = std::function<double(double, const Vector&)>;
using TimeVectorField = std::function<Vector(double, const Vector&)>;
// Analytic pieces of Psi take the barrier parameter so that escalating s
// reaches them.
using BarrierVectorField = std::function<Vector(double, const Vector&, double s)>;
using BarrierMatrixField = std::function<Matrix(double, const Vector&, double s)>;

// Time-varying problem  min_y J(t,y)  s.t.  c_j(t,y) <= 0, handled through the
// logarithmic barrier
//
//   Psi(t,y) = J(t,y) - (1/s) sum_j log(-c_j(t,y)).
//
// `gradient`, `hessian` and `time_gradient` optionally supply grad_y Psi,
// grad_yy Psi and d/dt grad_y Psi; missing pieces fall back to central
// differences.
struct BarrierProblem {
  TimeScalarField objective;
  std::vector<TimeScalarField> constraints;
  double s = 1e3;
  Matrix gain;                     // P, symmetric positive definite
  double convexity_floor = 1e-3;   // a
  BarrierVectorField gradient;       // optional
  BarrierMatrixField hessian;        // optional
  BarrierVectorField time_gradient;  // optional

  std::size_t dimension() const { return static_cast<std::size_t>(gain.rows()); }
};

// Step used for central differences in t.
inline constexpr double kTimeStep = 1e-5;
// Base step for central differences of analytic gradients.
inline constexpr double kGradientEps = 1e-5;
// Base step for second differences of function values.
inline constexpr double kValueEps = 1e-4;
// Maximum number of s doublings before a convexity failure is final.
inline constexpr int kMaxBarrierDoublings = 20;

bool strictly_interior(const BarrierProblem& prob, double t, const Vector& y);

double assemble_psi(const BarrierProblem& prob, double t, const Vector& y);
Vector psi_gradient(const BarrierProblem& prob, double t, const Vector& y);
Matrix psi_hessian(const BarrierProblem& prob, double t, const Vector& y);
Vector psi_time_gradient(const BarrierProblem& prob, double t, const Vector& y);

// y' = -(grad_yy Psi)^-1 [P grad_y Psi + grad_yt Psi]. Throws ConvexityError
// when the Hessian's smallest eigenvalue is below the convexity floor.
Vector flow_field(const BarrierProblem& prob, double t, const Vector& y);

// Correction term only: y' = -(grad_yy Psi)^-1 P grad_y Psi.
Vector correction_field(const BarrierProblem& prob, double t, const Vector& y);

// Integrates the correction flow with time frozen at t.
Vector correct_to_interior(const BarrierProblem& prob, double t,
                           const Vector& y0, double horizon, double dt = 0.01);

// Integrates the full predictor-corrector flow from t0 to t1 with interior
// step rejection. Returns the state at every step boundary (t0 included).
std::vector<std::pair<double, Vector>> track(const BarrierProblem& prob,
                                             const Vector& y0, double t0,
                                             double t1, double dt);

// (1/a) |grad_y Psi(0, y0)|
double tracking_bound_constant(const BarrierProblem& prob, const Vector& y0);

// Runs `fn(prob)` and, on ConvexityError, doubles prob.s and retries up to
// kMaxBarrierDoublings times. `prob.s` holds the value that succeeded.
template <typename Fn>
auto with_barrier_escalation(BarrierProblem& prob, Fn&& fn) -> decltype(fn(prob)) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn(prob);
    } catch (const ConvexityError&) {
      if (attempt >= kMaxBarrierDoublings) throw;
      prob.s *= 2.0;
    }
  }
}

}  // namespace ccbf

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccbf/adaptation.hpp"
#include "ccbf/model.hpp"
#include "ccbf/numerics.hpp"

namespace ccbf {

struct ControlDecision {
  Vector u;
  bool feasible = true;
  std::vector<std::string> active_set;
  // Value of the (first) safety row a + b.u at the returned input.
  double margin = 0.0;
  // Irreducible conflicting rows when infeasible.
  std::vector<std::string> conflict;
};

// Row of the C-CBF condition H' + alpha(H) = a + b.u >= 0 with the true
// (unfiltered) adaptation terms.
AffineRow ccbf_condition_row(const CcbfDerivatives& deriv, const Vector& mu,
                             const Matrix& nu, const ClassK& alpha);

// min 0.5|u - u_nominal|^2  s.t.  |u| <= u_max,  a + b.u >= 0.
ControlDecision ccbf_qp(const CcbfDerivatives& deriv, const Vector& mu, const Matrix& nu,
                        const ControlAffineSystem& system, const ClassK& alpha,
                        const Vector& u_nominal);

// Classical CBF-QP for a single constraint:
//   dh/dt + grad h . f + grad h . g u + alpha(h) >= 0.
ControlDecision single_cbf_qp(const ConstraintSpec& constraint,
                              const ControlAffineSystem& system, const ClassK& alpha,
                              double t, const Vector& x, const Vector& u_nominal);

// Exponential CBF gains for one relative-degree-2 constraint:
//   h'' + k1 h' + k2 h >= 0.
struct EcbfGains {
  double k1 = 1.0;
  double k2 = 1.0;
};

// Exponential CBF-QP. Relative-degree-2 constraints need `hess_xx`;
// relative-degree-1 constraints use the first-order row with `alpha`.
ControlDecision ecbf_qp(std::span<const ConstraintSpec> constraints,
                        std::span<const EcbfGains> gains, const ControlAffineSystem& system,
                        const ClassK& alpha, double t, const Vector& x,
                        const Vector& u_nominal);

// Snapshot of the C-CBF row and nominal input at one instant.
struct RowSample {
  double t = 0.0;
  AffineRow row;
  Vector u_nominal;
};

struct OmegaFlowOptions {
  Matrix B;              // m x m gain, positive definite
  double s = 1e3;        // barrier parameter
  double convexity_floor = 1e-3;
  int substeps = 10;
};

// Interior-point control flow over U_H. Omega(t,u) = 0.5|u - u_nom(t)|^2 -
// (1/s) sum_k log(-d_k) with the box rows and the C-CBF row. Between `from`
// and `to` the row data and nominal input are interpolated linearly in time,
// so the total time derivative of grad_u Omega (through w, x and t) is exact
// for the interpolant. Returns the flow endpoint at to.t; throws
// LeftFeasibleRegion if u_prev is not strictly inside U_H at `from`.
ControlDecision omega_flow_control(const Vector& u_prev, const RowSample& from,
                                   const RowSample& to, const Vector& u_max,
                                   const OmegaFlowOptions& opts);

// Strictly interior starting input for the control flow built from a QP
// solution: blend towards an interior point of U_H.
std::optional<Vector> interior_start(const Vector& u_qp, const AffineRow& row,
                                     const Vector& u_max, double blend = 0.05);

}  // namespace ccbf

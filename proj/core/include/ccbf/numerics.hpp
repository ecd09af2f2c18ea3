#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace ccbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// y' = field(t, y)
using VectorField = std::function<Vector(double, const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;

// One classical RK4 step of size h. Throws IntegrationDiverged when a stage
// evaluation is not finite.
Vector rk4_step(const VectorField& field, double t, const Vector& y, double h);

// Fixed-step RK4 from t0 to t1. The last step is shortened so the endpoint
// lands exactly on t1.
Vector integrate_rk4(const VectorField& field, const Vector& y0, double t0,
                     double t1, double dt);

// Single RK4 step of size dt that keeps every stage inside an open region.
// When a stage state fails `interior` (or a stage evaluation throws
// ccbf::Error), the step is retried as two half steps, recursively, down to
// dt / 2^max_halvings. Throws LeftFeasibleRegion when the smallest allowed
// step still leaves the region.
Vector rk4_step_interior(const VectorField& field, double t, const Vector& y,
                         double dt,
                         const std::function<bool(double, const Vector&)>& interior,
                         int max_halvings = 6);

// Per-component central-difference step: eps * (1 + |y_i|).
double fd_step(double eps, double yi);

Vector finite_diff_gradient(const ScalarField& f, const Vector& y, double eps);

// Symmetrized central-difference Hessian.
Matrix finite_diff_hessian(const ScalarField& f, const Vector& y, double eps);

// Central-difference Jacobian of a vector function, one column per input
// component.
Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f,
                            const Vector& y, double eps);

double min_eigenvalue_symmetric(const Matrix& m);

// Partial-pivot LU solve. Throws SingularSystem when a pivot magnitude drops
// below 1e-12.
Vector solve_linear(const Matrix& a, const Vector& b);
Matrix solve_linear(const Matrix& a, const Matrix& b);

// Affine inequality a + b.u >= 0.
struct AffineRow {
  double offset = 0.0;
  Vector gain;
};

struct BoxQpResult {
  Vector u;
  // Indices of the active general rows (into the `rows` argument).
  std::vector<std::size_t> active_rows;
  // Active box faces: component index and side (+1 upper, -1 lower).
  std::vector<std::pair<std::size_t, int>> active_bounds;
  double objective = 0.0;
};

// Exact minimizer of 0.5 |u - u0|^2 over lo <= u <= hi and all rows, found by
// active-set enumeration. Intended for small problems (dimension <= 4, a
// handful of rows). Throws Infeasible when no point satisfies every
// constraint.
BoxQpResult solve_box_qp(const Vector& u0, const Vector& lo, const Vector& hi,
                         const std::vector<AffineRow>& rows);

// Largest violation of the box and rows at u (0 when feasible).
double max_violation(const Vector& u, const Vector& lo, const Vector& hi,
                     const std::vector<AffineRow>& rows);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace ccbf

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccbf/numerics.hpp"

namespace ccbf {

// x' = f(x) + g(x) u with |u_j| <= u_max_j.
struct ControlAffineSystem {
  std::size_t n = 0;
  std::size_t m = 0;
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> g;
  Vector u_max;

  Vector dynamics(const Vector& x, const Vector& u) const { return f(x) + g(x) * u; }
  // Throws ContractViolation on inconsistent dimensions or bounds.
  void validate() const;
};

// One constraint h(t,x) >= 0 together with its partial derivatives.
struct ConstraintSpec {
  std::string name;
  std::function<double(double, const Vector&)> h;
  std::function<double(double, const Vector&)> dh_dt;
  std::function<Vector(double, const Vector&)> grad_x;
  // Only needed by the exponential CBF baseline.
  std::function<Matrix(double, const Vector&)> hess_xx;
  int relative_degree = 1;
};

// Class-LL kernel phi(r, s) with phi(r,0) = phi(0,s) = 1.
class PhiKernel {
 public:
  enum class Kind { kExponential, kReciprocal };

  static PhiKernel exponential() { return PhiKernel(Kind::kExponential, 0.0); }
  // phi(r,s) = v / (r s + v), v > 0
  static PhiKernel reciprocal(double v);

  Kind kind() const { return kind_; }
  double v() const { return v_; }

  double value(double r, double s) const;
  double d_r(double r, double s) const;
  double d_s(double r, double s) const;
  double d_rr(double r, double s) const;
  double d_ss(double r, double s) const;
  double d_rs(double r, double s) const;

 private:
  PhiKernel(Kind kind, double v) : kind_(kind), v_(v) {}
  Kind kind_;
  double v_;
};

// Everything downstream needs about H = 1 - sum_i phi(h_i, w_i) at one
// (t, w, x). Row i of the stacked quantities belongs to constraint i.
struct CcbfDerivatives {
  double H = 0.0;
  double dH_dt = 0.0;
  Vector dH_dx;   // n
  Vector dH_dw;   // c
  Vector h;       // constraint values
  Vector p_h;     // d phi / d r at (h_i, w_i)
  Vector p_w;     // d phi / d s at (h_i, w_i)
  Vector p_hw;    // d2 phi / dr ds
  Vector p_ww;    // d2 phi / ds2
  Vector L_t;     // dh_i/dt
  Vector L_f;     // grad h_i . f
  Matrix L_g;     // c x m, grad h_i . g

  // dH/dx . f and dH/dx . g, which only depend on the stacked Lie terms.
  double dH_dx_f() const { return -p_h.dot(L_f); }
  Vector dH_dx_g() const { return -(L_g.transpose() * p_h); }
};

double ccbf_value(const PhiKernel& kernel, std::span<const ConstraintSpec> constraints,
                  double t, const Vector& w, const Vector& x);

CcbfDerivatives ccbf_derivatives(const PhiKernel& kernel,
                                 std::span<const ConstraintSpec> constraints,
                                 const ControlAffineSystem& system, double t,
                                 const Vector& w, const Vector& x);

bool in_complete_constraint_set(std::span<const ConstraintSpec> constraints,
                                double t, const Vector& x);

Vector constraint_values(std::span<const ConstraintSpec> constraints, double t,
                         const Vector& x);

// Locally Lipschitz extended class-K function with its derivative.
struct ClassK {
  std::string label;
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  double operator()(double v) const { return value(v); }

  static ClassK linear(double gain);
  static ClassK cubic(double gamma);
};

}  // namespace ccbf

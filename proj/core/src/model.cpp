#include "ccbf/model.hpp"

#include <cmath>
#include <sstream>

#include "ccbf/errors.hpp"

namespace ccbf {

void ControlAffineSystem::validate() const {
  if (n == 0 || m == 0) throw ContractViolation("system: dimensions must be positive");
  if (!f || !g) throw ContractViolation("system: f and g must be set");
  if (static_cast<std::size_t>(u_max.size()) != m) throw ContractViolation("system: u_max length != m");
  for (Eigen::Index j = 0; j < u_max.size(); ++j) {
    if (!(u_max[j] > 0.0) || !std::isfinite(u_max[j])) {
      throw ContractViolation("system: u_max entries must be finite and > 0");
    }
  }
}

PhiKernel PhiKernel::reciprocal(double v) {
  if (!(v > 0.0)) throw ContractViolation("reciprocal kernel: v must be > 0");
  return PhiKernel(Kind::kReciprocal, v);
}

double PhiKernel::value(double r, double s) const {
  if (kind_ == Kind::kExponential) return std::exp(-r * s);
  return v_ / (r * s + v_);
}

double PhiKernel::d_r(double r, double s) const {
  if (kind_ == Kind::kExponential) return -s * std::exp(-r * s);
  const double d = r * s + v_;
  return -v_ * s / (d * d);
}

double PhiKernel::d_s(double r, double s) const {
  if (kind_ == Kind::kExponential) return -r * std::exp(-r * s);
  const double d = r * s + v_;
  return -v_ * r / (d * d);
}

double PhiKernel::d_rr(double r, double s) const {
  if (kind_ == Kind::kExponential) return s * s * std::exp(-r * s);
  const double d = r * s + v_;
  return 2.0 * v_ * s * s / (d * d * d);
}

double PhiKernel::d_ss(double r, double s) const {
  if (kind_ == Kind::kExponential) return r * r * std::exp(-r * s);
  const double d = r * s + v_;
  return 2.0 * v_ * r * r / (d * d * d);
}

double PhiKernel::d_rs(double r, double s) const {
  if (kind_ == Kind::kExponential) return (r * s - 1.0) * std::exp(-r * s);
  const double d = r * s + v_;
  return v_ * (r * s - v_) / (d * d * d);
}

namespace {

void check_sizes(std::span<const ConstraintSpec> constraints, const Vector& w) {
  if (constraints.empty()) throw ContractViolation("C-CBF needs at least one constraint");
  if (static_cast<std::size_t>(w.size()) != constraints.size()) {
    std::ostringstream os;
    os << "weight vector length " << w.size() << " != constraint count " << constraints.size();
    throw ContractViolation(os.str());
  }
}

}  // namespace

Vector constraint_values(std::span<const ConstraintSpec> constraints, double t,
                         const Vector& x) {
  Vector h(static_cast<Eigen::Index>(constraints.size()));
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    h[static_cast<Eigen::Index>(i)] = constraints[i].h(t, x);
  }
  return h;
}

double ccbf_value(const PhiKernel& kernel, std::span<const ConstraintSpec> constraints,
                  double t, const Vector& w, const Vector& x) {
  check_sizes(constraints, w);
  double sum = 0.0;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    sum += kernel.value(constraints[i].h(t, x), w[static_cast<Eigen::Index>(i)]);
  }
  return 1.0 - sum;
}

CcbfDerivatives ccbf_derivatives(const PhiKernel& kernel,
                                 std::span<const ConstraintSpec> constraints,
                                 const ControlAffineSystem& system, double t,
                                 const Vector& w, const Vector& x) {
  check_sizes(constraints, w);
  const auto c = static_cast<Eigen::Index>(constraints.size());
  const auto n = static_cast<Eigen::Index>(system.n);
  const auto m = static_cast<Eigen::Index>(system.m);
  const Vector fx = system.f(x);
  const Matrix gx = system.g(x);

  CcbfDerivatives d;
  d.h.resize(c);
  d.p_h.resize(c);
  d.p_w.resize(c);
  d.p_hw.resize(c);
  d.p_ww.resize(c);
  d.L_t.resize(c);
  d.L_f.resize(c);
  d.L_g.resize(c, m);
  d.dH_dx = Vector::Zero(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < c; ++i) {
    const auto& spec = constraints[static_cast<std::size_t>(i)];
    const double hi = spec.h(t, x);
    const double wi = w[i];
    const Vector grad = spec.grad_x(t, x);
    d.h[i] = hi;
    d.p_h[i] = kernel.d_r(hi, wi);
    d.p_w[i] = kernel.d_s(hi, wi);
    d.p_hw[i] = kernel.d_rs(hi, wi);
    d.p_ww[i] = kernel.d_ss(hi, wi);
    d.L_t[i] = spec.dh_dt(t, x);
    d.L_f[i] = grad.dot(fx);
    d.L_g.row(i) = grad.transpose() * gx;
    d.dH_dx -= d.p_h[i] * grad;
    sum += kernel.value(hi, wi);
  }
  d.H = 1.0 - sum;
  d.dH_dt = -d.p_h.dot(d.L_t);
  d.dH_dw = -d.p_w;
  return d;
}

bool in_complete_constraint_set(std::span<const ConstraintSpec> constraints,
                                double t, const Vector& x) {
  for (const auto& spec : constraints) {
    if (!(spec.h(t, x) >= 0.0)) return false;
  }
  return true;
}

ClassK ClassK::linear(double gain) {
  std::ostringstream os;
  os << gain << "*H";
  return ClassK{os.str(), [gain](double v) { return gain * v; },
                [gain](double) { return gain; }};
}

ClassK ClassK::cubic(double gamma) {
  std::ostringstream os;
  os << gamma << "*H^3";
  return ClassK{os.str(), [gamma](double v) { return gamma * v * v * v; },
                [gamma](double v) { return 3.0 * gamma * v * v; }};
}

}  // namespace ccbf

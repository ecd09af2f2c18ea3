#include "ccbf/pcipm.hpp"

#include <cmath>
#include <sstream>

namespace ccbf {

bool strictly_interior(const BarrierProblem& prob, double t, const Vector& y) {
  for (const auto& c : prob.constraints) {
    const double v = c(t, y);
    if (!(v < 0.0)) return false;
  }
  return true;
}

double assemble_psi(const BarrierProblem& prob, double t, const Vector& y) {
  double barrier = 0.0;
  for (std::size_t j = 0; j < prob.constraints.size(); ++j) {
    const double cj = prob.constraints[j](t, y);
    if (!(cj < 0.0)) {
      std::ostringstream os;
      os << "constraint " << j << " = " << cj << " is not strictly negative at t=" << t;
      throw LeftFeasibleRegion(j, cj, os.str());
    }
    barrier += std::log(-cj);
  }
  return prob.objective(t, y) - barrier / prob.s;
}

Vector psi_gradient(const BarrierProblem& prob, double t, const Vector& y) {
  if (prob.gradient) return prob.gradient(t, y, prob.s);
  return finite_diff_gradient([&](const Vector& z) { return assemble_psi(prob, t, z); }, y,
                              kGradientEps);
}

Matrix psi_hessian(const BarrierProblem& prob, double t, const Vector& y) {
  if (prob.hessian) return prob.hessian(t, y, prob.s);
  if (prob.gradient) {
    const Matrix jac = finite_diff_jacobian(
        [&](const Vector& z) { return prob.gradient(t, z, prob.s); }, y, kGradientEps);
    return 0.5 * (jac + jac.transpose());
  }
  return finite_diff_hessian([&](const Vector& z) { return assemble_psi(prob, t, z); }, y,
                             kValueEps);
}

Vector psi_time_gradient(const BarrierProblem& prob, double t, const Vector& y) {
  if (prob.time_gradient) return prob.time_gradient(t, y, prob.s);
  const double h = kTimeStep * (1.0 + std::abs(t));
  return (psi_gradient(prob, t + h, y) - psi_gradient(prob, t - h, y)) / (2.0 * h);
}

namespace {

Matrix checked_hessian(const BarrierProblem& prob, double t, const Vector& y) {
  const Matrix hess = psi_hessian(prob, t, y);
  const double lam = min_eigenvalue_symmetric(hess);
  if (lam < prob.convexity_floor) {
    std::ostringstream os;
    os << "barrier Hessian min eigenvalue " << lam << " below floor "
       << prob.convexity_floor << " (s=" << prob.s << ")";
    throw ConvexityError(lam, os.str());
  }
  return hess;
}

}  // namespace

Vector flow_field(const BarrierProblem& prob, double t, const Vector& y) {
  const Matrix hess = checked_hessian(prob, t, y);
  const Vector rhs = prob.gain * psi_gradient(prob, t, y) + psi_time_gradient(prob, t, y);
  return -solve_linear(hess, rhs);
}

Vector correction_field(const BarrierProblem& prob, double t, const Vector& y) {
  const Matrix hess = checked_hessian(prob, t, y);
  return -solve_linear(hess, Vector(prob.gain * psi_gradient(prob, t, y)));
}

Vector correct_to_interior(const BarrierProblem& prob, double t,
                           const Vector& y0, double horizon, double dt) {
  if (!strictly_interior(prob, t, y0)) {
    throw LeftFeasibleRegion(0, 0.0, "correct_to_interior: start point is not strictly interior");
  }
  if (!(horizon >= 0.0) || !(dt > 0.0)) throw ContractViolation("correct_to_interior: bad horizon/dt");
  auto field = [&](double, const Vector& y) { return correction_field(prob, t, y); };
  auto interior = [&](double, const Vector& y) { return strictly_interior(prob, t, y); };
  Vector y = y0;
  double tau = 0.0;
  while (tau < horizon - 1e-12) {
    const double h = std::min(dt, horizon - tau);
    y = rk4_step_interior(field, tau, y, h, interior);
    tau += h;
  }
  return y;
}

std::vector<std::pair<double, Vector>> track(const BarrierProblem& prob,
                                             const Vector& y0, double t0,
                                             double t1, double dt) {
  if (!strictly_interior(prob, t0, y0)) {
    throw LeftFeasibleRegion(0, 0.0, "track: start point is not strictly interior");
  }
  auto field = [&](double t, const Vector& y) { return flow_field(prob, t, y); };
  auto interior = [&](double t, const Vector& y) { return strictly_interior(prob, t, y); };
  std::vector<std::pair<double, Vector>> out;
  out.emplace_back(t0, y0);
  Vector y = y0;
  const auto steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    const double h = std::min(dt, t1 - t);
    y = rk4_step_interior(field, t, y, h, interior);
    out.emplace_back(t + h, y);
  }
  return out;
}

double tracking_bound_constant(const BarrierProblem& prob, const Vector& y0) {
  return psi_gradient(prob, 0.0, y0).norm() / prob.convexity_floor;
}

}  // namespace ccbf

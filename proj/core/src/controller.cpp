#include "ccbf/controller.hpp"

#include <cmath>
#include <sstream>

#include "ccbf/errors.hpp"

namespace ccbf {

namespace {

Vector box_clip(const Vector& u, const Vector& u_max) {
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

// Solves the box QP and packages the outcome; rows are named for reporting.
ControlDecision decide(const Vector& u_nominal, const Vector& u_max,
                       const std::vector<AffineRow>& rows,
                       const std::vector<std::string>& names) {
  ControlDecision out;
  try {
    const auto res = solve_box_qp(u_nominal, -u_max, u_max, rows);
    out.u = res.u;
    out.feasible = true;
    for (std::size_t k : res.active_rows) out.active_set.push_back(names[k]);
    for (const auto& [j, side] : res.active_bounds) {
      std::ostringstream os;
      os << (side > 0 ? "u_max[" : "u_min[") << j << "]";
      out.active_set.push_back(os.str());
    }
  } catch (const Infeasible& e) {
    out.u = box_clip(u_nominal, u_max);
    out.feasible = false;
    for (std::size_t k : e.conflicting_rows()) out.conflict.push_back(names[k]);
  }
  if (!rows.empty()) out.margin = rows.front().offset + rows.front().gain.dot(out.u);
  return out;
}

}  // namespace

AffineRow ccbf_condition_row(const CcbfDerivatives& deriv, const Vector& mu,
                             const Matrix& nu, const ClassK& alpha) {
  AffineRow row;
  row.offset = alpha(deriv.H) + deriv.dH_dt + deriv.dH_dx_f() + deriv.dH_dw.dot(mu);
  row.gain = deriv.dH_dx_g() + nu.transpose() * deriv.dH_dw;
  return row;
}

ControlDecision ccbf_qp(const CcbfDerivatives& deriv, const Vector& mu, const Matrix& nu,
                        const ControlAffineSystem& system, const ClassK& alpha,
                        const Vector& u_nominal) {
  return decide(u_nominal, system.u_max, {ccbf_condition_row(deriv, mu, nu, alpha)}, {"ccbf"});
}

ControlDecision single_cbf_qp(const ConstraintSpec& constraint,
                              const ControlAffineSystem& system, const ClassK& alpha,
                              double t, const Vector& x, const Vector& u_nominal) {
  const Vector grad = constraint.grad_x(t, x);
  AffineRow row;
  row.offset = constraint.dh_dt(t, x) + grad.dot(system.f(x)) + alpha(constraint.h(t, x));
  row.gain = system.g(x).transpose() * grad;
  return decide(u_nominal, system.u_max, {row}, {constraint.name});
}

namespace {

// First-order Lie data of h'' for a relative-degree-2 constraint.
AffineRow ecbf_row(const ConstraintSpec& spec, const EcbfGains& gains,
                   const ControlAffineSystem& system, double t, const Vector& x) {
  if (!spec.hess_xx) {
    throw ContractViolation("ecbf_qp: relative-degree-2 constraint '" + spec.name +
                            "' needs hess_xx");
  }
  const Vector fx = system.f(x);
  const Matrix gx = system.g(x);
  const Vector grad = spec.grad_x(t, x);
  const double h = spec.h(t, x);
  const double hdot = spec.dh_dt(t, x) + grad.dot(fx);

  const double ht = kTimeStep * (1.0 + std::abs(t));
  const double h_tt = (spec.dh_dt(t + ht, x) - spec.dh_dt(t - ht, x)) / (2.0 * ht);
  const Vector grad_t = (spec.grad_x(t + ht, x) - spec.grad_x(t - ht, x)) / (2.0 * ht);
  const Vector grad_ht =
      finite_diff_gradient([&](const Vector& z) { return spec.dh_dt(t, z); }, x, kGradientEps);
  const Matrix jac_f = finite_diff_jacobian(system.f, x, kGradientEps);

  // grad_x of hdot and its explicit time derivative.
  const Vector grad_hdot = grad_ht + spec.hess_xx(t, x) * fx + jac_f.transpose() * grad;
  const double hdot_t = h_tt + grad_t.dot(fx);

  AffineRow row;
  row.offset = hdot_t + grad_hdot.dot(fx) + gains.k1 * hdot + gains.k2 * h;
  row.gain = gx.transpose() * grad_hdot;
  return row;
}

}  // namespace

ControlDecision ecbf_qp(std::span<const ConstraintSpec> constraints,
                        std::span<const EcbfGains> gains, const ControlAffineSystem& system,
                        const ClassK& alpha, double t, const Vector& x,
                        const Vector& u_nominal) {
  if (gains.size() != constraints.size()) {
    throw ContractViolation("ecbf_qp: one gain pair per constraint required");
  }
  std::vector<AffineRow> rows;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& spec = constraints[i];
    if (spec.relative_degree >= 2) {
      rows.push_back(ecbf_row(spec, gains[i], system, t, x));
    } else {
      const Vector grad = spec.grad_x(t, x);
      AffineRow row;
      row.offset = spec.dh_dt(t, x) + grad.dot(system.f(x)) + alpha(spec.h(t, x));
      row.gain = system.g(x).transpose() * grad;
      rows.push_back(row);
    }
    names.push_back(spec.name);
  }
  return decide(u_nominal, system.u_max, rows, names);
}

namespace {

struct OmegaData {
  AffineRow row;
  Vector u_nominal;
  // time derivatives of the interpolated data
  double offset_rate = 0.0;
  Vector gain_rate;
  Vector u_nominal_rate;
};

OmegaData interpolate(const RowSample& from, const RowSample& to, double t) {
  const double span = to.t - from.t;
  const double lam = span > 0.0 ? (t - from.t) / span : 1.0;
  OmegaData d;
  d.row.offset = (1.0 - lam) * from.row.offset + lam * to.row.offset;
  d.row.gain = (1.0 - lam) * from.row.gain + lam * to.row.gain;
  d.u_nominal = (1.0 - lam) * from.u_nominal + lam * to.u_nominal;
  const double inv = span > 0.0 ? 1.0 / span : 0.0;
  d.offset_rate = (to.row.offset - from.row.offset) * inv;
  d.gain_rate = (to.row.gain - from.row.gain) * inv;
  d.u_nominal_rate = (to.u_nominal - from.u_nominal) * inv;
  return d;
}

bool omega_interior(const OmegaData& d, const Vector& u, const Vector& u_max) {
  if (!((u_max - u).array() > 0.0).all() || !((u + u_max).array() > 0.0).all()) return false;
  return d.row.offset + d.row.gain.dot(u) > 0.0;
}

Vector omega_rate(const OmegaData& d, const Vector& u, const Vector& u_max,
                  const OmegaFlowOptions& opts) {
  if (!omega_interior(d, u, u_max)) {
    throw LeftFeasibleRegion(0, 0.0, "control flow left U_H");
  }
  const auto m = u.size();
  const double inv_s = 1.0 / opts.s;
  const Vector upper = u_max - u;
  const Vector lower = u + u_max;
  const double r = d.row.offset + d.row.gain.dot(u);

  Vector grad = (u - d.u_nominal) + inv_s * (upper.cwiseInverse() - lower.cwiseInverse()) -
                (inv_s / r) * d.row.gain;
  Matrix hess = Matrix::Identity(m, m);
  hess.diagonal() += inv_s * (upper.cwiseAbs2().cwiseInverse() + lower.cwiseAbs2().cwiseInverse());
  hess += (inv_s / (r * r)) * d.row.gain * d.row.gain.transpose();
  const double r_rate = d.offset_rate + d.gain_rate.dot(u);
  const Vector grad_t =
      -d.u_nominal_rate - inv_s * (d.gain_rate / r - d.row.gain * (r_rate / (r * r)));

  const double lam = min_eigenvalue_symmetric(hess);
  if (lam < opts.convexity_floor) {
    throw ConvexityError(lam, "control barrier Hessian below convexity floor");
  }
  return -solve_linear(hess, Vector(opts.B * grad + grad_t));
}

}  // namespace

ControlDecision omega_flow_control(const Vector& u_prev, const RowSample& from,
                                   const RowSample& to, const Vector& u_max,
                                   const OmegaFlowOptions& opts) {
  if (!omega_interior(interpolate(from, to, from.t), u_prev, u_max)) {
    throw LeftFeasibleRegion(0, 0.0, "omega_flow_control: u_prev not strictly inside U_H");
  }
  auto field = [&](double t, const Vector& u) {
    return omega_rate(interpolate(from, to, t), u, u_max, opts);
  };
  auto interior = [&](double t, const Vector& u) {
    return omega_interior(interpolate(from, to, t), u, u_max);
  };
  const int n = std::max(1, opts.substeps);
  const double h = (to.t - from.t) / n;
  Vector u = u_prev;
  for (int k = 0; k < n; ++k) {
    u = rk4_step_interior(field, from.t + k * h, u, h, interior);
  }
  ControlDecision out;
  out.u = u;
  out.feasible = true;
  out.margin = to.row.offset + to.row.gain.dot(u);
  return out;
}

std::optional<Vector> interior_start(const Vector& u_qp, const AffineRow& row,
                                     const Vector& u_max, double blend) {
  // Candidates push towards the face that most increases the row.
  Vector dir(u_max.size());
  for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = row.gain[j] >= 0.0 ? 1.0 : -1.0;
  for (double scale : {0.0, 0.5, 0.9, 0.99}) {
    const Vector centre = scale * dir.cwiseProduct(u_max);
    if (row.offset + row.gain.dot(centre) <= 0.0) continue;
    const Vector u = (1.0 - blend) * u_qp + blend * centre;
    const bool inside = ((u_max - u).array() > 0.0).all() && ((u + u_max).array() > 0.0).all() &&
                        row.offset + row.gain.dot(u) > 0.0;
    if (inside) return u;
  }
  return std::nullopt;
}

}  // namespace ccbf

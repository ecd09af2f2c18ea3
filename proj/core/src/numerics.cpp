#include "ccbf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "ccbf/errors.hpp"

namespace ccbf {

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

Vector eval_checked(const VectorField& field, double t, const Vector& y) {
  Vector dy = field(t, y);
  if (!dy.allFinite()) {
    std::ostringstream os;
    os << "integration diverged: non-finite field value at t=" << t;
    throw IntegrationDiverged(t, os.str());
  }
  return dy;
}

}  // namespace

Vector rk4_step(const VectorField& field, double t, const Vector& y, double h) {
  const Vector k1 = eval_checked(field, t, y);
  const Vector k2 = eval_checked(field, t + 0.5 * h, y + 0.5 * h * k1);
  const Vector k3 = eval_checked(field, t + 0.5 * h, y + 0.5 * h * k2);
  const Vector k4 = eval_checked(field, t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector integrate_rk4(const VectorField& field, const Vector& y0, double t0,
                     double t1, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("integrate_rk4: dt must be > 0");
  if (!(t1 >= t0)) throw ContractViolation("integrate_rk4: t1 must be >= t0");
  Vector y = y0;
  double t = t0;
  // Step count fixed up front so accumulated rounding in t cannot add a
  // spurious sliver step.
  const double span = t1 - t0;
  const auto full_steps = static_cast<long>(std::floor(span / dt + 1e-9));
  for (long k = 0; k < full_steps; ++k) {
    y = rk4_step(field, t, y, dt);
    t = t0 + static_cast<double>(k + 1) * dt;
  }
  const double rest = t1 - t;
  if (rest > 1e-12 * std::max(1.0, std::abs(t1))) {
    y = rk4_step(field, t, y, rest);
  }
  return y;
}

namespace {

bool try_interior_step(const VectorField& field, double t, const Vector& y,
                       double h,
                       const std::function<bool(double, const Vector&)>& interior,
                       Vector& out) {
  try {
    const Vector k1 = eval_checked(field, t, y);
    const Vector y2 = y + 0.5 * h * k1;
    if (!interior(t + 0.5 * h, y2)) return false;
    const Vector k2 = eval_checked(field, t + 0.5 * h, y2);
    const Vector y3 = y + 0.5 * h * k2;
    if (!interior(t + 0.5 * h, y3)) return false;
    const Vector k3 = eval_checked(field, t + 0.5 * h, y3);
    const Vector y4 = y + h * k3;
    if (!interior(t + h, y4)) return false;
    const Vector k4 = eval_checked(field, t + h, y4);
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    return out.allFinite() && interior(t + h, out);
  } catch (const LeftFeasibleRegion&) {
    return false;
  } catch (const IntegrationDiverged&) {
    return false;
  }
}

Vector interior_step(const VectorField& field, double t, const Vector& y,
                     double h,
                     const std::function<bool(double, const Vector&)>& interior,
                     int halvings_left) {
  Vector out;
  if (try_interior_step(field, t, y, h, interior, out)) return out;
  if (halvings_left <= 0) {
    std::ostringstream os;
    os << "step of size " << h << " at t=" << t
       << " leaves the interior after maximal halving";
    throw LeftFeasibleRegion(0, 0.0, os.str());
  }
  const double half = 0.5 * h;
  const Vector mid = interior_step(field, t, y, half, interior, halvings_left - 1);
  return interior_step(field, t + half, mid, half, interior, halvings_left - 1);
}

}  // namespace

Vector rk4_step_interior(const VectorField& field, double t, const Vector& y,
                         double dt,
                         const std::function<bool(double, const Vector&)>& interior,
                         int max_halvings) {
  return interior_step(field, t, y, dt, interior, max_halvings);
}

double fd_step(double eps, double yi) { return eps * (1.0 + std::abs(yi)); }

namespace {

double checked_eval(const ScalarField& f, const Vector& y, std::size_t comp) {
  const double v = f(y);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "finite difference: non-finite stencil value in component " << comp;
    throw DifferentiationError(comp, os.str());
  }
  return v;
}

}  // namespace

Vector finite_diff_gradient(const ScalarField& f, const Vector& y, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite_diff_gradient: eps must be > 0");
  const Eigen::Index n = y.size();
  Vector grad(n);
  Vector yp = y;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = fd_step(eps, y[i]);
    yp[i] = y[i] + h;
    const double fp = checked_eval(f, yp, static_cast<std::size_t>(i));
    yp[i] = y[i] - h;
    const double fm = checked_eval(f, yp, static_cast<std::size_t>(i));
    yp[i] = y[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Matrix finite_diff_hessian(const ScalarField& f, const Vector& y, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite_diff_hessian: eps must be > 0");
  const Eigen::Index n = y.size();
  Matrix hess(n, n);
  const double f0 = checked_eval(f, y, 0);
  Vector yp = y;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step(eps, y[i]);
    yp[i] = y[i] + hi;
    const double fp = checked_eval(f, yp, static_cast<std::size_t>(i));
    yp[i] = y[i] - hi;
    const double fm = checked_eval(f, yp, static_cast<std::size_t>(i));
    yp[i] = y[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double hj = fd_step(eps, y[j]);
      auto at = [&](double si, double sj) {
        yp[i] = y[i] + si * hi;
        yp[j] = y[j] + sj * hj;
        const double v = checked_eval(f, yp, static_cast<std::size_t>(j));
        yp[i] = y[i];
        yp[j] = y[j];
        return v;
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return 0.5 * (hess + hess.transpose());
}

Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f,
                            const Vector& y, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite_diff_jacobian: eps must be > 0");
  Vector yp = y;
  Matrix jac;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double h = fd_step(eps, y[i]);
    yp[i] = y[i] + h;
    const Vector fp = f(yp);
    yp[i] = y[i] - h;
    const Vector fm = f(yp);
    yp[i] = y[i];
    if (!fp.allFinite() || !fm.allFinite()) {
      std::ostringstream os;
      os << "finite difference: non-finite stencil value in component " << i;
      throw DifferentiationError(static_cast<std::size_t>(i), os.str());
    }
    if (i == 0) jac.resize(fp.size(), y.size());
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

double min_eigenvalue_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) throw ContractViolation("min_eigenvalue_symmetric: matrix not square");
  if (m.size() == 0) throw ContractViolation("min_eigenvalue_symmetric: empty matrix");
  if (!m.allFinite()) throw ContractViolation("min_eigenvalue_symmetric: non-finite entry");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    std::ostringstream os;
    os << "min_eigenvalue_symmetric: asymmetry " << asym << " exceeds 1e-8";
    throw ContractViolation(os.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

namespace {

Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& a) {
  if (a.rows() != a.cols()) throw ContractViolation("solve_linear: matrix not square");
  Eigen::PartialPivLU<Matrix> lu(a);
  const auto diag = lu.matrixLU().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(std::abs(diag[i]) >= 1e-12)) {
      std::ostringstream os;
      os << "solve_linear: pivot " << diag[i] << " below 1e-12 (singular system)";
      throw SingularSystem(diag[i], os.str());
    }
  }
  return lu;
}

}  // namespace

Vector solve_linear(const Matrix& a, const Vector& b) {
  if (b.size() != a.rows()) throw ContractViolation("solve_linear: dimension mismatch");
  return checked_lu(a).solve(b);
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (b.rows() != a.rows()) throw ContractViolation("solve_linear: dimension mismatch");
  return checked_lu(a).solve(b);
}

namespace {

// Unified constraint form: offset + gain.u >= 0.
struct Halfspace {
  double offset;
  Vector gain;
};

std::vector<Halfspace> unify(const Vector& lo, const Vector& hi,
                             const std::vector<AffineRow>& rows,
                             const std::vector<std::size_t>& row_subset) {
  const Eigen::Index m = lo.size();
  std::vector<Halfspace> hs;
  hs.reserve(static_cast<std::size_t>(2 * m) + row_subset.size());
  for (std::size_t k : row_subset) hs.push_back({rows[k].offset, rows[k].gain});
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector e = Vector::Zero(m);
    e[j] = 1.0;
    hs.push_back({-lo[j], e});
    hs.push_back({hi[j], -e});
  }
  return hs;
}

double tolerance(const Halfspace& h, const Vector& u) {
  return 1e-11 * (1.0 + std::abs(h.offset) + h.gain.norm() * (1.0 + u.norm()));
}

struct Candidate {
  Vector u;
  double objective;
  std::vector<std::size_t> active;  // indices into the unified list
  bool dual_ok;
};

std::optional<Candidate> enumerate(const Vector& u0,
                                   const std::vector<Halfspace>& hs) {
  const auto m = static_cast<std::size_t>(u0.size());
  const std::size_t total = hs.size();
  std::optional<Candidate> best;
  std::vector<std::size_t> subset;

  auto consider = [&]() {
    const auto k = static_cast<Eigen::Index>(subset.size());
    Vector u = u0;
    Vector lambda;
    if (k > 0) {
      Matrix a(k, static_cast<Eigen::Index>(m));
      Vector rhs(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        a.row(r) = hs[subset[static_cast<std::size_t>(r)]].gain.transpose();
        rhs[r] = -hs[subset[static_cast<std::size_t>(r)]].offset;
      }
      const Matrix gram = a * a.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      lu.setThreshold(1e-12);
      if (lu.rank() < k) return;
      lambda = lu.solve(rhs - a * u0);
      u = u0 + a.transpose() * lambda;
    }
    for (const auto& h : hs) {
      if (h.offset + h.gain.dot(u) < -tolerance(h, u)) return;
    }
    const double obj = 0.5 * (u - u0).squaredNorm();
    const bool dual_ok = k == 0 || lambda.minCoeff() >= -1e-10;
    const bool better =
        !best || obj < best->objective - 1e-14 ||
        (obj <= best->objective + 1e-14 && dual_ok && !best->dual_ok);
    if (better) best = Candidate{u, obj, subset, dual_ok};
  };

  // Depth-first enumeration of subsets of size <= m.
  std::function<void(std::size_t)> recurse = [&](std::size_t start) {
    consider();
    if (subset.size() == m) return;
    for (std::size_t i = start; i < total; ++i) {
      subset.push_back(i);
      recurse(i + 1);
      subset.pop_back();
    }
  };
  recurse(0);
  return best;
}

}  // namespace

double max_violation(const Vector& u, const Vector& lo, const Vector& hi,
                     const std::vector<AffineRow>& rows) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    worst = std::max({worst, lo[j] - u[j], u[j] - hi[j]});
  }
  for (const auto& r : rows) worst = std::max(worst, -(r.offset + r.gain.dot(u)));
  return worst;
}

BoxQpResult solve_box_qp(const Vector& u0, const Vector& lo, const Vector& hi,
                         const std::vector<AffineRow>& rows) {
  const Eigen::Index m = u0.size();
  if (lo.size() != m || hi.size() != m) throw ContractViolation("solve_box_qp: box dimension mismatch");
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(lo[j] <= hi[j])) throw ContractViolation("solve_box_qp: lo > hi");
  }
  for (const auto& r : rows) {
    if (r.gain.size() != m) throw ContractViolation("solve_box_qp: row dimension mismatch");
    if (!std::isfinite(r.offset) || !r.gain.allFinite()) throw ContractViolation("solve_box_qp: non-finite row");
  }
  if (!u0.allFinite()) throw ContractViolation("solve_box_qp: non-finite u0");

  std::vector<std::size_t> all(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) all[k] = k;
  const auto hs = unify(lo, hi, rows, all);
  const auto best = enumerate(u0, hs);

  if (!best) {
    // Deletion filter: drop rows whose removal keeps the set infeasible.
    std::vector<std::size_t> conflict = all;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::vector<std::size_t> trial;
      for (std::size_t r : conflict)
        if (r != k) trial.push_back(r);
      if (trial.size() == conflict.size()) continue;
      if (!enumerate(u0, unify(lo, hi, rows, trial))) conflict = trial;
    }
    std::ostringstream os;
    os << "box QP infeasible; conflicting rows {";
    for (std::size_t i = 0; i < conflict.size(); ++i) os << (i ? "," : "") << conflict[i];
    os << "}";
    throw Infeasible(conflict, os.str());
  }

  BoxQpResult out;
  out.u = best->u.cwiseMax(lo).cwiseMin(hi);
  out.objective = 0.5 * (out.u - u0).squaredNorm();
  for (std::size_t idx : best->active) {
    if (idx < rows.size()) {
      out.active_rows.push_back(idx);
    } else {
      const std::size_t b = idx - rows.size();
      out.active_bounds.emplace_back(b / 2, b % 2 == 0 ? -1 : +1);
    }
  }
  return out;
}

}  // namespace ccbf

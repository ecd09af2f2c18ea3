#include "ccbf/adaptation.hpp"

#include <cmath>
#include <sstream>

#include "ccbf/errors.hpp"

namespace ccbf {

void WeightState::validate() const {
  const auto c = w.size();
  if (c == 0) throw ContractViolation("weights: empty weight vector");
  if (!(w_min > 0.0) || !(w_max > w_min) || !std::isfinite(w_max)) {
    throw ContractViolation("weights: need 0 < w_min < w_max < inf");
  }
  if (!(s > 0.0)) throw ContractViolation("weights: barrier parameter s must be > 0");
  if (P.rows() != c || P.cols() != c) throw ContractViolation("weights: P must be c x c");
  if (min_eigenvalue_symmetric(P) <= 0.0) throw ContractViolation("weights: P must be positive definite");
  if (mu_f.size() != c || nu_f.rows() != c) throw ContractViolation("weights: filter state dimension mismatch");
  if (!(eta_mu > 0.0) || !(eta_nu > 0.0) || !std::isfinite(eta_mu) || !std::isfinite(eta_nu)) {
    throw ContractViolation("weights: need 0 < eta_mu, eta_nu < inf");
  }
  if (!(tau > 0.0)) throw ContractViolation("weights: filter time constant must be > 0");
  if (!(convexity_floor > 0.0)) throw ContractViolation("weights: convexity floor must be > 0");
}

WeightObjective WeightObjective::proximal(Vector w_ref) {
  WeightObjective obj;
  obj.value = [w_ref](double, const Vector& w, const Vector&) {
    return 0.5 * (w - w_ref).squaredNorm();
  };
  obj.gradient = [w_ref](double, const Vector& w, const Vector&) -> Vector { return w - w_ref; };
  return obj;
}

Vector eval_bound_constraints(const WeightState& ws, const Vector& w) {
  const auto c = w.size();
  Vector b(2 * c);
  b.head(c) = Vector::Constant(c, ws.w_min) - w;
  b.tail(c) = w - Vector::Constant(c, ws.w_max);
  return b;
}

Vector eval_bound_constraints(const WeightState& ws) { return eval_bound_constraints(ws, ws.w); }

double eval_delta(const CcbfDerivatives& deriv, const WeightState& ws, const ClassK& alpha) {
  return ws.eta_mu + ws.eta_nu - deriv.dH_dt - deriv.dH_dx_f() - deriv.dH_dw.dot(ws.mu_f) -
         alpha(deriv.H);
}

Vector eval_q(const CcbfDerivatives& deriv, const WeightState& ws) {
  return deriv.L_g.transpose() * deriv.p_h + ws.nu_f.transpose() * deriv.p_w;
}

double eval_b_ccbf(double delta, const Vector& q, const Vector& u_max) {
  return delta - q.cwiseAbs().dot(u_max);
}

namespace {

// b_{2c+1} and its analytic w-gradient at one point.
struct CcbfConstraint {
  double value;
  Vector gradient;
};

// sign(q) at the point; entries at round-off level count as zero so that
// exactly symmetric configurations pick the symmetric branch.
Vector q_signs(const Vector& q, double scale) {
  const double tol = 1e-12 * (1.0 + scale);
  Vector out(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    out[j] = q[j] > tol ? 1.0 : (q[j] < -tol ? -1.0 : 0.0);
  }
  return out;
}

// Magnitude of the terms summed into q, used to judge round-off.
double q_scale(const CcbfDerivatives& d, const WeightState& ws) {
  return (d.L_g.transpose() * d.p_h.cwiseAbs()).cwiseAbs().maxCoeff() +
         (ws.nu_f.cwiseAbs().transpose() * d.p_w.cwiseAbs()).maxCoeff();
}

// With `branch` set, |q_j| is replaced by branch_j * q_j so that value and
// gradient stay on one smooth piece of b_{2c+1}.
CcbfConstraint ccbf_constraint(const AdaptationContext& ctx, const WeightState& ws,
                               double t, const Vector& w, const Vector& x,
                               const Vector* branch = nullptr) {
  const auto d = ccbf_derivatives(ctx.kernel, ctx.constraints, ctx.system, t, w, x);
  const double delta = eval_delta(d, ws, ctx.alpha);
  const Vector q = eval_q(d, ws);
  const Vector& u_max = ctx.system.u_max;

  const double dalpha = ctx.alpha.derivative(d.H);
  // d delta / d w_k: only the k-th kernel term depends on w_k.
  Vector grad = d.p_hw.cwiseProduct(d.L_t + d.L_f) + d.p_ww.cwiseProduct(ws.mu_f) +
                dalpha * d.p_w;
  // d |q|^T u_max / d w_k with dq_j/dw_k = L_g(k,j) p_hw_k + nu_f(k,j) p_ww_k.
  const Vector signs = branch ? *branch : q_signs(q, q_scale(d, ws));
  const Vector signed_umax = signs.cwiseProduct(u_max);
  const Vector dq_term = d.p_hw.cwiseProduct(d.L_g * signed_umax) +
                         d.p_ww.cwiseProduct(ws.nu_f * signed_umax);
  grad -= dq_term;
  return {delta - q.dot(signed_umax), grad};
}

}  // namespace

Vector eval_feasibility(const AdaptationContext& ctx, const WeightState& ws, double t,
                        const Vector& w, const Vector& x) {
  const auto c = w.size();
  Vector b(2 * c + 1);
  b.head(2 * c) = eval_bound_constraints(ws, w);
  const auto d = ccbf_derivatives(ctx.kernel, ctx.constraints, ctx.system, t, w, x);
  b[2 * c] = eval_b_ccbf(eval_delta(d, ws, ctx.alpha), eval_q(d, ws), ctx.system.u_max);
  return b;
}

double phi_value(const AdaptationContext& ctx, const WeightState& ws, double t,
                 const Vector& w, const Vector& x) {
  const Vector b = eval_feasibility(ctx, ws, t, w, x);
  double barrier = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (!(b[j] < 0.0)) {
      std::ostringstream os;
      os << "weight constraint b_" << j << " = " << b[j] << " outside the feasible region";
      throw LeftFeasibleRegion(static_cast<std::size_t>(j), b[j], os.str());
    }
    barrier += std::log(-b[j]);
  }
  return ctx.objective.value(t, w, x) - barrier / ws.s;
}

Vector phi_gradient(const AdaptationContext& ctx, const WeightState& ws, double t,
                    const Vector& w, const Vector& x) {
  const auto c = w.size();
  const Vector bounds = eval_bound_constraints(ws, w);
  for (Eigen::Index j = 0; j < bounds.size(); ++j) {
    if (!(bounds[j] < 0.0)) {
      std::ostringstream os;
      os << "weight bound b_" << j << " = " << bounds[j] << " outside the feasible region";
      throw LeftFeasibleRegion(static_cast<std::size_t>(j), bounds[j], os.str());
    }
  }
  const auto cc = ccbf_constraint(ctx, ws, t, w, x);
  if (!(cc.value < 0.0)) {
    std::ostringstream os;
    os << "C-CBF feasibility constraint b = " << cc.value << " outside the feasible region";
    throw LeftFeasibleRegion(static_cast<std::size_t>(2 * c), cc.value, os.str());
  }
  // -(1/s) sum_j grad b_j / b_j
  Vector grad = ctx.objective.gradient(t, w, x);
  for (Eigen::Index k = 0; k < c; ++k) {
    grad[k] -= (-1.0 / bounds[k] + 1.0 / bounds[c + k]) / ws.s;
  }
  grad -= cc.gradient / (cc.value * ws.s);
  return grad;
}

BarrierProblem assemble_phi(const AdaptationContext& ctx, const WeightState& ws,
                            const Vector& x) {
  BarrierProblem prob;
  prob.objective = [&ctx, x](double t, const Vector& w) { return ctx.objective.value(t, w, x); };
  const auto c = static_cast<std::size_t>(ws.w.size());
  for (std::size_t j = 0; j < 2 * c; ++j) {
    prob.constraints.push_back([ws, j](double, const Vector& w) {
      return eval_bound_constraints(ws, w)[static_cast<Eigen::Index>(j)];
    });
  }
  prob.constraints.push_back([&ctx, ws, x, c](double t, const Vector& w) {
    return eval_feasibility(ctx, ws, t, w, x)[static_cast<Eigen::Index>(2 * c)];
  });
  prob.s = ws.s;
  prob.gain = ws.P;
  prob.convexity_floor = ws.convexity_floor;
  prob.gradient = [&ctx, ws, x](double t, const Vector& w, double s) {
    WeightState probe = ws;
    probe.s = s;
    return phi_gradient(ctx, probe, t, w, x);
  };
  prob.hessian = [&ctx, ws, x](double t, const Vector& w, double s) {
    WeightState probe = ws;
    probe.s = s;
    return phi_hessian(ctx, probe, t, w, x);
  };
  return prob;
}

namespace {

Vector smooth_branch(const AdaptationContext& ctx, const WeightState& ws, double t,
                     const Vector& w, const Vector& x) {
  const auto base = ccbf_derivatives(ctx.kernel, ctx.constraints, ctx.system, t, w, x);
  return q_signs(eval_q(base, ws), q_scale(base, ws));
}

// Second derivatives of Phi. The barrier part is assembled from first and
// second derivatives of the constraints, so the 1/b^2 growth near the
// boundary is exact; only the smooth b_{2c+1} is differenced.
struct PhiSecondOrder {
  Matrix ww;      // c x c
  Matrix wx;      // c x n
  Vector wt;      // c
};

PhiSecondOrder phi_second_order(const AdaptationContext& ctx, const WeightState& ws, double t,
                                const Vector& w, const Vector& x, const Vector& branch,
                                bool with_x_t) {
  const auto c = w.size();
  const auto cc = ccbf_constraint(ctx, ws, t, w, x, &branch);
  if (!(cc.value < 0.0)) {
    std::ostringstream os;
    os << "C-CBF feasibility constraint b = " << cc.value << " outside the feasible region";
    throw LeftFeasibleRegion(static_cast<std::size_t>(2 * c), cc.value, os.str());
  }
  const Vector bounds = eval_bound_constraints(ws, w);
  const double b = cc.value;
  const double inv_s = 1.0 / ws.s;

  auto obj_w = [&](const Vector& z) { return ctx.objective.gradient(t, z, x); };
  auto cc_w = [&](const Vector& z) { return ccbf_constraint(ctx, ws, t, z, x, &branch).gradient; };
  Matrix bww = finite_diff_jacobian(cc_w, w, kGradientEps);
  bww = (0.5 * (bww + bww.transpose())).eval();

  PhiSecondOrder out;
  out.ww = finite_diff_jacobian(obj_w, w, kGradientEps);
  out.ww = (0.5 * (out.ww + out.ww.transpose())).eval();
  for (Eigen::Index k = 0; k < c; ++k) {
    out.ww(k, k) += inv_s * (1.0 / (bounds[k] * bounds[k]) + 1.0 / (bounds[c + k] * bounds[c + k]));
  }
  out.ww += inv_s * (cc.gradient * cc.gradient.transpose() / (b * b) - bww / b);
  if (!with_x_t) return out;

  auto obj_x = [&](const Vector& z) { return ctx.objective.gradient(t, w, z); };
  auto cc_x = [&](const Vector& z) { return ccbf_constraint(ctx, ws, t, w, z, &branch).gradient; };
  auto cc_value_x = [&](const Vector& z) { return ccbf_constraint(ctx, ws, t, w, z, &branch).value; };
  const Vector bx = finite_diff_gradient(cc_value_x, x, kGradientEps);
  out.wx = finite_diff_jacobian(obj_x, x, kGradientEps) +
           inv_s * (cc.gradient * bx.transpose() / (b * b) -
                    finite_diff_jacobian(cc_x, x, kGradientEps) / b);

  const double ht = kTimeStep * (1.0 + std::abs(t));
  const auto plus = ccbf_constraint(ctx, ws, t + ht, w, x, &branch);
  const auto minus = ccbf_constraint(ctx, ws, t - ht, w, x, &branch);
  const double bt = (plus.value - minus.value) / (2.0 * ht);
  const Vector bwt = (plus.gradient - minus.gradient) / (2.0 * ht);
  const Vector jwt =
      (ctx.objective.gradient(t + ht, w, x) - ctx.objective.gradient(t - ht, w, x)) / (2.0 * ht);
  out.wt = jwt + inv_s * (cc.gradient * (bt / (b * b)) - bwt / b);
  return out;
}

}  // namespace

Matrix phi_hessian(const AdaptationContext& ctx, const WeightState& ws, double t,
                   const Vector& w, const Vector& x) {
  return phi_second_order(ctx, ws, t, w, x, smooth_branch(ctx, ws, t, w, x), false).ww;
}

MuNu compute_mu_nu(const AdaptationContext& ctx, const WeightState& ws, double t,
                   const Vector& w, const Vector& x) {
  const Vector branch = smooth_branch(ctx, ws, t, w, x);
  const Vector g0 = phi_gradient(ctx, ws, t, w, x);
  const auto second = phi_second_order(ctx, ws, t, w, x, branch, true);
  const Matrix& hess = second.ww;
  const double lam = min_eigenvalue_symmetric(hess);
  if (lam < ws.convexity_floor) {
    std::ostringstream os;
    os << "Phi_ww min eigenvalue " << lam << " below floor " << ws.convexity_floor
       << " (s=" << ws.s << ", t=" << t << ")";
    throw ConvexityError(lam, os.str());
  }
  const Matrix& cross = second.wx;  // c x n
  const Vector& dt_grad = second.wt;

  const Vector fx = ctx.system.f(x);
  const Matrix gx = ctx.system.g(x);
  Matrix rhs(w.size(), 1 + gx.cols());
  rhs.col(0) = ws.P * g0 + cross * fx + dt_grad;
  rhs.rightCols(gx.cols()) = cross * gx;
  const Matrix sol = solve_linear(hess, rhs);
  MuNu out;
  out.mu = -sol.col(0);
  out.nu = -sol.rightCols(gx.cols());
  out.min_eig = lam;
  return out;
}

MuNu compute_mu_nu_escalating(const AdaptationContext& ctx, WeightState& ws, double t,
                              const Vector& w, const Vector& x) {
  for (int attempt = 0;; ++attempt) {
    try {
      return compute_mu_nu(ctx, ws, t, w, x);
    } catch (const ConvexityError&) {
      if (attempt >= kMaxBarrierDoublings) throw;
      ws.s *= 2.0;
    }
  }
}

WeightState step_weights(const WeightState& ws, const WeightRate& rate,
                         const std::function<bool(double, const Vector&)>& interior,
                         double t, double dt) {
  WeightState out = ws;
  try {
    out.w = rk4_step_interior(rate, t, ws.w, dt, interior);
  } catch (const LeftFeasibleRegion& e) {
    throw AdaptationFailure(std::string("weight step failed: ") + e.what());
  }
  return out;
}

WeightState step_weights(const WeightState& ws, const Vector& mu, const Matrix& nu,
                         const Vector& u, double dt) {
  const Vector rate = mu + nu * u;
  auto field = [rate](double, const Vector&) { return rate; };
  auto interior = [&ws](double, const Vector& w) {
    return (eval_bound_constraints(ws, w).array() < 0.0).all();
  };
  return step_weights(ws, field, interior, 0.0, dt);
}

WeightState update_filters(const WeightState& ws, const Vector& mu, const Matrix& nu,
                           double dt) {
  const double blend = 1.0 - std::exp(-dt / ws.tau);
  WeightState out = ws;
  out.mu_f = ws.mu_f + blend * (mu - ws.mu_f);
  out.nu_f = ws.nu_f + blend * (nu - ws.nu_f);
  return out;
}

WeightState prime_filters(const AdaptationContext& ctx, const WeightState& ws, double t,
                          const Vector& x, double relaxation, int max_iterations) {
  WeightState out = ws;
  for (int k = 0; k < max_iterations; ++k) {
    MuNu mn;
    try {
      mn = compute_mu_nu(ctx, out, t, out.w, x);
    } catch (const Error&) {
      break;
    }
    WeightState next = out;
    next.mu_f = out.mu_f + relaxation * (mn.mu - out.mu_f);
    next.nu_f = out.nu_f + relaxation * (mn.nu - out.nu_f);
    if (!(eval_feasibility(ctx, next, t, next.w, x).array() < 0.0).all()) break;
    const double change =
        (next.mu_f - out.mu_f).lpNorm<Eigen::Infinity>() +
        (next.nu_f - out.nu_f).lpNorm<Eigen::Infinity>();
    out = next;
    if (change < 1e-10) break;
  }
  return out;
}

FilterMargins monitor_filter_margins(const CcbfDerivatives& deriv, const WeightState& ws,
                                     const Vector& mu, const Matrix& nu,
                                     const Vector& u_max) {
  FilterMargins out;
  out.lhs_mu = deriv.dH_dw.dot(ws.mu_f - mu);
  const Vector hg = deriv.dH_dx_g();
  const Vector with_filtered = hg + ws.nu_f.transpose() * deriv.dH_dw;
  const Vector with_true = hg + nu.transpose() * deriv.dH_dw;
  out.lhs_nu = with_filtered.cwiseAbs().dot(u_max) - with_true.cwiseAbs().dot(u_max);
  out.ok = out.lhs_mu >= -ws.eta_mu && out.lhs_nu >= -ws.eta_nu;
  return out;
}

namespace {

bool strictly_feasible(const Vector& b) { return (b.array() < 0.0).all(); }

}  // namespace

Vector initialize_weights(const Vector& w_guess, const AdaptationContext& ctx,
                          const WeightState& ws, double t, const Vector& x,
                          const InitializationOptions& opts) {
  if (!strictly_feasible(eval_bound_constraints(ws, w_guess))) {
    throw InitializationError("initial weight guess must lie strictly inside (w_min, w_max)");
  }
  const auto c = w_guess.size();
  if (strictly_feasible(eval_feasibility(ctx, ws, t, w_guess, x))) return w_guess;

  // Phase 1: bounds-only barrier, objective b_{2c+1}. The flow follows the
  // normalized descent direction of the relaxed barrier so that its speed is
  // set by P alone.
  auto b_last = [&](const Vector& w) {
    return eval_feasibility(ctx, ws, t, w, x)[2 * c];
  };
  auto relaxed_gradient = [&](const Vector& w) -> Vector {
    const Vector bounds = eval_bound_constraints(ws, w);
    Vector g = finite_diff_gradient(b_last, w, kGradientEps);
    for (Eigen::Index k = 0; k < c; ++k) {
      g[k] -= (-1.0 / bounds[k] + 1.0 / bounds[c + k]) / ws.s;
    }
    return g;
  };
  auto descent = [&](double, const Vector& w) -> Vector {
    const Vector g = relaxed_gradient(w);
    const double norm = g.norm();
    if (norm == 0.0) return Vector::Zero(c);
    return -(ws.P * g) / norm;
  };
  auto bounds_interior = [&](double, const Vector& w) {
    return strictly_feasible(eval_bound_constraints(ws, w));
  };

  Vector w = w_guess;
  double elapsed = 0.0;
  try {
    while (b_last(w) >= -opts.feasibility_margin) {
      if (elapsed >= opts.horizon) {
        std::ostringstream os;
        os << "no strictly feasible weights found within " << opts.horizon
           << " s of correction (b_ccbf = " << b_last(w) << ")";
        throw InitializationError(os.str());
      }
      w = rk4_step_interior(descent, elapsed, w, opts.dt, bounds_interior);
      elapsed += opts.dt;
    }
  } catch (const LeftFeasibleRegion& e) {
    throw InitializationError(std::string("weight initialization left the bounds: ") + e.what());
  }

  // Phase 2: correction term on the full barrier for the remaining horizon.
  AdaptationContext full = ctx;
  full.objective = WeightObjective::proximal(w_guess);
  WeightState probe = ws;
  probe.w = w;
  BarrierProblem prob = assemble_phi(full, probe, x);
  try {
    const double rest = std::max(0.0, opts.horizon - elapsed);
    w = with_barrier_escalation(prob, [&](BarrierProblem& p) {
      return correct_to_interior(p, t, w, rest, opts.dt);
    });
  } catch (const Error& e) {
    throw InitializationError(std::string("weight initialization failed: ") + e.what());
  }
  if (!strictly_feasible(eval_feasibility(ctx, ws, t, w, x))) {
    throw InitializationError("weight initialization ended outside the feasible region");
  }
  return w;
}

}  // namespace ccbf

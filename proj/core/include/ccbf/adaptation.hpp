#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ccbf/model.hpp"
#include "ccbf/numerics.hpp"
#include "ccbf/pcipm.hpp"

namespace ccbf {

// Adapted weights and everything the adaptation law carries between steps.
struct WeightState {
  Vector w;
  double w_min = 0.01;
  double w_max = 50.0;
  double s = 1e3;                  // barrier parameter
  Matrix P;                        // c x c gain
  Vector mu_f;                     // filtered drift term, c
  Matrix nu_f;                     // filtered input term, c x m
  double eta_mu = 0.05;
  double eta_nu = 0.05;
  double tau = 0.05;               // filter time constant [s]
  double convexity_floor = 1e-3;

  std::size_t size() const { return static_cast<std::size_t>(w.size()); }
  void validate() const;
};

// Convex objective on the weights, J(t, w, x), with its w-gradient.
struct WeightObjective {
  std::function<double(double, const Vector&, const Vector&)> value;
  std::function<Vector(double, const Vector&, const Vector&)> gradient;

  // 0.5 |w - w_ref|^2
  static WeightObjective proximal(Vector w_ref);
};

// Fixed ingredients of the weight barrier: constraints, kernel, dynamics and
// the class-K function used in the C-CBF condition.
struct AdaptationContext {
  PhiKernel kernel = PhiKernel::exponential();
  std::vector<ConstraintSpec> constraints;
  ControlAffineSystem system;
  ClassK alpha;
  WeightObjective objective;
};

// First c entries w_min - w_j, next c entries w_j - w_max.
Vector eval_bound_constraints(const WeightState& ws);
Vector eval_bound_constraints(const WeightState& ws, const Vector& w);

// delta = eta_mu + eta_nu - dH/dt - dH/dx f - dH/dw mu_f - alpha(H)
double eval_delta(const CcbfDerivatives& deriv, const WeightState& ws, const ClassK& alpha);

// q = L_g^T p_h + nu_f^T p_w
Vector eval_q(const CcbfDerivatives& deriv, const WeightState& ws);

// delta - |q|^T u_max
double eval_b_ccbf(double delta, const Vector& q, const Vector& u_max);

// All 2c+1 feasibility constraints b_j(t, w, x) (feasible when <= 0).
Vector eval_feasibility(const AdaptationContext& ctx, const WeightState& ws,
                        double t, const Vector& w, const Vector& x);

// Weight barrier
//   Phi(t,w,x) = J(t,w,x) - (1/s) sum_j log(-b_j(t,w,x))
// with the filter states of `ws` held constant. The value throws
// LeftFeasibleRegion outside the strict interior.
double phi_value(const AdaptationContext& ctx, const WeightState& ws, double t,
                 const Vector& w, const Vector& x);

// Analytic grad_w Phi, built from the kernel's second partials.
Vector phi_gradient(const AdaptationContext& ctx, const WeightState& ws, double t,
                    const Vector& w, const Vector& x);

// grad_ww Phi. The curvature of b_{2c+1} is differenced on the smooth piece
// selected by sign(q) at w, so the kink of |q| does not show up as spurious
// curvature.
Matrix phi_hessian(const AdaptationContext& ctx, const WeightState& ws, double t,
                   const Vector& w, const Vector& x);

// Phi at fixed x as a generic barrier problem over w (gain ws.P, barrier ws.s).
// The returned problem refers to `ctx`, which must outlive it.
BarrierProblem assemble_phi(const AdaptationContext& ctx, const WeightState& ws,
                            const Vector& x);

struct MuNu {
  Vector mu;        // c
  Matrix nu;        // c x m
  double min_eig = 0.0;
};

// mu = -Phi_ww^-1 (P Phi_w + Phi_wx f + Phi_wt),  nu = -Phi_ww^-1 Phi_wx g.
// The barrier part of the second derivatives is assembled from constraint
// derivatives; only b_{2c+1} and J are differenced.
// Throws ConvexityError when min eig(Phi_ww) < ws.convexity_floor.
MuNu compute_mu_nu(const AdaptationContext& ctx, const WeightState& ws, double t,
                   const Vector& w, const Vector& x);

// compute_mu_nu with barrier escalation: ws.s doubles (at most
// kMaxBarrierDoublings times) until the convexity floor holds.
MuNu compute_mu_nu_escalating(const AdaptationContext& ctx, WeightState& ws, double t,
                              const Vector& w, const Vector& x);

// dw/dt given (t, w); used to refresh mu and nu at RK4 stages.
using WeightRate = std::function<Vector(double, const Vector&)>;

// Integrates w' = rate(t, w) over dt with step halving so that every stage
// stays strictly inside W. Throws AdaptationFailure when maximal halving is
// not enough.
WeightState step_weights(const WeightState& ws, const WeightRate& rate,
                         const std::function<bool(double, const Vector&)>& interior,
                         double t, double dt);

// Constant-field convenience: w' = mu + nu u, interior = strict weight bounds.
WeightState step_weights(const WeightState& ws, const Vector& mu, const Matrix& nu,
                         const Vector& u, double dt);

// Exponential-Euler first-order low-pass update of mu_f and nu_f.
WeightState update_filters(const WeightState& ws, const Vector& mu, const Matrix& nu,
                           double dt);

// Starts the filters on the true signals by relaxing
//   mu_f <- mu_f + r (mu - mu_f),  nu_f <- nu_f + r (nu - nu_f)
// at frozen (t, w, x) until the update stalls. Iterates that would leave the
// feasible region are rejected and the last feasible filter state is kept.
WeightState prime_filters(const AdaptationContext& ctx, const WeightState& ws, double t,
                          const Vector& x, double relaxation = 0.5,
                          int max_iterations = 200);

struct FilterMargins {
  double lhs_mu = 0.0;
  double lhs_nu = 0.0;
  bool ok = true;
};

FilterMargins monitor_filter_margins(const CcbfDerivatives& deriv, const WeightState& ws,
                                     const Vector& mu, const Matrix& nu,
                                     const Vector& u_max);

struct InitializationOptions {
  double horizon = 10.0;
  double dt = 0.01;
  // b_{2c+1} must reach this value before the full barrier takes over.
  double feasibility_margin = 1e-6;
};

// Returns a strictly feasible weight vector at (t, x). A guess that is
// already strictly feasible is returned unchanged; otherwise the correction
// term is run first on a bounds-only problem that drives b_{2c+1} down, then
// on the full barrier. Throws InitializationError on failure.
Vector initialize_weights(const Vector& w_guess, const AdaptationContext& ctx,
                          const WeightState& ws, double t, const Vector& x,
                          const InitializationOptions& opts = {});

}  // namespace ccbf

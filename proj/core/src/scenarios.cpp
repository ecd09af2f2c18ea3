#include "ccbf/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "ccbf/errors.hpp"

namespace ccbf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

WeightState make_weights(std::size_t c, std::size_t m, double w_min, double w_max, double s,
                         double p_gain, double eta_mu, double eta_nu, double tau) {
  const auto ci = static_cast<Eigen::Index>(c);
  WeightState ws;
  ws.w_min = w_min;
  ws.w_max = w_max;
  ws.s = s;
  ws.P = p_gain * Matrix::Identity(ci, ci);
  ws.mu_f = Vector::Zero(ci);
  ws.nu_f = Matrix::Zero(ci, static_cast<Eigen::Index>(m));
  ws.eta_mu = eta_mu;
  ws.eta_nu = eta_nu;
  ws.tau = tau;
  return ws;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

struct PathPoint {
  double x = 0.0;
  double y = 0.0;
};

// Polyline with cumulative arc length.
class Path {
 public:
  explicit Path(std::vector<PathPoint> pts) : pts_(std::move(pts)), arc_(pts_.size(), 0.0) {
    for (std::size_t k = 1; k < pts_.size(); ++k) {
      arc_[k] = arc_[k - 1] + std::hypot(pts_[k].x - pts_[k - 1].x, pts_[k].y - pts_[k - 1].y);
    }
  }

  double length() const { return arc_.back(); }

  // Arc length of the closest point on the polyline.
  double project(double x, double y) const {
    double best = std::numeric_limits<double>::infinity();
    double best_arc = 0.0;
    for (std::size_t k = 1; k < pts_.size(); ++k) {
      const double ex = pts_[k].x - pts_[k - 1].x;
      const double ey = pts_[k].y - pts_[k - 1].y;
      const double len2 = ex * ex + ey * ey;
      double lam = len2 > 0.0 ? ((x - pts_[k - 1].x) * ex + (y - pts_[k - 1].y) * ey) / len2 : 0.0;
      lam = std::clamp(lam, 0.0, 1.0);
      const double d = std::hypot(pts_[k - 1].x + lam * ex - x, pts_[k - 1].y + lam * ey - y);
      if (d < best) {
        best = d;
        best_arc = arc_[k - 1] + lam * (arc_[k] - arc_[k - 1]);
      }
    }
    return best_arc;
  }

  PathPoint at(double arc) const {
    if (arc >= length()) return pts_.back();
    std::size_t k = 1;
    while (k + 1 < pts_.size() && arc_[k] < arc) ++k;
    const double span = arc_[k] - arc_[k - 1];
    const double lam = span > 0.0 ? (arc - arc_[k - 1]) / span : 1.0;
    return {pts_[k - 1].x + lam * (pts_[k].x - pts_[k - 1].x),
            pts_[k - 1].y + lam * (pts_[k].y - pts_[k - 1].y)};
  }

 private:
  std::vector<PathPoint> pts_;
  std::vector<double> arc_;
};

}  // namespace

std::size_t Scenario::steps() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

void Scenario::validate() const {
  system.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractViolation("scenario: dt must be > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ContractViolation("scenario: horizon must be > 0");
  }
  if (constraints.empty()) throw ContractViolation("scenario: needs at least one constraint");
  if (static_cast<std::size_t>(x0.size()) != system.n) {
    throw ContractViolation("scenario: x0 length != n");
  }
  if (w_guess.size() != static_cast<Eigen::Index>(constraints.size())) {
    throw ContractViolation("scenario: w_guess length != constraint count");
  }
  if (!nominal || !alpha.value || !alpha.derivative) {
    throw ContractViolation("scenario: nominal controller and alpha must be set");
  }
  WeightState ws = weights;
  ws.w = w_guess;
  ws.validate();
  if (!((w_guess.array() > ws.w_min).all() && (w_guess.array() < ws.w_max).all())) {
    throw ContractViolation("scenario: w_guess must lie strictly inside (w_min, w_max)");
  }
}

Scenario build_scenario_1d(const Params1d& p) {
  if (!(p.gamma > 0.0)) throw ContractViolation("1d scenario: gamma must be > 0");
  const double k = std::log(2.0) / (kWellBoundary * kWellBoundary);

  Scenario sc;
  sc.id = "1d";
  std::ostringstream label;
  label << "1d gamma=" << p.gamma << " theta=" << p.theta;
  sc.label = label.str();
  sc.system.n = 1;
  sc.system.m = 1;
  sc.system.f = [k](const Vector& x) {
    Vector out(1);
    out[0] = x[0] * (std::exp(k * x[0] * x[0]) - 1.0);
    return out;
  };
  sc.system.g = [](const Vector& x) {
    Matrix out(1, 1);
    out(0, 0) = 4.0 - x[0] * x[0];
    return out;
  };
  sc.system.u_max = Vector::Ones(1);

  auto zero_dt = [](double, const Vector&) { return 0.0; };
  auto zero_hess = [](double, const Vector&) { return Matrix::Zero(1, 1).eval(); };
  sc.constraints.push_back(
      {"h1", [](double, const Vector& x) { return 2.0 - x[0]; }, zero_dt,
       [](double, const Vector&) { return Vector::Constant(1, -1.0).eval(); }, zero_hess, 1});
  sc.constraints.push_back(
      {"h2", [](double, const Vector& x) { return x[0] + 2.0; }, zero_dt,
       [](double, const Vector&) { return Vector::Constant(1, 1.0).eval(); }, zero_hess, 1});

  sc.alpha = ClassK::cubic(p.gamma);
  const double kp = p.k_p;
  const double theta = p.theta;
  sc.nominal = [kp, theta](double t, const Vector& x) {
    const double target = 4.0 * std::sin(2.0 * std::numbers::pi * t / 5.0 + theta);
    return Vector::Constant(1, kp * (target - x[0])).eval();
  };
  sc.x0 = Vector::Constant(1, p.x0);
  sc.w_guess = Vector::Constant(2, p.w_guess);
  sc.weights = make_weights(2, 1, p.w_min, p.w_max, p.s, p.p_gain, p.eta_mu, p.eta_nu, p.tau);
  sc.flow.B = 100.0 * Matrix::Identity(1, 1);
  sc.flow.s = p.s;
  sc.horizon = p.horizon;
  sc.dt = p.dt;
  return sc;
}

Scenario build_scenario_bicycle(const BicycleParams& p) {
  if (!(p.lr > 0.0)) throw ContractViolation("bicycle scenario: l_r must be > 0");
  if (!(p.reach_time > 0.0)) throw ContractViolation("bicycle scenario: T must be > 0");
  for (const auto& ob : p.obstacles) {
    if (!(ob.r > 0.0)) throw ContractViolation("bicycle scenario: obstacle radius must be > 0");
  }
  if (!(p.lookahead > 0.0)) throw ContractViolation("bicycle scenario: lookahead must be > 0");
  Scenario sc;
  sc.id = "bicycle";
  sc.label = "bicycle reach-avoid";
  const double lr = p.lr;
  sc.system.n = 5;
  sc.system.m = 2;
  sc.system.f = [lr](const Vector& z) {
    const double psi = z[2];
    const double tb = std::tan(z[3]);
    const double v = z[4];
    Vector out(5);
    out << v * (std::cos(psi) - std::sin(psi) * tb), v * (std::sin(psi) + std::cos(psi) * tb),
        v / lr * tb, 0.0, 0.0;
    return out;
  };
  sc.system.g = [](const Vector&) {
    Matrix out = Matrix::Zero(5, 2);
    out(3, 0) = 1.0;
    out(4, 1) = 1.0;
    return out;
  };
  sc.system.u_max = Vector(2);
  sc.system.u_max << p.omega_max, p.accel_max;

  auto zero_dt = [](double, const Vector&) { return 0.0; };
  int index = 1;
  for (const auto& ob : p.obstacles) {
    const double cx = ob.cx;
    const double cy = ob.cy;
    const double r2 = ob.r * ob.r;
    ConstraintSpec spec;
    spec.name = "h" + std::to_string(index++);
    spec.h = [=](double, const Vector& z) {
      return (z[0] - cx) * (z[0] - cx) + (z[1] - cy) * (z[1] - cy) - r2;
    };
    spec.dh_dt = zero_dt;
    spec.grad_x = [=](double, const Vector& z) {
      Vector g = Vector::Zero(5);
      g[0] = 2.0 * (z[0] - cx);
      g[1] = 2.0 * (z[1] - cy);
      return g;
    };
    spec.hess_xx = [](double, const Vector&) {
      Matrix h = Matrix::Zero(5, 5);
      h(0, 0) = 2.0;
      h(1, 1) = 2.0;
      return h;
    };
    spec.relative_degree = 2;
    sc.constraints.push_back(std::move(spec));
  }

  const double S = p.speed_limit;
  ConstraintSpec speed;
  speed.name = "h" + std::to_string(index++);
  speed.h = [S](double, const Vector& z) { return S * S - z[4] * z[4]; };
  speed.dh_dt = zero_dt;
  speed.grad_x = [](double, const Vector& z) {
    Vector g = Vector::Zero(5);
    g[4] = -2.0 * z[4];
    return g;
  };
  speed.hess_xx = [](double, const Vector&) {
    Matrix h = Matrix::Zero(5, 5);
    h(4, 4) = -2.0;
    return h;
  };
  sc.constraints.push_back(std::move(speed));

  const double B = p.slip_limit;
  ConstraintSpec slip;
  slip.name = "h" + std::to_string(index++);
  slip.h = [B](double, const Vector& z) { return B * B - z[3] * z[3]; };
  slip.dh_dt = zero_dt;
  slip.grad_x = [](double, const Vector& z) {
    Vector g = Vector::Zero(5);
    g[3] = -2.0 * z[3];
    return g;
  };
  slip.hess_xx = [](double, const Vector&) {
    Matrix h = Matrix::Zero(5, 5);
    h(3, 3) = -2.0;
    return h;
  };
  sc.constraints.push_back(std::move(slip));

  const double gx = p.goal_x;
  const double gy = p.goal_y;
  const double rg2 = p.goal_radius * p.goal_radius;
  const double ri2 = p.shrink_radius * p.shrink_radius;
  const double T = p.reach_time;
  ConstraintSpec reach;
  reach.name = "h" + std::to_string(index++);
  reach.h = [=](double t, const Vector& z) {
    const double shrink = 1.0 - t / T;
    return rg2 + ri2 * shrink * shrink - (z[0] - gx) * (z[0] - gx) - (z[1] - gy) * (z[1] - gy);
  };
  reach.dh_dt = [=](double t, const Vector&) { return -2.0 * ri2 * (1.0 - t / T) / T; };
  reach.grad_x = [=](double, const Vector& z) {
    Vector g = Vector::Zero(5);
    g[0] = -2.0 * (z[0] - gx);
    g[1] = -2.0 * (z[1] - gy);
    return g;
  };
  reach.hess_xx = [](double, const Vector&) {
    Matrix h = Matrix::Zero(5, 5);
    h(0, 0) = -2.0;
    h(1, 1) = -2.0;
    return h;
  };
  reach.relative_degree = 2;
  sc.constraints.push_back(std::move(reach));

  sc.alpha = ClassK::linear(1.0);
  const double k_heading = p.k_heading;
  const double k_slip = p.k_slip;
  const double k_speed = p.k_speed;
  const double slip_cap = 0.9 * B;
  const double dt = p.dt;
  std::vector<PathPoint> pts{{p.x0, p.y0}};
  for (const auto& wp : p.waypoints) pts.push_back({wp[0], wp[1]});
  pts.push_back({gx, gy});
  const Path path(std::move(pts));
  const double lookahead = p.lookahead;
  const double arrival_margin = p.arrival_margin;
  const double brake_gain = p.brake_gain;
  sc.nominal = [=](double t, const Vector& z) {
    const double along = path.project(z[0], z[1]);
    const PathPoint target = path.at(along + lookahead);
    const double dx = target.x - z[0];
    const double dy = target.y - z[1];
    const double remaining = std::max(path.length() - along, std::hypot(gx - z[0], gy - z[1]));
    const double heading_err = wrap_angle(std::atan2(dy, dx) - z[2]);
    const double v_eff = std::max(z[4], 0.1);
    const double beta_des =
        std::clamp(std::atan(lr * k_heading * heading_err / v_eff), -slip_cap, slip_cap);
    const double v_des = std::min({S, remaining / std::max(T - arrival_margin - t, dt),
                                    brake_gain * std::hypot(gx - z[0], gy - z[1])});
    Vector u(2);
    u << k_slip * (beta_des - z[3]), k_speed * (v_des - z[4]);
    return u;
  };

  sc.x0 = Vector(5);
  sc.x0 << p.x0, p.y0, std::atan2(gy - p.y0, gx - p.x0), p.beta0, p.v0;
  sc.w_guess = Vector::Constant(static_cast<Eigen::Index>(sc.constraints.size()), p.w_guess);
  sc.weights = make_weights(sc.constraints.size(), 2, p.w_min, p.w_max, p.s, p.p_gain,
                            p.eta_mu, p.eta_nu, p.tau);
  sc.flow.B = 100.0 * Matrix::Identity(2, 2);
  sc.flow.s = p.s;
  sc.horizon = p.horizon;
  sc.dt = p.dt;
  Vector goal(2);
  goal << gx, gy;
  sc.goal = goal;
  sc.goal_radius = p.goal_radius;
  return sc;
}

std::string ControllerSpec::id() const {
  switch (kind) {
    case ControllerKind::kCcbfQp:
      return "ccbf-qp";
    case ControllerKind::kCcbfFlow:
      return "ccbf-flow";
    case ControllerKind::kNominalOnly:
      return "nominal-only";
    case ControllerKind::kEcbfQp: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "ecbf-qp(%g,%g)", gains.k1, gains.k2);
      return buf;
    }
  }
  return "unknown";
}

ControllerSpec parse_controller(const std::string& text) {
  ControllerSpec spec;
  if (text == "ccbf-qp") return spec;
  if (text == "ccbf-flow") {
    spec.kind = ControllerKind::kCcbfFlow;
    return spec;
  }
  if (text == "nominal-only") {
    spec.kind = ControllerKind::kNominalOnly;
    return spec;
  }
  if (text.rfind("ecbf-qp", 0) == 0) {
    spec.kind = ControllerKind::kEcbfQp;
    const std::string rest = text.substr(7);
    if (rest.empty()) return spec;
    double k1 = 0.0;
    double k2 = 0.0;
    char close = 0;
    if (std::sscanf(rest.c_str(), "(%lf,%lf%c", &k1, &k2, &close) == 3 && close == ')' &&
        k1 > 0.0 && k2 > 0.0) {
      spec.gains = {k1, k2};
      return spec;
    }
  }
  throw ContractViolation("unknown controller '" + text +
                          "' (expected ccbf-qp, ccbf-flow, nominal-only or ecbf-qp(k1,k2))");
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kCompleted:
      return "completed";
    case Outcome::kControllerInfeasible:
      return "controller-infeasible";
    case Outcome::kAdaptationFailed:
      return "adaptation-failed";
    case Outcome::kDiverged:
      return "diverged";
  }
  return "unknown";
}

std::string SimLog::outcome_label() const {
  if (outcome == Outcome::kCompleted) return to_string(outcome);
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%.2f", outcome_time);
  return to_string(outcome) + buf;
}

namespace {

class Runner {
 public:
  Runner(const Scenario& sc, const ControllerSpec& ctrl, std::uint64_t seed)
      : sc_(sc), ctrl_(ctrl) {
    log_.scenario_id = sc.id;
    log_.controller_id = ctrl.id();
    log_.seed = seed;
    log_.outcome_time = kNaN;
  }

  SimLog run() {
    if (ctrl_.kind == ControllerKind::kCcbfQp || ctrl_.kind == ControllerKind::kCcbfFlow) {
      run_adaptive();
    } else {
      run_static();
    }
    return std::move(log_);
  }

 private:
  void mark(Outcome outcome, double t, const std::string& message) {
    if (log_.outcome != Outcome::kCompleted) return;
    log_.outcome = outcome;
    log_.outcome_time = t;
    log_.message = message;
  }

  Vector clip(const Vector& u) const {
    return u.cwiseMax(-sc_.system.u_max).cwiseMin(sc_.system.u_max);
  }

  // Advances x alone; false when the state blew up.
  bool advance_state(double t, Vector& x, const Vector& u) {
    auto field = [&](double, const Vector& z) { return sc_.system.dynamics(z, u); };
    try {
      x = rk4_step(field, t, x, sc_.dt);
    } catch (const Error& e) {
      mark(Outcome::kDiverged, t, e.what());
      return false;
    }
    if (!all_finite(x) || x.cwiseAbs().maxCoeff() > 1e6) {
      mark(Outcome::kDiverged, t, "state left every bounded region");
      return false;
    }
    return true;
  }

  void run_static() {
    const auto steps = sc_.steps();
    const std::vector<EcbfGains> gains(sc_.constraints.size(), ctrl_.gains);
    Vector x = sc_.x0;
    log_.final_s = kNaN;
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * sc_.dt;
      const Vector u_nom = sc_.nominal(t, x);
      ControlDecision dec;
      if (ctrl_.kind == ControllerKind::kEcbfQp) {
        dec = ecbf_qp(sc_.constraints, gains, sc_.system, sc_.alpha, t, x, u_nom);
        if (!dec.feasible) {
          std::string rows;
          for (const auto& r : dec.conflict) rows += (rows.empty() ? "" : ",") + r;
          mark(Outcome::kControllerInfeasible, t, "E-CBF QP infeasible, conflicting rows: " + rows);
        }
      } else {
        dec.u = clip(u_nom);
      }
      SimRecord rec;
      rec.t = t;
      rec.x = x;
      rec.u = dec.u;
      rec.w = sc_.w_guess;
      rec.H = ccbf_value(sc_.kernel, sc_.constraints, t, sc_.w_guess, x);
      rec.b_ccbf = kNaN;
      rec.h = constraint_values(sc_.constraints, t, x);
      rec.feasible = dec.feasible;
      rec.eta_mu_margin = kNaN;
      rec.eta_nu_margin = kNaN;
      rec.min_eig = kNaN;
      log_.records.push_back(std::move(rec));
      if (k == steps) break;
      if (!advance_state(t, x, dec.u)) break;
    }
  }

  void run_adaptive() {
    const auto steps = sc_.steps();
    AdaptationContext ctx;
    ctx.kernel = sc_.kernel;
    ctx.constraints = sc_.constraints;
    ctx.system = sc_.system;
    ctx.alpha = sc_.alpha;

    WeightState ws = sc_.weights;
    ws.w = sc_.w_guess;
    Vector x = sc_.x0;
    try {
      ctx.objective = WeightObjective::proximal(sc_.w_guess);
      ws.w = initialize_weights(sc_.w_guess, ctx, ws, 0.0, x, sc_.init);
    } catch (const Error& e) {
      mark(Outcome::kAdaptationFailed, 0.0, e.what());
      return;
    }
    ctx.objective = WeightObjective::proximal(ws.w);
    ws = prime_filters(ctx, ws, 0.0, x);

    const auto m = static_cast<Eigen::Index>(sc_.system.m);
    Vector u_flow;
    RowSample prev_sample;

    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * sc_.dt;
      CcbfDerivatives deriv;
      MuNu mn;
      try {
        deriv = ccbf_derivatives(ctx.kernel, ctx.constraints, ctx.system, t, ws.w, x);
        mn = compute_mu_nu_escalating(ctx, ws, t, ws.w, x);
      } catch (const Error& e) {
        mark(Outcome::kAdaptationFailed, t, e.what());
        return;
      }
      const Vector u_nom = sc_.nominal(t, x);
      ControlDecision dec = ccbf_qp(deriv, mn.mu, mn.nu, ctx.system, ctx.alpha, u_nom);
      if (ctrl_.kind == ControllerKind::kCcbfFlow) {
        const RowSample sample{t, ccbf_condition_row(deriv, mn.mu, mn.nu, ctx.alpha), u_nom};
        std::optional<Vector> next;
        if (k > 0) {
          try {
            next = omega_flow_control(u_flow, prev_sample, sample, ctx.system.u_max, sc_.flow).u;
          } catch (const Error&) {
            ++log_.flow_restarts;
          }
        }
        // Start, or restart after the flow lost the interior, from the QP
        // solution nudged into U_H.
        if (!next && dec.feasible) next = interior_start(dec.u, sample.row, ctx.system.u_max);
        if (next) {
          u_flow = *next;
          dec.u = u_flow;
          dec.margin = sample.row.offset + sample.row.gain.dot(u_flow);
          dec.feasible = true;
        } else {
          dec.feasible = false;
          if (u_flow.size() != m) u_flow = dec.u;
        }
        prev_sample = sample;
      }
      if (!dec.feasible) mark(Outcome::kControllerInfeasible, t, "C-CBF controller infeasible");

      const auto margins = monitor_filter_margins(deriv, ws, mn.mu, mn.nu, ctx.system.u_max);
      SimRecord rec;
      rec.t = t;
      rec.x = x;
      rec.u = dec.u;
      rec.w = ws.w;
      rec.H = deriv.H;
      rec.b_ccbf = eval_b_ccbf(eval_delta(deriv, ws, ctx.alpha), eval_q(deriv, ws),
                               ctx.system.u_max);
      rec.h = deriv.h;
      rec.feasible = dec.feasible;
      rec.eta_mu_margin = margins.lhs_mu;
      rec.eta_nu_margin = margins.lhs_nu;
      rec.min_eig = mn.min_eig;
      log_.records.push_back(std::move(rec));
      log_.final_s = ws.s;
      if (k == steps) break;

      if (!advance_joint(ctx, ws, t, x, dec.u)) return;
      ws = update_filters(ws, mn.mu, mn.nu, sc_.dt);
    }
  }

  // One RK4 step of (x, w) with mu and nu refreshed at every stage.
  bool advance_joint(const AdaptationContext& ctx, WeightState& ws, double t, Vector& x,
                     const Vector& u) {
    const auto n = static_cast<Eigen::Index>(sc_.system.n);
    const auto c = ws.w.size();
    auto field = [&](double tau, const Vector& y) -> Vector {
      const Vector xs = y.head(n);
      const Vector w = y.tail(c);
      WeightState probe = ws;
      const MuNu mn = compute_mu_nu_escalating(ctx, probe, tau, w, xs);
      Vector out(n + c);
      out.head(n) = sc_.system.dynamics(xs, u);
      out.tail(c) = mn.mu + mn.nu * u;
      return out;
    };
    auto interior = [&](double tau, const Vector& y) {
      if (!all_finite(y)) return false;
      const Vector b = eval_feasibility(ctx, ws, tau, y.tail(c), y.head(n));
      return (b.array() < 0.0).all();
    };
    Vector y(n + c);
    y << x, ws.w;
    try {
      y = rk4_step_interior(field, t, y, sc_.dt, interior);
    } catch (const Error& e) {
      mark(Outcome::kAdaptationFailed, t, std::string("joint step failed: ") + e.what());
      return false;
    }
    x = y.head(n);
    ws.w = y.tail(c);
    return true;
  }

  const Scenario& sc_;
  const ControllerSpec& ctrl_;
  SimLog log_;
};

}  // namespace

SimLog run_simulation(const Scenario& scenario, const ControllerSpec& controller,
                      std::uint64_t seed) {
  scenario.validate();
  return Runner(scenario, controller, seed).run();
}

Metrics compute_metrics(const SimLog& log, const Scenario& scenario) {
  Metrics m;
  const auto c = static_cast<Eigen::Index>(scenario.constraints.size());
  m.min_h = Vector::Constant(c, std::numeric_limits<double>::infinity());
  m.min_H = std::numeric_limits<double>::infinity();
  m.max_b_ccbf = -std::numeric_limits<double>::infinity();
  m.goal_distance = kNaN;
  m.first_infeasible_time = kNaN;
  m.min_eta_mu_margin = std::numeric_limits<double>::infinity();
  m.min_eta_nu_margin = std::numeric_limits<double>::infinity();
  m.min_eig = std::numeric_limits<double>::infinity();
  m.w_lowest = std::numeric_limits<double>::infinity();
  m.w_highest = -std::numeric_limits<double>::infinity();
  if (log.records.empty()) return m;

  std::size_t feasible = 0;
  const SimRecord* prev = nullptr;
  for (const auto& r : log.records) {
    m.min_h = m.min_h.cwiseMin(r.h);
    m.min_H = std::min(m.min_H, r.H);
    if (!std::isnan(r.b_ccbf)) m.max_b_ccbf = std::max(m.max_b_ccbf, r.b_ccbf);
    if (r.feasible) {
      ++feasible;
    } else if (std::isnan(m.first_infeasible_time)) {
      m.first_infeasible_time = r.t;
    }
    m.max_abs_x0 = std::max(m.max_abs_x0, std::abs(r.x[0]));
    m.max_abs_u = std::max(m.max_abs_u, r.u.cwiseAbs().maxCoeff());
    if (!std::isnan(r.eta_mu_margin)) m.min_eta_mu_margin = std::min(m.min_eta_mu_margin, r.eta_mu_margin);
    if (!std::isnan(r.eta_nu_margin)) m.min_eta_nu_margin = std::min(m.min_eta_nu_margin, r.eta_nu_margin);
    if (!std::isnan(r.min_eig)) m.min_eig = std::min(m.min_eig, r.min_eig);
    m.w_lowest = std::min(m.w_lowest, r.w.minCoeff());
    m.w_highest = std::max(m.w_highest, r.w.maxCoeff());
    if (prev) m.total_variation_u += (r.u - prev->u).lpNorm<1>();
    prev = &r;
  }
  m.feasible_fraction = static_cast<double>(feasible) / static_cast<double>(log.records.size());
  if (scenario.goal) {
    const auto& last = log.records.back();
    m.goal_distance = (last.x.head(2) - *scenario.goal).norm();
  }
  return m;
}

}  // namespace ccbf

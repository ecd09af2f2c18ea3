#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccbf/adaptation.hpp"
#include "ccbf/controller.hpp"
#include "ccbf/model.hpp"
#include "ccbf/numerics.hpp"

namespace ccbf {

struct Scenario {
  std::string id;
  std::string label;
  ControlAffineSystem system;
  std::vector<ConstraintSpec> constraints;
  PhiKernel kernel = PhiKernel::exponential();
  ClassK alpha;
  std::function<Vector(double, const Vector&)> nominal;
  Vector x0;
  Vector w_guess;
  // Adaptation settings; `w`, `mu_f` and `nu_f` are filled in by the run.
  WeightState weights;
  InitializationOptions init;
  OmegaFlowOptions flow;
  double horizon = 10.0;
  double dt = 0.01;
  // Reach target, if any (bicycle).
  std::optional<Vector> goal;
  double goal_radius = 0.0;

  std::size_t steps() const;
  // Throws ContractViolation when the pieces do not fit together.
  void validate() const;
};

struct Params1d {
  double gamma = 0.1;
  double theta = 0.0;
  double k_p = 1.0;
  double x0 = 0.0;
  double horizon = 10.0;
  double dt = 0.01;
  double w_guess = 1.0;
  double w_min = 0.01;
  double w_max = 50.0;
  double s = 1e5;
  double p_gain = 100.0;
  double eta_mu = 0.001;
  double eta_nu = 0.001;
  double tau = 0.05;
};

// Well boundary of the 1-D example.
inline constexpr double kWellBoundary = 1.5616;

Scenario build_scenario_1d(const Params1d& params = {});

struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.4;
};

struct BicycleParams {
  double lr = 0.25;
  double x0 = 0.0;
  double y0 = 0.0;
  double beta0 = 0.0;
  double v0 = 0.0;
  double goal_x = 2.0;
  double goal_y = 2.0;
  double speed_limit = 2.0;           // S
  double slip_limit = 1.0471975511965976;  // B = pi/3
  double reach_time = 5.0;            // T
  double goal_radius = 0.1;           // R_g
  double shrink_radius = 4.0;         // R_i
  double omega_max = 4.0;
  double accel_max = 4.0;
  std::vector<Obstacle> obstacles = {
      {0.7, 1.1, 0.4}, {1.3, 0.6, 0.4}, {1.2, 1.6, 0.4}, {2.0, 1.1, 0.4}, {0.4, 0.3, 0.4}};
  // Nominal path: start -> waypoints -> goal, followed by pure pursuit.
  std::vector<std::array<double, 2>> waypoints = {{-0.3, 0.5}, {0.15, 1.8}, {1.2, 2.3}};
  double lookahead = 0.3;
  // The speed setpoint aims to arrive this long before T.
  double arrival_margin = 0.0;
  // ... and is capped by brake_gain * distance to the goal.
  double brake_gain = 3.0;
  // nominal controller gains
  double k_heading = 2.0;
  double k_slip = 4.0;
  double k_speed = 2.0;
  double horizon = 5.0;
  double dt = 0.01;
  double w_guess = 1.0;
  double w_min = 0.01;
  double w_max = 50.0;
  double s = 1e3;
  double p_gain = 100.0;
  double eta_mu = 0.05;
  double eta_nu = 0.05;
  double tau = 0.05;
};

Scenario build_scenario_bicycle(const BicycleParams& params = {});

enum class ControllerKind { kCcbfQp, kCcbfFlow, kEcbfQp, kNominalOnly };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::kCcbfQp;
  EcbfGains gains;   // ecbf-qp only, shared by all relative-degree-2 rows

  // "ccbf-qp", "ccbf-flow", "ecbf-qp(k1,k2)", "nominal-only"
  std::string id() const;
};

// Parses the ids produced by ControllerSpec::id (gains optional for ecbf-qp).
ControllerSpec parse_controller(const std::string& text);

struct SimRecord {
  double t = 0.0;
  Vector x;
  Vector u;
  Vector w;
  double H = 0.0;
  double b_ccbf = 0.0;
  Vector h;
  bool feasible = true;
  double eta_mu_margin = 0.0;
  double eta_nu_margin = 0.0;
  double min_eig = 0.0;
};

enum class Outcome { kCompleted, kControllerInfeasible, kAdaptationFailed, kDiverged };

std::string to_string(Outcome outcome);

struct SimLog {
  std::string scenario_id;
  std::string controller_id;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::kCompleted;
  // First time the outcome was decided (NaN when completed).
  double outcome_time = 0.0;
  std::string message;
  double final_s = 0.0;
  // Times the control flow was re-seeded from the QP (ccbf-flow only).
  int flow_restarts = 0;
  std::vector<SimRecord> records;

  // "completed", "controller-infeasible@1.23", ...
  std::string outcome_label() const;
};

// Closed-loop run. Module errors become outcomes; nothing escapes except
// ContractViolation for a malformed scenario. `seed` is recorded only: the
// simulation itself is deterministic.
SimLog run_simulation(const Scenario& scenario, const ControllerSpec& controller,
                      std::uint64_t seed = 0);

struct Metrics {
  Vector min_h;
  double min_H = 0.0;
  double max_b_ccbf = 0.0;
  double feasible_fraction = 0.0;
  double goal_distance = 0.0;        // NaN without a goal
  double first_infeasible_time = 0.0; // NaN when always feasible
  double max_abs_x0 = 0.0;
  double max_abs_u = 0.0;
  double min_eta_mu_margin = 0.0;
  double min_eta_nu_margin = 0.0;
  double min_eig = 0.0;
  double w_lowest = 0.0;
  double w_highest = 0.0;
  double total_variation_u = 0.0;
};

Metrics compute_metrics(const SimLog& log, const Scenario& scenario);

}  // namespace ccbf

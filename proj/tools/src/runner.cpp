#include "ccbf_cli/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ccbf_cli/output.hpp"

namespace ccbf::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << content;
  os.close();
  if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Plot overlay(const std::vector<RunResult>& results, const RunConfig& cfg) {
  Plot p;
  if (cfg.scenario == "bicycle") {
    p = {"trajectories in the plane", "x [m]", "y [m]", {}, {}, {}, true};
    for (const auto& ob : cfg.bicycle.obstacles) p.circles.push_back({ob.cx, ob.cy, ob.r});
    p.circles.push_back({cfg.bicycle.goal_x, cfg.bicycle.goal_y, cfg.bicycle.goal_radius});
    for (const auto& r : results) {
      Series s{r.spec.controller.id(), {}, {}, r.spec.controller.kind == ControllerKind::kNominalOnly};
      for (const auto& rec : r.log.records) {
        s.x.push_back(rec.x[0]);
        s.y.push_back(rec.x[1]);
      }
      p.series.push_back(std::move(s));
    }
  } else {
    p = {"position, all runs", "t [s]", "x", {}, {-kWellBoundary, kWellBoundary}, {}, false};
    for (const auto& r : results) {
      Series s{r.spec.id, {}, {}, r.spec.theta != 0.0};
      for (const auto& rec : r.log.records) {
        s.x.push_back(rec.t);
        s.y.push_back(rec.x[0]);
      }
      p.series.push_back(std::move(s));
    }
  }
  return p;
}

std::string summary_csv(const std::vector<RunResult>& results) {
  std::ostringstream os;
  os << "id,scenario,controller,gamma,theta,gated,outcome,pass,min_h,min_H,max_b_ccbf,"
        "feasible_fraction,max_abs_x0,max_abs_u,goal_distance,min_eig_phi,min_eta_mu_margin,"
        "min_eta_nu_margin,w_lowest,w_highest,final_s,flow_restarts,failures\n";
  for (const auto& r : results) {
    const auto& m = r.metrics;
    std::string failures;
    for (const auto& f : r.failures) failures += (failures.empty() ? "" : "; ") + f;
    os << r.spec.id << ',' << r.log.scenario_id << ',' << r.spec.controller.id() << ','
       << num(r.spec.gamma) << ',' << num(r.spec.theta) << ',' << (r.spec.gated ? 1 : 0) << ','
       << r.log.outcome_label() << ',' << (r.failures.empty() ? 1 : 0) << ','
       << num(m.min_h.size() ? m.min_h.minCoeff() : std::nan("")) << ',' << num(m.min_H) << ','
       << num(m.max_b_ccbf) << ',' << num(m.feasible_fraction) << ',' << num(m.max_abs_x0)
       << ',' << num(m.max_abs_u) << ',' << num(m.goal_distance) << ',' << num(m.min_eig) << ','
       << num(m.min_eta_mu_margin) << ',' << num(m.min_eta_nu_margin) << ','
       << num(m.w_lowest) << ',' << num(m.w_highest) << ',' << num(r.log.final_s) << ','
       << r.log.flow_restarts << ",\"" << failures << "\"\n";
  }
  return os.str();
}

}  // namespace

std::vector<std::string> check_invariants(const RunSpec& spec, const SimLog& log,
                                          const Metrics& m) {
  std::vector<std::string> out;
  if (!spec.gated) return out;
  auto fail = [&](const std::string& what, double value) {
    out.push_back(what + " (" + num(value) + ")");
  };
  if (log.outcome != Outcome::kCompleted) {
    out.push_back("outcome " + log.outcome_label());
  }
  if (log.records.empty()) {
    out.push_back("no records");
    return out;
  }
  const double floor = spec.scenario.weights.convexity_floor;
  if (m.min_eig < floor) fail("min eig Phi_ww below floor", m.min_eig);
  if (m.min_eta_mu_margin < -kMonitorEta) fail("mu filter margin", m.min_eta_mu_margin);
  if (m.min_eta_nu_margin < -kMonitorEta) fail("nu filter margin", m.min_eta_nu_margin);

  if (spec.scenario.goal) {
    for (Eigen::Index i = 0; i < m.min_h.size(); ++i) {
      if (!(m.min_h[i] >= 0.0)) fail("min h_" + std::to_string(i) + " < 0", m.min_h[i]);
    }
    if (m.feasible_fraction < 1.0) fail("infeasible steps, feasible fraction", m.feasible_fraction);
    const auto& ws = spec.scenario.weights;
    if (m.w_lowest < ws.w_min) fail("w below w_min", m.w_lowest);
    if (m.w_highest > ws.w_max) fail("w above w_max", m.w_highest);
  } else {
    for (Eigen::Index i = 0; i < m.min_h.size(); ++i) {
      if (!(m.min_h[i] > 0.0)) fail("min h_" + std::to_string(i) + " <= 0", m.min_h[i]);
    }
    if (!(m.max_abs_x0 < kWellBoundary)) fail("max |x| reaches the well", m.max_abs_x0);
    if (!(m.max_abs_u <= spec.scenario.system.u_max.maxCoeff())) fail("max |u| above bound", m.max_abs_u);
    if (!(m.min_H >= 0.0)) fail("min H < 0", m.min_H);
    if (!(m.max_b_ccbf <= 1e-9)) fail("max b_ccbf > 1e-9", m.max_b_ccbf);
  }
  return out;
}

std::vector<RunResult> execute(const std::vector<RunSpec>& specs, int jobs, std::uint64_t seed) {
  std::vector<RunResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      auto& r = results[i];
      r.spec = specs[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        r.log = run_simulation(r.spec.scenario, r.spec.controller, seed);
        r.metrics = compute_metrics(r.log, r.spec.scenario);
        r.failures = check_invariants(r.spec, r.log, r.metrics);
      } catch (const std::exception& e) {
        r.log.scenario_id = r.spec.scenario.id;
        r.log.controller_id = r.spec.controller.id();
        r.log.message = e.what();
        r.failures.push_back(std::string("crashed: ") + e.what());
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, jobs));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(n, specs.size()); ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

void write_outputs(const std::vector<RunResult>& results, const RunConfig& cfg,
                   const fs::path& dir) {
  for (const auto& r : results) {
    std::ostringstream csv;
    write_csv(csv, r.log);
    write_file(dir / (r.spec.id + ".csv"), csv.str());
    write_file(dir / (r.spec.id + "_states.svg"), render_svg(states_plot(r.log)));
    write_file(dir / (r.spec.id + "_controls.svg"), render_svg(controls_plot(r.log)));
    write_file(dir / (r.spec.id + "_weights.svg"), render_svg(weights_plot(r.log)));
    write_file(dir / (r.spec.id + "_barriers.svg"), render_svg(barrier_plot(r.log)));
  }
  write_file(dir / (cfg.scenario == "bicycle" ? "overlay_xy.svg" : "overlay_states.svg"),
             render_svg(overlay(results, cfg)));
  write_file(dir / "summary.csv", summary_csv(results));
}

int run_matrix(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.out_dir;
  try {
    fs::create_directories(dir);
    write_file(dir / ".write_probe", "");
    fs::remove(dir / ".write_probe");
  } catch (const std::exception& e) {
    err << "error: output directory '" << dir.string() << "' is not writable: " << e.what() << '\n';
    return kExitEnvironment;
  }

  const auto specs = expand_matrix(cfg);
  const auto results = execute(specs, cfg.jobs, cfg.seed);
  try {
    write_outputs(results, cfg, dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitEnvironment;
  }

  bool pass = true;
  out << std::left << std::setw(36) << "run" << std::setw(30) << "outcome" << std::setw(8)
      << "gated" << std::setw(8) << "result" << "time[s]\n";
  for (const auto& r : results) {
    const bool ok = r.failures.empty();
    pass = pass && ok;
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(2) << r.seconds;
    out << std::setw(36) << r.spec.id << std::setw(30) << r.log.outcome_label() << std::setw(8)
        << (r.spec.gated ? "yes" : "no") << std::setw(8) << (ok ? "PASS" : "FAIL") << secs.str()
        << '\n';
  }
  out << "wrote " << results.size() << " runs to " << dir.string() << '\n';
  if (!pass) {
    err << "acceptance failures:\n";
    for (const auto& r : results) {
      for (const auto& f : r.failures) err << "  " << r.spec.id << ": " << f << '\n';
    }
    return kExitAcceptance;
  }
  return kExitPass;
}

}  // namespace ccbf::cli

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ccbf_cli/config.hpp"

namespace ccbf::cli {

// Filter-error margin the monitors hold every gated run to.
inline constexpr double kMonitorEta = 0.05;

enum ExitCode : int { kExitPass = 0, kExitAcceptance = 1, kExitEnvironment = 2 };

struct RunResult {
  RunSpec spec;
  SimLog log;
  Metrics metrics;
  // Violated scenario invariants; empty means pass. Always empty for
  // baselines unless the run crashed.
  std::vector<std::string> failures;
  double seconds = 0.0;
};

// Invariants of a gated run: 1d keeps both h > 0, |x| below the well, |u| <= 1,
// H >= 0 and b <= 1e-9; bicycle keeps every h >= 0, all steps feasible and
// w in [w_min, w_max]. Both need the run to complete, the Hessian floor and
// filter margins >= -kMonitorEta.
std::vector<std::string> check_invariants(const RunSpec& spec, const SimLog& log,
                                          const Metrics& metrics);

// Runs every spec, at most `jobs` at a time. Results keep the input order.
std::vector<RunResult> execute(const std::vector<RunSpec>& specs, int jobs, std::uint64_t seed);

// Writes <id>.csv, <id>_{states,controls,weights,barriers}.svg per run, the
// overlay figure and summary.csv. Throws std::runtime_error on I/O failure.
void write_outputs(const std::vector<RunResult>& results, const RunConfig& cfg,
                   const std::filesystem::path& dir);

// Full `run` command. Returns the process exit code.
int run_matrix(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace ccbf::cli

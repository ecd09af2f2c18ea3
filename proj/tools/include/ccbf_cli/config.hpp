#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccbf/scenarios.hpp"

namespace ccbf::cli {

// Malformed file, unknown key or invalid value. `line` is 0 when the problem
// is not tied to a line (validation, environment overrides).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0) : std::runtime_error(msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct FlowSettings {
  double gain = 100.0;   // B = gain * I
  int substeps = 10;
};

struct RunConfig {
  std::string scenario = "1d";
  std::vector<std::string> controllers{"ccbf-qp"};
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int jobs = 1;

  // 1d: every (gamma, theta) pair is one run per controller.
  std::vector<double> gammas{0.1};
  std::vector<double> thetas{0.0};
  Params1d p1d;

  BicycleParams bicycle;
  FlowSettings flow;
};

// Prefix of environment overrides: CCBF_<SECTION>_<KEY>, e.g. CCBF_RUN_JOBS=4
// or CCBF_BICYCLE_OMEGA_MAX=6.
inline constexpr const char* kEnvPrefix = "CCBF_";

// Parses INI text. `source` names the input in messages.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

// Reads and parses `path`, applies environment overrides, validates.
RunConfig parse_config(const std::string& path);

// Applies CCBF_* overrides from `env` (name -> value).
void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& env);

// CCBF_* variables of the current process.
std::map<std::string, std::string> environment_overrides();

// Throws ConfigError naming the field and the violated constraint.
void validate(const RunConfig& cfg);

// One scenario/controller combination of the matrix.
struct RunSpec {
  std::string id;   // file-name safe
  Scenario scenario;
  ControllerSpec controller;
  // C-CBF runs are acceptance-gated; baselines are informational.
  bool gated = false;
  double gamma = 0.0;
  double theta = 0.0;
};

std::vector<RunSpec> expand_matrix(const RunConfig& cfg);

std::vector<std::string> scenario_ids();

}  // namespace ccbf::cli

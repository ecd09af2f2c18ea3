#include <iostream>

#include <CLI11.hpp>

#include "ccbf_cli/config.hpp"
#include "ccbf_cli/runner.hpp"

using namespace ccbf::cli;

namespace {

int list_scenarios() {
  const ccbf::Scenario one = ccbf::build_scenario_1d();
  const ccbf::Scenario bike = ccbf::build_scenario_bicycle();
  std::cout << "1d       " << one.label << '\n';
  std::cout << "bicycle  " << bike.label << '\n';
  std::cout << "controllers: ccbf-qp, ccbf-flow, ecbf-qp(k1,k2), nominal-only\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consolidated control barrier function simulations"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run the scenario x controller matrix of a config");
  run->add_option("--config", config_path, "INI config file")->required();
  run->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory");

  auto* list = app.add_subcommand("list-scenarios", "list scenario ids");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "parse and validate a config");
  val->add_option("--config", validate_path, "INI config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitEnvironment;
  }

  if (list->parsed()) return list_scenarios();

  const std::string& path = val->parsed() ? validate_path : config_path;
  RunConfig cfg;
  try {
    cfg = parse_config(path);
    if (jobs > 0) cfg.jobs = jobs;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitEnvironment;
  }

  if (val->parsed()) {
    const auto specs = expand_matrix(cfg);
    std::cout << path << ": ok, " << specs.size() << " runs\n";
    for (const auto& s : specs) std::cout << "  " << s.id << (s.gated ? "" : "  (baseline)") << '\n';
    return kExitPass;
  }
  return run_matrix(cfg, std::cout, std::cerr);
}

// funnelctl: command-line front end for the funnel controller simulator.

#include "funnel/config.hpp"
#include "funnel/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int report_errors(const funnel::ValidationError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& msg : e.errors()) std::cerr << "  " << msg << "\n";
  return funnel::kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Funnel controller simulation and diagnostics", "funnelctl"};
  app.set_version_flag("--version", std::string(FUNNEL_VERSION));
  app.require_subcommand(1);

  funnel::RunOptions cli_opts;
  std::string output_dir;
  std::size_t workers = 0;
  app.add_option("-o,--output-dir", output_dir, "Output directory (overrides config and FUNNEL_OUTPUT_DIR)");
  app.add_option("-j,--workers", workers, "Sweep worker count (overrides config and FUNNEL_WORKERS)")
      ->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", cli_opts.quiet, "Suppress the summary on stdout");

  std::string config_path;
  std::string trace_path;

  auto* simulate = app.add_subcommand("simulate", "Run one closed-loop simulation");
  simulate->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);

  auto* feasible = app.add_subcommand("feasible", "Check the initial-condition feasibility conditions");
  feasible->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);

  auto* diagnose = app.add_subcommand("diagnose", "Check the analysis identities along a stored run");
  diagnose->add_option("csv", trace_path, "Trace CSV written by simulate")->required()->check(CLI::ExistingFile);
  diagnose->add_option("config", config_path, "Configuration used for the run")
      ->required()
      ->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Run the Cartesian product of the sweep axes");
  sweep->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? funnel::kExitOk : funnel::kExitError;
  }

  try {
    if (!output_dir.empty()) cli_opts.output_dir = output_dir;
    if (workers > 0) cli_opts.workers = workers;
    const funnel::RunOptions opts = funnel::with_environment(cli_opts);
    const funnel::ExperimentConfig cfg = funnel::parse_config(config_path);

    if (*simulate) return funnel::run_simulate(cfg, opts, std::cout, std::cerr);
    if (*feasible) return funnel::run_feasible(cfg, std::cout);
    if (*diagnose) return funnel::run_diagnose(trace_path, cfg, std::cout, std::cerr);
    return funnel::run_sweep_command(cfg, opts, std::cout, std::cerr);
  } catch (const funnel::ValidationError& e) {
    return report_errors(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return funnel::kExitError;
  }
}

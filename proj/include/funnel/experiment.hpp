/**
 * @file experiment.hpp
 * @brief simulate / feasible / diagnose / sweep commands.
 */
#pragma once

#include "funnel/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace funnel {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,       ///< configuration, I/O or usage error
  kExitUnderflow = 2,   ///< StepUnderflow
  kExitInfeasible = 3,  ///< InfeasibleStart
  kExitFailed = 4,      ///< did not complete (step budget) or a check failed
};

/// Command-line and environment overrides (FUNNEL_OUTPUT_DIR, FUNNEL_WORKERS).
struct RunOptions {
  std::optional<std::string> output_dir;
  std::optional<std::size_t> workers;
  bool quiet = false;
};

/// Fills unset fields from the environment. Throws std::invalid_argument on a malformed FUNNEL_WORKERS.
[[nodiscard]] RunOptions with_environment(RunOptions opts);

struct OutputPaths {
  std::filesystem::path trace;
  std::filesystem::path state;
  std::filesystem::path metadata;
};

[[nodiscard]] OutputPaths output_paths(const ExperimentConfig& cfg, const RunOptions& opts);

/**
 * @brief Runs one simulation and writes trace, state and metadata.
 *
 * Returns kExitOk only when the horizon was completed with every invariant
 * holding. On StepUnderflow the metadata (with the failure) is still written;
 * on InfeasibleStart nothing is written.
 */
int run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err);

/// Prints the feasibility section exactly as it appears in the metadata. kExitOk or kExitInfeasible.
int run_feasible(const ExperimentConfig& cfg, std::ostream& out);

/// Reloads a stored run and writes <stem>_diagnostics.json and <stem>_zeta.csv next to it.
int run_diagnose(const std::filesystem::path& trace, const ExperimentConfig& cfg, std::ostream& out,
                 std::ostream& err);

struct SweepRow {
  std::size_t cell = 0;
  std::vector<Override> values;
  std::string status;  ///< completed, infeasible, step_underflow, invalid, failed
  bool feasible = false;
  bool completed = false;
  double max_funnel_ratio = 0.0;
  double max_theta_ratio = 0.0;  ///< over all levels
  double max_input_norm = 0.0;
  double max_error_norm = 0.0;
  std::size_t steps = 0;
  std::string message;
};

/// Cartesian product of the sweep axes, first axis varying slowest.
[[nodiscard]] std::vector<std::vector<Override>> sweep_cells(const SweepConfig& sweep);

/// Runs every cell on a bounded worker pool; rows are in cell order regardless of scheduling.
[[nodiscard]] std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, std::size_t workers);

/// run_sweep plus the summary CSV and a printed table. kExitOk iff every cell completed.
int run_sweep_command(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace funnel

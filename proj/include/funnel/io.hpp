/**
 * @file io.hpp
 * @brief Trace CSV, state CSV and JSON metadata.
 *
 * The trace CSV has a fixed column order (see trace_columns) and is the
 * contract for downstream plotting. The companion state CSV carries the full
 * plant and operator state per row so that a stored run can be reloaded and
 * diagnosed without re-simulating. Numbers are written with 17 significant
 * digits, which round-trips every double.
 */
#pragma once

#include "funnel/analysis.hpp"
#include "funnel/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace funnel {

/// 17 significant digits ("%.17g" semantics, locale independent).
[[nodiscard]] std::string format_number(double v);

/// Parses a number written by format_number (also accepts inf/nan). Throws std::invalid_argument.
[[nodiscard]] double parse_number(const std::string& s);

/// t, y_k, yref_k, e_norm, phi, funnel_ratio, xi_i_k, theta_i_norm, u_k, h.
[[nodiscard]] std::vector<std::string> trace_columns(int r, int n);

/// t, x_j_k (j = 0..r-1 derivative order, k = 1..n), eta_k.
[[nodiscard]] std::vector<std::string> state_columns(int r, int n, int m);

void write_trace_csv(const std::filesystem::path& path, const SimResult& sim, const Problem& p);
void write_state_csv(const std::filesystem::path& path, const SimResult& sim, const Problem& p);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name; throws std::out_of_range.
  [[nodiscard]] std::size_t column(const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

/// "run.csv" -> "run_state.csv".
[[nodiscard]] std::filesystem::path state_path_for(const std::filesystem::path& trace);

/**
 * @brief Rebuilds a SimResult from a trace CSV and its state CSV.
 *
 * Samples are recomputed from (t, x, xi, eta) so derived columns are checked
 * against the stored ones; a mismatch beyond rounding throws.
 */
[[nodiscard]] SimResult load_trace(const std::filesystem::path& trace, const std::filesystem::path& state,
                                   const Problem& p);

[[nodiscard]] nlohmann::ordered_json config_json(const ExperimentConfig& cfg, const SystemSpec& sys);
[[nodiscard]] nlohmann::ordered_json feasibility_json(const FeasibilityReport& rep, const ControllerParams& params);
[[nodiscard]] nlohmann::ordered_json stats_json(const IntegratorStats& st);
[[nodiscard]] nlohmann::ordered_json invariants_json(const SimResult& sim, const ControllerParams& params);
[[nodiscard]] nlohmann::ordered_json diagnostics_json(const analysis::DiagnosticsReport& rep);

/// Canonical text form used for every JSON document and section (2-space indent).
[[nodiscard]] std::string dump_json(const nlohmann::ordered_json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace funnel

/**
 * @file config.hpp
 * @brief TOML experiment configuration.
 *
 * A configuration selects a registered plant (optionally overriding its
 * matrices and initial data), the controller parameters, a funnel and a
 * reference, integrator settings, the output location and optional sweep
 * axes. Parsing collects every problem with its key path before failing.
 */
#pragma once

#include "funnel/integrator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace funnel {

struct PlantConfig {
  std::string name;  ///< paper_nonlinear, chain_integrator or linear_test
  int r = 0;
  int n = 0;
  double t0 = 0.0;
  std::uint64_t seed = 1;
  IntegralArgument integral_arg = IntegralArgument::s;
  std::optional<Mat> gamma;
  std::optional<std::vector<Mat>> R;
  std::optional<std::vector<Vec>> y0;
};

struct OutputConfig {
  std::string dir = "out";
  std::string name;  ///< file stem; defaults to the config file stem
};

struct SweepAxis {
  std::string key;  ///< dotted path, list entries as name[i]
  std::vector<double> values;
};

struct SweepConfig {
  std::size_t workers = 0;  ///< 0: hardware concurrency
  std::vector<SweepAxis> axes;
};

/// One scalar assignment applied on top of the file contents.
using Override = std::pair<std::string, double>;

struct ExperimentConfig {
  std::string source_path;
  std::string source_text;
  std::vector<Override> overrides;

  PlantConfig plant;
  ControllerParams controller;
  FunnelSpec funnel;
  ReferenceSpec reference;
  IntegratorConfig integrator;
  OutputConfig output;
  SweepConfig sweep;
};

/// Thrown with every validation message when a configuration is rejected.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Reads and validates a configuration file. Throws ConfigError or std::runtime_error (I/O).
[[nodiscard]] ExperimentConfig parse_config(const std::string& path);

/**
 * @brief Parses configuration text with optional scalar overrides.
 *
 * Overrides replace (or create) the value at a dotted key path before the
 * table is interpreted, so a sweep cell is validated exactly like a file.
 */
[[nodiscard]] ExperimentConfig parse_config_string(const std::string& text, const std::string& source_path,
                                                   const std::vector<Override>& overrides = {});

/// Plant from the registry with the configured overrides applied.
[[nodiscard]] SystemSpec build_system(const PlantConfig& plant);

[[nodiscard]] Problem build_problem(const ExperimentConfig& cfg);

/// Registered plant names.
[[nodiscard]] const std::vector<std::string>& plant_names();

}  // namespace funnel

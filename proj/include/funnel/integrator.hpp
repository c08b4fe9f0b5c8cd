/**
 * @file integrator.hpp
 * @brief Closed-loop simulation with an embedded Runge-Kutta 5(4) pair.
 *
 * The plant state x, the filter state xi and the operator state eta are
 * integrated jointly. A step is accepted only if the local error estimate
 * passes and the trial endpoint lies inside the controller domain with every
 * denominator above guard_factor times its nominal scale. Stored samples are
 * exactly the accepted step endpoints.
 */
#pragma once

#include "funnel/controller.hpp"
#include "funnel/plant.hpp"
#include "funnel/signals.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace funnel {

/// Everything that defines one closed-loop experiment.
struct Problem {
  SystemSpec sys;
  ControllerParams params;
  FunnelSpec funnel;
  ReferenceSpec ref;
};

/// All validation problems across plant, controller, funnel and reference.
[[nodiscard]] std::vector<std::string> validate_problem(const Problem& p, double t_end);

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-6;
  double h_init = 1e-4;
  double h_min = 1e-10;
  double h_max = 0.05;
  double t_end = 10.0;
  double guard_factor = 1e-12;
  std::size_t max_steps = 2'000'000;  ///< accepted-step budget; every step is stored
};

[[nodiscard]] std::vector<std::string> validate_integrator(const IntegratorConfig& cfg, double t0);

struct ClosedLoopState {
  double t = 0.0;
  Vec x;    ///< (y, y', ..., y^(r-1)), length r n
  Vec xi;   ///< (xi_1, ..., xi_{r-1}), length (r-1) n
  Vec eta;  ///< operator state, length m
};

struct ClosedLoopDerivative {
  Vec dx;
  Vec dxi;
  Vec deta;
};

/// Closed-loop vector field. Throws DomainExit outside the domain.
[[nodiscard]] ClosedLoopDerivative closed_loop_rhs(const ClosedLoopState& state, const Problem& p);

[[nodiscard]] ClosedLoopState initial_state(const Problem& p);

/// One accepted step endpoint with derived controller signals.
struct Sample {
  double t = 0.0;
  double h = 0.0;  ///< step that led here (0 for the initial sample)
  Vec x;
  Vec xi;
  Vec eta;
  Vec y_ref;
  Vec e;
  double phi = 0.0;
  double funnel_ratio = 0.0;  ///< phi |e|
  std::vector<Vec> theta;
  Vec theta_ratio;  ///< |theta_i| / theta_hat_i
  Vec u;
};

/// Recomputes the derived fields of a sample from (t, x, xi, eta).
[[nodiscard]] Sample make_sample(const Problem& p, double t, double h, const Vec& x, const Vec& xi, const Vec& eta);

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rejected_error = 0;
  std::size_t rejected_domain = 0;
  std::size_t rejected_taint = 0;
  std::size_t rejected_nonfinite = 0;
  std::size_t rhs_evals = 0;
  double min_step = 0.0;
  double max_step = 0.0;
  double wall_seconds = 0.0;
};

struct SimResult {
  std::vector<Sample> samples;
  IntegratorStats stats;
  FeasibilityReport feasibility;
  IntegratorConfig config;

  [[nodiscard]] double max_funnel_ratio() const;
  [[nodiscard]] std::vector<double> max_theta_ratio() const;
  [[nodiscard]] double max_input_norm() const;
  [[nodiscard]] double max_error_norm() const;
};

class InfeasibleStart : public std::runtime_error {
 public:
  explicit InfeasibleStart(FeasibilityReport report);
  [[nodiscard]] const FeasibilityReport& report() const noexcept { return report_; }

 private:
  FeasibilityReport report_;
};

/**
 * @brief The step size fell below h_min while steps were still being rejected.
 *
 * reason() is what rejected the last step (local error, a domain constraint,
 * non-finite state); constraint() is the domain constraint closest to
 * violation at the last trial, with its normalized margin d_i / scale_i.
 */
class StepUnderflow : public std::runtime_error {
 public:
  StepUnderflow(double t, double h, std::string reason, int level, double margin);
  [[nodiscard]] double t() const noexcept { return t_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] const std::string& reason() const noexcept { return reason_; }
  [[nodiscard]] int level() const noexcept { return level_; }
  [[nodiscard]] std::string constraint() const { return constraint_name(level_); }
  [[nodiscard]] double margin() const noexcept { return margin_; }

 private:
  double t_;
  double h_;
  std::string reason_;
  int level_;
  double margin_;
};

/**
 * @brief Integrates the closed loop over [t0, cfg.t_end].
 *
 * Throws ValidationError for an invalid problem or configuration,
 * InfeasibleStart if the initial data violate the feasibility conditions,
 * StepUnderflow on step-size collapse and std::runtime_error when max_steps
 * accepted steps do not reach t_end.
 */
[[nodiscard]] SimResult simulate(const Problem& p, const IntegratorConfig& cfg);

}  // namespace funnel

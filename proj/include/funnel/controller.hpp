/**
 * @file controller.hpp
 * @brief Derivative-free funnel controller with an input filter cascade.
 *
 * The controller only sees e(t), the filter states xi_1..xi_{r-1} and phi(t).
 * Neither output derivatives nor reference derivatives appear in any
 * signature below.
 */
#pragma once

#include "funnel/plant.hpp"
#include "funnel/signals.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace funnel {

struct ControllerParams {
  double gain = 1.0;               ///< final gain (vartheta)
  std::vector<double> theta_hat;   ///< constant radii for theta_1..theta_{r-1}
  std::vector<Vec> xi0;            ///< filter initial values xi_1^0..xi_{r-1}^0
};

[[nodiscard]] std::vector<std::string> validate_params(const ControllerParams& params, int r, int n);

/// The state left the open domain where all controller denominators are positive.
class DomainExit : public std::runtime_error {
 public:
  explicit DomainExit(int level);
  /// 0: funnel (phi |e| < 1); i >= 1: |theta_i| < theta_hat_i.
  [[nodiscard]] int level() const noexcept { return level_; }

 private:
  int level_;
};

/// Short human-readable name of a domain constraint.
[[nodiscard]] std::string constraint_name(int level);

struct ThetaChain {
  std::vector<Vec> theta;     ///< theta_1..theta_{r-1}; shorter if the chain stopped early
  std::vector<double> denom;  ///< d_0 = 1 - phi^2 |e|^2, d_i = theta_hat_i^2 - |theta_i|^2
  std::vector<double> margin; ///< unclamped d_i / scale_i (scale_0 = 1, scale_i = theta_hat_i^2)
  std::optional<int> exit_level;  ///< first level whose denominator is not above its guard
  bool clamped = false;       ///< denominators were clamped (see evaluate_theta_chain)

  [[nodiscard]] bool inside() const { return !exit_level.has_value(); }
};

/**
 * @brief Non-throwing theta-chain evaluation.
 *
 * Level i fails when d_i <= guard * scale_i with scale_0 = 1 and
 * scale_i = theta_hat_i^2. With @p clamp false the chain stops at the first
 * failing level; with @p clamp true the failing denominator is replaced by its
 * guard value (at least the smallest positive normal) and evaluation
 * continues, which lets Runge-Kutta stages that overshoot the domain still
 * produce a finite, flagged derivative.
 */
[[nodiscard]] ThetaChain evaluate_theta_chain(const Vec& e, const std::vector<Vec>& xi, double phi,
                                              const ControllerParams& params, double guard = 0.0,
                                              bool clamp = false);

/// theta_1 = xi_1 + e / d_0, theta_i = xi_i + theta_{i-1} / d_{i-1}. Throws DomainExit.
[[nodiscard]] ThetaChain theta_chain(const Vec& e, const std::vector<Vec>& xi, double phi,
                                     const ControllerParams& params);

/// u = -gain * theta_{r-1} / d_{r-1}. Throws DomainExit{r-1} if d_{r-1} <= 0.
[[nodiscard]] Vec control_input(const ThetaChain& chain, const ControllerParams& params);

/// xi_i' = -(r-i) xi_i + xi_{i+1} for i < r-1, xi_{r-1}' = -xi_{r-1} + u.
[[nodiscard]] std::vector<Vec> filter_rhs(const std::vector<Vec>& xi, const Vec& u, int r);

struct FeasibilityReport {
  double funnel_ratio = 0.0;          ///< phi(t0) |y0(t0) - yref(t0)|
  bool funnel_ok = false;
  std::vector<double> theta_norm;     ///< |theta_i^0| (only computed levels)
  std::vector<double> theta_ratio;    ///< |theta_i^0| / theta_hat_i
  bool feasible = false;
  std::optional<std::string> failed;  ///< first violated condition
};

/// Initial-condition conditions of the closed-loop guarantee; infeasibility is a result, not an error.
[[nodiscard]] FeasibilityReport initial_feasibility(const SystemSpec& sys, const ControllerParams& params,
                                                    const FunnelSpec& funnel, const ReferenceSpec& ref);

}  // namespace funnel

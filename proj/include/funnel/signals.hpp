/**
 * @file signals.hpp
 * @brief Performance funnels and reference trajectories.
 *
 * A funnel is given through its inverse radius phi(t): the tracking error e
 * is admissible at time t iff phi(t) * |e| < 1. All evaluations are pure
 * functions of (spec, t).
 */
#pragma once

#include "funnel/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace funnel {

/// phi(t) = 1 / (2.1 (exp(-3t) + 0.05) + 2 exp(-t) + 0.05).
struct PaperFunnel {};

/// phi(t) = 1 / (a exp(-b t) + c); the funnel radius decays from a + c to c.
struct ExponentialFunnel {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
};

/**
 * @brief Tabulated phi with a monotone piecewise-cubic (Fritsch-Butland) interpolant.
 *
 * The interpolant is C1 and never overshoots the data, so positive samples
 * give a positive funnel. Lookups outside [t.front(), t.back()] throw
 * std::out_of_range.
 */
class TableFunnel {
 public:
  TableFunnel(std::vector<double> t, std::vector<double> phi);

  [[nodiscard]] double value(double t) const;
  [[nodiscard]] double derivative(double t) const;
  [[nodiscard]] double t_min() const { return t_.front(); }
  [[nodiscard]] double t_max() const { return t_.back(); }
  [[nodiscard]] const std::vector<double>& times() const { return t_; }
  [[nodiscard]] const std::vector<double>& values() const { return phi_; }

 private:
  [[nodiscard]] std::size_t interval(double t) const;

  std::vector<double> t_;
  std::vector<double> phi_;
  std::vector<double> slope_;
};

struct FunnelSpec {
  std::variant<PaperFunnel, ExponentialFunnel, TableFunnel> kind;
};

struct FunnelValue {
  double phi = 0.0;
  double dphi = 0.0;
};

[[nodiscard]] FunnelValue funnel_eval(const FunnelSpec& spec, double t);

/// lim_{t -> inf} phi(t) for closed-form kinds; nullopt for tables.
[[nodiscard]] std::optional<double> funnel_limit(const FunnelSpec& spec);

/// Human readable kind tag ("paper", "exponential", "table").
[[nodiscard]] std::string funnel_kind_name(const FunnelSpec& spec);

/**
 * @brief Checks inf phi > 0 and boundedness of phi, phi' over [t0, t_end].
 *
 * Uses a 10^4-point sample of the horizon plus the analytic limit where one
 * exists. Returns one message per violation (empty when valid).
 */
[[nodiscard]] std::vector<std::string> validate_funnel(const FunnelSpec& spec, double t0, double t_end);

/// y_ref(t) = (exp(-(t-5)^2), sin t).
struct PaperReference {};

/// Channel k: amplitude_k sin(frequency_k t + phase_k), frequency in rad per time unit.
struct SinusoidReference {
  Vec amplitude;
  Vec frequency;
  Vec phase;
};

struct ConstantReference {
  Vec value;
};

/// Channel k: sum_p coeffs[k][p] t^p (ascending powers).
struct PolynomialReference {
  std::vector<std::vector<double>> coeffs;
};

struct ReferenceSpec {
  std::variant<PaperReference, SinusoidReference, ConstantReference, PolynomialReference> kind;
};

struct ReferenceValue {
  Vec y;
  Vec dy;
};

[[nodiscard]] ReferenceValue reference_eval(const ReferenceSpec& spec, double t);
[[nodiscard]] int reference_dim(const ReferenceSpec& spec);
[[nodiscard]] std::string reference_kind_name(const ReferenceSpec& spec);
[[nodiscard]] std::vector<std::string> validate_reference(const ReferenceSpec& spec);

}  // namespace funnel

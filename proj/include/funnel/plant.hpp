/**
 * @file plant.hpp
 * @brief Plants of the form
 *
 *   y^(r) = sum_{i=1}^{r-1} R_i y^(i) + f(T(y, ..., y^(r-1))) + Gamma u
 *
 * where T is a causal operator realized as a readout of an auxiliary state
 * eta (dimension m) that is integrated jointly with the plant.
 *
 * Operators are expected to be locally Lipschitz and BIBO in the sense that a
 * bounded output y alone bounds the readout. Neither property is checked;
 * causality holds by construction since the readout only sees the current
 * state and the current derivative stack.
 */
#pragma once

#include "funnel/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace funnel {

/// Read-only view of the stacked derivatives (y, y', ..., y^(r-1)).
class OutputStack {
 public:
  OutputStack(const Vec& x, int n) : x_(x), n_(n) {}

  [[nodiscard]] int dim() const { return n_; }
  [[nodiscard]] int order() const { return static_cast<int>(x_.size()) / n_; }
  /// j-th derivative y^(j).
  [[nodiscard]] auto operator[](int j) const { return x_.segment(static_cast<Eigen::Index>(j) * n_, n_); }
  [[nodiscard]] const Vec& stacked() const { return x_; }

 private:
  const Vec& x_;
  int n_;
};

struct OperatorSpec {
  using StateRhs = std::function<Vec(double t, const Vec& eta, const OutputStack& stack)>;
  using Readout = std::function<Vec(double t, const Vec& eta, const OutputStack& stack)>;

  std::string name;
  int m = 0;  ///< internal state dimension
  int q = 0;  ///< readout dimension
  Vec eta0;
  StateRhs state_rhs;  ///< may be empty when m == 0
  Readout readout;
};

struct OperatorOutput {
  Vec w;
  Vec eta_dot;
};

/// Evaluates readout and internal dynamics. Throws NonFiniteError naming the operator.
[[nodiscard]] OperatorOutput operator_eval(const OperatorSpec& op, double t, const Vec& eta,
                                           const OutputStack& stack);

/// How the integral term of the built-in nonlinear example is read.
enum class IntegralArgument {
  s,  ///< integrand evaluated at the integration variable: genuine memory, eta' = -eta + ...
  t,  ///< integrand evaluated at the upper limit: (1 - exp(-t)) times a memoryless term
};

[[nodiscard]] std::string to_string(IntegralArgument arg);

struct SystemSpec {
  using Nonlinearity = std::function<Vec(const Vec& w)>;
  using History = std::function<Vec(double t)>;

  std::string name;
  int r = 2;
  int n = 1;
  int q = 0;
  double t0 = 0.0;
  std::vector<Mat> R;  ///< R_1 .. R_{r-1}
  Mat gamma;
  Nonlinearity f;
  OperatorSpec op;
  /// (y^0(t0), ..., (y^0)^(r-1)(t0)).
  std::vector<Vec> y0;
  /// Stacked x^0(t) on [0, t0]; only used to seed eta when t0 > 0 and m > 0.
  History history;
  IntegralArgument integral_arg = IntegralArgument::s;
};

/// All validation problems (dimensions, Gamma symmetric part, ...); empty when valid.
[[nodiscard]] std::vector<std::string> validate_system(const SystemSpec& sys);

/// Throws ValidationError when validate_system reports anything.
void require_valid(const SystemSpec& sys);

/// Smallest eigenvalue of (Gamma + Gamma^T) / 2.
[[nodiscard]] double gamma_sym_min_eig(const Mat& gamma);

/// max |lambda| over the eigenvalues of Gamma.
[[nodiscard]] double gamma_spectral_radius(const Mat& gamma);

struct PlantDerivative {
  Vec dx;
  Vec deta;
};

/**
 * @brief Plant vector field for the stacked state x = (y, y', ..., y^(r-1)).
 *
 * Throws NonFiniteError if f or the operator produce NaN/Inf.
 */
[[nodiscard]] PlantDerivative plant_rhs(const SystemSpec& sys, double t, const Vec& x, const Vec& u,
                                        const Vec& eta);

/// Stacks y0 into x(t0).
[[nodiscard]] Vec initial_plant_state(const SystemSpec& sys);

/**
 * @brief Operator state at t0.
 *
 * For t0 > 0 with a history callback the internal state is integrated from
 * eta0 at t = 0 along the history (fixed-step RK4); otherwise eta0.
 */
[[nodiscard]] Vec initial_operator_state(const SystemSpec& sys, int history_steps = 4000);

// Built-in operators and plants.

/// Memoryless readout w = y (q = n, m = 0).
[[nodiscard]] OperatorSpec identity_operator(int n);

/// Disturbance d(t) of the nonlinear example.
[[nodiscard]] Vec paper_disturbance(double t);

/// Five-channel operator of the nonlinear example (n = 2, r = 3).
[[nodiscard]] OperatorSpec paper_operator(IntegralArgument arg);

/// r = 3, n = 2 nonlinear example system with zero initial data.
[[nodiscard]] SystemSpec make_paper_nonlinear(IntegralArgument arg = IntegralArgument::s);

/// y^(r) = Gamma u; zero initial data.
[[nodiscard]] SystemSpec make_chain_integrator(int r, int n, const Mat& gamma);

/**
 * @brief Linear plant with seeded pseudo-random R_i and f(w) = F w, w = y.
 *
 * R_i and F are small (entries ~ N(0, 0.2^2)), R_{r-1} is shifted by -I so
 * the highest derivative is damped; Gamma is I plus a random skew-symmetric part.
 */
[[nodiscard]] SystemSpec make_linear_test(int r, int n, std::uint64_t seed);

}  // namespace funnel

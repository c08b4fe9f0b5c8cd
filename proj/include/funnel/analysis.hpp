/**
 * @file analysis.hpp
 * @brief Exact algebraic diagnostics over stored closed-loop trajectories.
 *
 * The boundedness argument for the filter controller rests on a handful of
 * computable objects: the integer table a_{i,j}, the matrix polynomials S_j,
 * the signals zeta_i (two equivalent formulas), Vandermonde kernel vectors c
 * and c^(k), and the combinations Z = sum c_i zeta_i, Z_k = sum c^(k)_i zeta_i
 * from which y' - Gamma xi_1 and y^(k) are recovered. All of them are exact
 * identities in the stored plant state x = (y, ..., y^(r-1)), so residuals
 * here measure rounding only. No numerical differentiation is used except for
 * the zeta_i' spot check, which is the one relation that is not algebraic in
 * the state.
 */
#pragma once

#include "funnel/integrator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace funnel::analysis {

inline constexpr double kDualFormTol = 1e-10;
inline constexpr double kIdentityTol = 1e-8;
inline constexpr double kCoefficientTol = 1e-10;

/**
 * @brief a_{i,j} = (i-1)! / (i-(r-j))! = prod_{k=1}^{r-1-j} (i-k).
 *
 * Defined for 1 <= i <= r-1 and r-i <= j <= r-1 (the lower end j = r-i is
 * the leading coefficient (i-1)! used by zeta_i). Throws std::out_of_range
 * outside that triangle.
 */
[[nodiscard]] std::int64_t a_coeff(int i, int j, int r);

/// Matrix polynomial with n x n coefficients in ascending powers.
class MatrixPolynomial {
 public:
  MatrixPolynomial() = default;
  MatrixPolynomial(std::vector<Mat> coeffs, int n) : coeffs_(std::move(coeffs)), n_(n) {}

  [[nodiscard]] Mat operator()(double s) const;
  /// -1 for the zero polynomial.
  [[nodiscard]] int degree() const;
  [[nodiscard]] const std::vector<Mat>& coeffs() const { return coeffs_; }

 private:
  std::vector<Mat> coeffs_;
  int n_ = 0;
};

/**
 * @brief S_0..S_{r-1} with S_{r-1} = 0, S_{r-2} = -R_{r-1} and
 * S_{j-1}(s) = -R_j - s S_j(s).
 */
struct MatrixPolynomialFamily {
  int r = 0;
  int n = 0;
  std::vector<MatrixPolynomial> S;

  /// alpha_j(s) = (-s)^{r-1-j} I + S_j(s), 0 <= j <= r-1.
  [[nodiscard]] Mat alpha(int j, double s) const;
};

[[nodiscard]] MatrixPolynomialFamily s_polynomials(const std::vector<Mat>& R);

/// beta_j(s) = (-1)^{r-j} prod_{k=1}^{r-1-j} (s-k).
[[nodiscard]] double beta(int r, int j, double s);

/**
 * @brief Kernel vectors of truncated power-moment matrices.
 *
 * kernel(k) annihilates sum_i c_i i^p for 0 <= p <= r-2-k and has
 * moment(k) = sum_i c_i i^{r-1-k} != 0. kernel(1) is the vector c of the
 * y' - Gamma xi_1 identity and q = (-1)^r moment(1). Vectors have unit norm
 * with the first nonzero entry positive. For r = 2 the moment matrix is empty
 * and c = (1), q = 1.
 */
struct ProofConstants {
  int r = 0;
  Vec c;
  double q = 0.0;
  std::vector<Vec> c_k;      ///< index k = 0..r-1; entries 0 and 1 mirror c for convenience
  std::vector<double> q_k;   ///< q_k = sum_i c^(k)_i i^{r-1-k}

  [[nodiscard]] const Vec& kernel(int k) const { return c_k.at(static_cast<std::size_t>(k)); }
  [[nodiscard]] double moment(int k) const { return q_k.at(static_cast<std::size_t>(k)); }
};

[[nodiscard]] ProofConstants kernel_vectors(int r);

/// A_j^(k) = sum_i c^(k)_i alpha_j(i).
[[nodiscard]] Mat combined_alpha(const MatrixPolynomialFamily& fam, const Vec& c, int j);
/// B_j^(k) = sum_i c^(k)_i beta_j(i).
[[nodiscard]] double combined_beta(int r, const Vec& c, int j);

/// zeta_1..zeta_{r-1} from the defining sum.
[[nodiscard]] std::vector<Vec> zeta_defining(const SystemSpec& sys, const MatrixPolynomialFamily& fam,
                                             const Vec& x, const Vec& xi);
/// zeta_1..zeta_{r-1} from the alpha/beta polynomial representation.
[[nodiscard]] std::vector<Vec> zeta_polynomial(const SystemSpec& sys, const MatrixPolynomialFamily& fam,
                                               const Vec& x, const Vec& xi);

/// Closed-form zeta_i' = f(T) + i S_0(i) y - i zeta_i - (-i)^r y at one state.
[[nodiscard]] Vec zeta_dot_closed_form(const SystemSpec& sys, const MatrixPolynomialFamily& fam, int i,
                                       double t, const Vec& x, const Vec& eta, const Vec& zeta_i);

struct CoefficientCheck {
  std::string name;
  double max_residual = 0.0;  ///< relative
  double tolerance = kCoefficientTol;
  [[nodiscard]] bool pass() const { return max_residual <= tolerance; }
};

/**
 * @brief Vanishing/leading-coefficient identities for given R_i.
 *
 * Checks: kernel moment conditions for c and every c^(k); A_j = B_j = 0 for
 * j >= 2; A_1 = q I and B_1 = -q; A_j^(k) = B_j^(k) = 0 for j >= k+1;
 * A_k^(k) = (-1)^{r-1-k} q_k I and B_k^(k) = (-1)^{r-k} q_k.
 */
[[nodiscard]] std::vector<CoefficientCheck> coefficient_checks(const MatrixPolynomialFamily& fam,
                                                               const ProofConstants& consts);

struct ResidualSummary {
  double dual_form = 0.0;              ///< max_i,t |zeta_def - zeta_poly| / (1 + |zeta|)
  double z_identity = 0.0;             ///< max_t |Z - q (y' - Gamma xi_1) - A_0 y| / (1 + |Z|)
  std::vector<double> zk_reconstruct;  ///< index k - 2, k = 2..r-1
};

struct ZetaDotCheck {
  int samples = 0;
  int failures = 0;
  double worst_ratio = 0.0;  ///< max |fd - closed| / tolerance
  [[nodiscard]] bool pass() const { return samples > 0 && failures == 0; }
};

struct EpsSigmaBound {
  double lambda_min_sym = 0.0;  ///< smallest eigenvalue of (Gamma + Gamma^T) / 2
  double lambda_max = 0.0;      ///< spectral radius of Gamma
  double yref_dot_sup = 0.0;
  double phi_sup = 0.0;
  double phi_log_rate_sup = 0.0;   ///< sup |phi' / phi|
  double dy_minus_gamma_xi_sup = 0.0;
  double sigma = 0.0;
  double eps_min = 0.0;            ///< sqrt(sigma / (1 + sigma))
  double observed_max = 0.0;       ///< max_t phi |e|
  double initial_ratio = 0.0;      ///< phi(t0) |e(t0)|
  double margin = 0.0;             ///< 1 - observed_max
  bool covered = false;            ///< observed_max <= eps_min
  bool holds = false;              ///< observed_max <= max(eps_min, observed_max) < 1
};

[[nodiscard]] double eps_from_sigma(double sigma);

struct DiagnosticsReport {
  int r = 0;
  ProofConstants constants;
  std::vector<Vec> zeta_trace;        ///< per sample, zeta_1..zeta_{r-1} stacked
  std::vector<double> zeta_sup;       ///< max_t |zeta_i|
  ResidualSummary residuals;
  ZetaDotCheck zeta_dot;
  std::vector<CoefficientCheck> coefficients;
  EpsSigmaBound bound;

  [[nodiscard]] bool pass() const;
};

[[nodiscard]] ResidualSummary identity_residuals(const SimResult& sim, const SystemSpec& sys,
                                                 const ProofConstants& consts, const MatrixPolynomialFamily& fam);

/// y^(k) recovered from Z_k, Gamma xi_1..xi_k and y..y^(k-1) at one sample.
[[nodiscard]] Vec zk_reconstruct(const SystemSpec& sys, const ProofConstants& consts,
                                 const MatrixPolynomialFamily& fam, const Vec& x, const Vec& xi, int k);

/// Finite-difference check of zeta_i' at @p count evenly spaced interior samples.
[[nodiscard]] ZetaDotCheck zeta_dot_check(const SimResult& sim, const SystemSpec& sys,
                                          const MatrixPolynomialFamily& fam, int count = 100);

[[nodiscard]] EpsSigmaBound eps_sigma_bound(const SimResult& sim, const Problem& p);

[[nodiscard]] DiagnosticsReport diagnose(const SimResult& sim, const Problem& p);

}  // namespace funnel::analysis

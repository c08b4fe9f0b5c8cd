#include "funnel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace funnel::analysis {

namespace {

double ipow(double base, int exp) {
  double out = 1.0;
  for (int k = 0; k < exp; ++k) out *= base;
  return out;
}

double sign_pow(int exp) { return (exp % 2 == 0) ? 1.0 : -1.0; }

// y^(j) segment of the stacked plant state.
auto deriv(const Vec& x, int n, int j) { return x.segment(static_cast<Eigen::Index>(j) * n, n); }

// xi_j for 1 <= j <= r-1.
auto filt(const Vec& xi, int n, int j) { return xi.segment(static_cast<Eigen::Index>(j - 1) * n, n); }

Vec moments(const Vec& c, int max_power) {
  Vec m = Vec::Zero(max_power + 1);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= max_power; ++k) {
      m[k] += c[i] * p;
      p *= static_cast<double>(i + 1);
    }
  }
  return m;
}

// Kernel vector supported on the first `lead` nodes plus node `free_idx`
// (0-based) whose entry is fixed to one; the rest is a square Vandermonde solve.
Vec supported_kernel(int r, int lead, int free_idx) {
  const int nodes = r - 1;
  Vec c = Vec::Zero(nodes);
  c[free_idx] = 1.0;
  if (lead > 0) {
    Mat V(lead, lead);
    Vec rhs(lead);
    for (int p = 0; p < lead; ++p) {
      for (int i = 0; i < lead; ++i) V(p, i) = ipow(static_cast<double>(i + 1), p);
      rhs[p] = -ipow(static_cast<double>(free_idx + 1), p);
    }
    c.head(lead) = V.fullPivLu().solve(rhs);
  }
  c /= c.norm();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0) {
      if (c[i] < 0.0) c = -c;
      break;
    }
  }
  return c;
}

struct Accumulator {
  CoefficientCheck check;
  void vanish(double residual) { check.max_residual = std::max(check.max_residual, residual); }
};

double rel(double residual, double scale) { return residual / std::max(scale, std::numeric_limits<double>::min()); }

}  // namespace

std::int64_t a_coeff(int i, int j, int r) {
  if (r < 2 || i < 1 || i > r - 1 || j < r - i || j > r - 1) {
    throw std::out_of_range("a_coeff: (i, j) = (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside the admissible range for r = " + std::to_string(r));
  }
  std::int64_t prod = 1;
  for (int k = 1; k <= r - 1 - j; ++k) prod *= static_cast<std::int64_t>(i - k);
  return prod;
}

Mat MatrixPolynomial::operator()(double s) const {
  Mat out = Mat::Zero(n_, n_);
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) out = out * s + *it;
  return out;
}

int MatrixPolynomial::degree() const {
  for (int d = static_cast<int>(coeffs_.size()) - 1; d >= 0; --d) {
    if (!coeffs_[static_cast<std::size_t>(d)].isZero(0.0)) return d;
  }
  return -1;
}

Mat MatrixPolynomialFamily::alpha(int j, double s) const {
  return ipow(-s, r - 1 - j) * Mat::Identity(n, n) + S[static_cast<std::size_t>(j)](s);
}

MatrixPolynomialFamily s_polynomials(const std::vector<Mat>& R) {
  if (R.empty()) throw std::invalid_argument("s_polynomials: need R_1..R_{r-1} with r >= 2");
  MatrixPolynomialFamily fam;
  fam.r = static_cast<int>(R.size()) + 1;
  fam.n = static_cast<int>(R.front().rows());
  const int r = fam.r;
  const int n = fam.n;
  std::vector<std::vector<Mat>> coeffs(static_cast<std::size_t>(r));
  coeffs[static_cast<std::size_t>(r - 2)] = {-R[static_cast<std::size_t>(r - 2)]};
  for (int j = r - 2; j >= 1; --j) {
    // S_{j-1}(s) = -R_j - s S_j(s)
    const auto& sj = coeffs[static_cast<std::size_t>(j)];
    std::vector<Mat> next(sj.size() + 1, Mat::Zero(n, n));
    next[0] = -R[static_cast<std::size_t>(j - 1)];
    for (std::size_t p = 0; p < sj.size(); ++p) next[p + 1] = -sj[p];
    coeffs[static_cast<std::size_t>(j - 1)] = std::move(next);
  }
  for (auto& c : coeffs) fam.S.emplace_back(std::move(c), n);
  return fam;
}

double beta(int r, int j, double s) {
  double prod = 1.0;
  for (int k = 1; k <= r - 1 - j; ++k) prod *= (s - k);
  return sign_pow(r - j) * prod;
}

ProofConstants kernel_vectors(int r) {
  if (r < 2) throw std::invalid_argument("kernel_vectors: r must be >= 2");
  ProofConstants pc;
  pc.r = r;
  pc.c_k.assign(static_cast<std::size_t>(r), Vec());
  pc.q_k.assign(static_cast<std::size_t>(r), 0.0);
  for (int k = 1; k <= r - 1; ++k) {
    const int lead = r - 1 - k;  // rows of the truncated moment matrix
    const int power = r - 1 - k;
    Vec chosen;
    double q = 0.0;
    // The first candidate always works for distinct nodes; the loop reselects
    // inside the kernel should the moment ever vanish numerically.
    for (int free_idx = r - 2; free_idx >= lead; --free_idx) {
      Vec c = supported_kernel(r, lead, free_idx);
      const double mk = moments(c, power)[power];
      if (std::abs(mk) > 1e-6 * c.norm()) {
        chosen = std::move(c);
        q = mk;
        break;
      }
    }
    if (chosen.size() == 0) throw std::runtime_error("kernel_vectors: no kernel vector with nonzero moment");
    pc.c_k[static_cast<std::size_t>(k)] = chosen;
    pc.q_k[static_cast<std::size_t>(k)] = q;
  }
  pc.c = pc.c_k[1];
  pc.c_k[0] = pc.c;
  pc.q_k[0] = pc.q_k[1];
  pc.q = sign_pow(r) * pc.q_k[1];
  return pc;
}

Mat combined_alpha(const MatrixPolynomialFamily& fam, const Vec& c, int j) {
  Mat out = Mat::Zero(fam.n, fam.n);
  for (Eigen::Index i = 0; i < c.size(); ++i) out += c[i] * fam.alpha(j, static_cast<double>(i + 1));
  return out;
}

double combined_beta(int r, const Vec& c, int j) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) out += c[i] * beta(r, j, static_cast<double>(i + 1));
  return out;
}

std::vector<Vec> zeta_defining(const SystemSpec& sys, const MatrixPolynomialFamily& fam, const Vec& x,
                               const Vec& xi) {
  const int r = sys.r;
  const int n = sys.n;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(r - 1));
  for (int i = 1; i <= r - 1; ++i) {
    const double s = static_cast<double>(i);
    Vec z = Vec::Zero(n);
    for (int j = r - i; j <= r - 1; ++j) {
      const double a = static_cast<double>(a_coeff(i, j, r));
      z += sign_pow(r - 1 - j) * (ipow(s, r - 1 - j) * deriv(x, n, j) - a * (sys.gamma * filt(xi, n, j)));
    }
    for (int j = 0; j <= r - 2; ++j) z += fam.S[static_cast<std::size_t>(j)](s) * deriv(x, n, j);
    for (int j = i + 1; j <= r; ++j) z += ipow(-s, j - 1) * deriv(x, n, r - j);
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<Vec> zeta_polynomial(const SystemSpec& sys, const MatrixPolynomialFamily& fam, const Vec& x,
                                 const Vec& xi) {
  const int r = sys.r;
  const int n = sys.n;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(r - 1));
  for (int i = 1; i <= r - 1; ++i) {
    const double s = static_cast<double>(i);
    Vec z = Vec::Zero(n);
    for (int j = 0; j <= r - 1; ++j) z += fam.alpha(j, s) * deriv(x, n, j);
    for (int j = 1; j <= r - 1; ++j) z += beta(r, j, s) * (sys.gamma * filt(xi, n, j));
    out.push_back(std::move(z));
  }
  return out;
}

Vec zeta_dot_closed_form(const SystemSpec& sys, const MatrixPolynomialFamily& fam, int i, double t,
                         const Vec& x, const Vec& eta, const Vec& zeta_i) {
  const int n = sys.n;
  const double s = static_cast<double>(i);
  const OutputStack stack(x, n);
  const OperatorOutput op = operator_eval(sys.op, t, eta, stack);
  const Vec y = deriv(x, n, 0);
  return sys.f(op.w) + s * (fam.S[0](s) * y) - s * zeta_i - ipow(-s, sys.r) * y;
}

std::vector<CoefficientCheck> coefficient_checks(const MatrixPolynomialFamily& fam, const ProofConstants& pc) {
  const int r = fam.r;
  const int n = fam.n;
  const Mat I = Mat::Identity(n, n);

  auto alpha_scale = [&](const Vec& c, int j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) s += std::abs(c[i]) * fam.alpha(j, static_cast<double>(i + 1)).norm();
    return s;
  };
  auto beta_scale = [&](const Vec& c, int j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) s += std::abs(c[i] * beta(r, j, static_cast<double>(i + 1)));
    return s;
  };

  Accumulator moment_zero{{"kernel moments vanish (p <= r-2-k)"}};
  Accumulator moment_nonzero{{"kernel leading moment nonzero (|q_k| > 1e-6 |c|)", 0.0, 1.0}};
  Accumulator a_vanish{{"A_j = 0 for j >= 2"}};
  Accumulator b_vanish{{"B_j = 0 for j >= 2"}};
  Accumulator a_lead{{"A_1 = q I"}};
  Accumulator b_lead{{"B_1 = -q"}};
  Accumulator ak_vanish{{"A_j^(k) = 0 for j >= k+1"}};
  Accumulator bk_vanish{{"B_j^(k) = 0 for j >= k+1"}};
  Accumulator ak_lead{{"A_k^(k) = (-1)^(r-1-k) q_k I"}};
  Accumulator bk_lead{{"B_k^(k) = (-1)^(r-k) q_k"}};

  for (int k = 1; k <= r - 1; ++k) {
    const Vec& c = pc.kernel(k);
    const double cn = c.norm();
    const int top = r - 1 - k;
    const Vec m = moments(c, top);
    for (int p = 0; p < top; ++p) moment_zero.vanish(rel(std::abs(m[p]), cn * ipow(r, p)));
    // nonzero check expressed as a ratio that must stay <= 1
    moment_nonzero.vanish(rel(1e-6 * cn, std::abs(m[top])));
  }

  for (int j = 2; j <= r - 1; ++j) {
    a_vanish.vanish(rel(combined_alpha(fam, pc.c, j).norm(), alpha_scale(pc.c, j)));
    b_vanish.vanish(rel(std::abs(combined_beta(r, pc.c, j)), beta_scale(pc.c, j)));
  }
  a_lead.vanish(rel((combined_alpha(fam, pc.c, 1) - pc.q * I).norm(), alpha_scale(pc.c, 1)));
  b_lead.vanish(rel(std::abs(combined_beta(r, pc.c, 1) + pc.q), beta_scale(pc.c, 1)));

  for (int k = 2; k <= r - 1; ++k) {
    const Vec& c = pc.kernel(k);
    for (int j = k + 1; j <= r - 1; ++j) {
      ak_vanish.vanish(rel(combined_alpha(fam, c, j).norm(), alpha_scale(c, j)));
      bk_vanish.vanish(rel(std::abs(combined_beta(r, c, j)), beta_scale(c, j)));
    }
    const double qk = pc.moment(k);
    ak_lead.vanish(rel((combined_alpha(fam, c, k) - sign_pow(r - 1 - k) * qk * I).norm(), alpha_scale(c, k)));
    bk_lead.vanish(rel(std::abs(combined_beta(r, c, k) - sign_pow(r - k) * qk), beta_scale(c, k)));
  }

  return {moment_zero.check, moment_nonzero.check, a_vanish.check, b_vanish.check, a_lead.check,
          b_lead.check,      ak_vanish.check,      bk_vanish.check, ak_lead.check,  bk_lead.check};
}

Vec zk_reconstruct(const SystemSpec& sys, const ProofConstants& pc, const MatrixPolynomialFamily& fam,
                   const Vec& x, const Vec& xi, int k) {
  const int r = sys.r;
  const int n = sys.n;
  if (k < 2 || k > r - 1) throw std::out_of_range("zk_reconstruct: k must lie in [2, r-1]");
  const Vec& c = pc.kernel(k);
  const auto zeta = zeta_defining(sys, fam, x, xi);
  Vec rhs = Vec::Zero(n);
  for (int i = 1; i <= r - 1; ++i) rhs += c[i - 1] * zeta[static_cast<std::size_t>(i - 1)];
  for (int j = 1; j <= k; ++j) rhs -= combined_beta(r, c, j) * (sys.gamma * filt(xi, n, j));
  for (int j = 0; j <= k - 1; ++j) rhs -= combined_alpha(fam, c, j) * deriv(x, n, j);
  return rhs / (sign_pow(r - 1 - k) * pc.moment(k));
}

ResidualSummary identity_residuals(const SimResult& sim, const SystemSpec& sys, const ProofConstants& pc,
                                   const MatrixPolynomialFamily& fam) {
  const int r = sys.r;
  const int n = sys.n;
  ResidualSummary out;
  out.zk_reconstruct.assign(static_cast<std::size_t>(std::max(r - 2, 0)), 0.0);
  const Mat A0 = combined_alpha(fam, pc.c, 0);
  for (const Sample& s : sim.samples) {
    const auto def = zeta_defining(sys, fam, s.x, s.xi);
    const auto poly = zeta_polynomial(sys, fam, s.x, s.xi);
    Vec Z = Vec::Zero(n);
    for (int i = 1; i <= r - 1; ++i) {
      const auto& zd = def[static_cast<std::size_t>(i - 1)];
      const auto& zp = poly[static_cast<std::size_t>(i - 1)];
      out.dual_form = std::max(out.dual_form, (zd - zp).norm() / (1.0 + zd.norm()));
      Z += pc.c[i - 1] * zd;
    }
    const Vec rhs = pc.q * (deriv(s.x, n, 1) - sys.gamma * filt(s.xi, n, 1)) + A0 * deriv(s.x, n, 0);
    out.z_identity = std::max(out.z_identity, (Z - rhs).norm() / (1.0 + Z.norm()));
    for (int k = 2; k <= r - 1; ++k) {
      const Vec rec = zk_reconstruct(sys, pc, fam, s.x, s.xi, k);
      const auto stored = deriv(s.x, n, k);
      auto& slot = out.zk_reconstruct[static_cast<std::size_t>(k - 2)];
      slot = std::max(slot, (rec - stored).norm() / (1.0 + stored.norm()));
    }
  }
  return out;
}

ZetaDotCheck zeta_dot_check(const SimResult& sim, const SystemSpec& sys, const MatrixPolynomialFamily& fam,
                            int count) {
  ZetaDotCheck out;
  const auto& smp = sim.samples;
  const std::size_t N = smp.size();
  if (N < 3 || count <= 0) return out;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const int r = sys.r;

  std::vector<std::size_t> idx;
  for (int m = 0; m < count; ++m) {
    const std::size_t k =
        1 + static_cast<std::size_t>((static_cast<double>(m) + 0.5) / count * static_cast<double>(N - 2));
    if (k >= 1 && k + 1 < N && (idx.empty() || idx.back() != k)) idx.push_back(k);
  }

  for (const std::size_t k : idx) {
    const Sample& a = smp[k - 1];
    const Sample& b = smp[k];
    const Sample& c = smp[k + 1];
    const double h1 = b.t - a.t;
    const double h2 = c.t - b.t;
    const double ca = -h2 / (h1 * (h1 + h2));
    const double cb = (h2 - h1) / (h1 * h2);
    const double cc = h1 / (h2 * (h1 + h2));
    const auto za = zeta_defining(sys, fam, a.x, a.xi);
    const auto zb = zeta_defining(sys, fam, b.x, b.xi);
    const auto zc = zeta_defining(sys, fam, c.x, c.xi);
    ++out.samples;
    bool ok = true;
    for (int i = 1; i <= r - 1; ++i) {
      const auto ii = static_cast<std::size_t>(i - 1);
      const Vec fd = ca * za[ii] + cb * zb[ii] + cc * zc[ii];
      const Vec da = zeta_dot_closed_form(sys, fam, i, a.t, a.x, a.eta, za[ii]);
      const Vec db = zeta_dot_closed_form(sys, fam, i, b.t, b.x, b.eta, zb[ii]);
      const Vec dc = zeta_dot_closed_form(sys, fam, i, c.t, c.x, c.eta, zc[ii]);
      const double slope = std::max((db - da).norm() / h1, (dc - db).norm() / h2);
      const double rounding =
          16.0 * kEps * (std::abs(ca) * za[ii].norm() + std::abs(cb) * zb[ii].norm() + std::abs(cc) * zc[ii].norm());
      const double tol = 10.0 * std::max(h1, h2) * slope + rounding;
      const double err = (fd - db).norm();
      const double ratio = tol > 0.0 ? err / tol : (err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      out.worst_ratio = std::max(out.worst_ratio, ratio);
      ok = ok && ratio <= 1.0;
    }
    if (!ok) ++out.failures;
  }
  return out;
}

double eps_from_sigma(double sigma) { return sigma <= 0.0 ? 0.0 : std::sqrt(sigma / (1.0 + sigma)); }

EpsSigmaBound eps_sigma_bound(const SimResult& sim, const Problem& p) {
  EpsSigmaBound b;
  const int n = p.sys.n;
  b.lambda_min_sym = gamma_sym_min_eig(p.sys.gamma);
  b.lambda_max = gamma_spectral_radius(p.sys.gamma);
  if (sim.samples.empty()) return b;

  const double t0 = sim.samples.front().t;
  const double t1 = sim.samples.back().t;
  auto visit = [&](double t) {
    const auto fv = funnel_eval(p.funnel, t);
    b.phi_sup = std::max(b.phi_sup, std::abs(fv.phi));
    b.phi_log_rate_sup = std::max(b.phi_log_rate_sup, std::abs(fv.dphi / fv.phi));
    b.yref_dot_sup = std::max(b.yref_dot_sup, reference_eval(p.ref, t).dy.norm());
  };
  constexpr int kDense = 10000;
  for (int k = 0; k < kDense; ++k) visit(t0 + (t1 - t0) * k / (kDense - 1));
  for (const Sample& s : sim.samples) {
    visit(s.t);
    const Vec d = s.x.segment(n, n) - p.sys.gamma * s.xi.head(n);
    b.dy_minus_gamma_xi_sup = std::max(b.dy_minus_gamma_xi_sup, d.norm());
    b.observed_max = std::max(b.observed_max, s.funnel_ratio);
  }
  b.initial_ratio = sim.samples.front().funnel_ratio;
  b.sigma = (b.yref_dot_sup * b.phi_sup + b.phi_log_rate_sup +
             b.phi_sup * (b.lambda_max * p.params.theta_hat.front() + b.dy_minus_gamma_xi_sup)) /
            b.lambda_min_sym;
  b.eps_min = eps_from_sigma(b.sigma);
  b.margin = 1.0 - b.observed_max;
  b.covered = b.observed_max <= b.eps_min;
  b.holds = b.observed_max <= std::max(b.eps_min, b.observed_max) && std::max(b.eps_min, b.observed_max) < 1.0;
  return b;
}

bool DiagnosticsReport::pass() const {
  bool ok = residuals.dual_form <= kDualFormTol && residuals.z_identity <= kIdentityTol;
  for (double v : residuals.zk_reconstruct) ok = ok && v <= kIdentityTol;
  for (const auto& c : coefficients) ok = ok && c.pass();
  ok = ok && (zeta_dot.samples == 0 || zeta_dot.pass());
  return ok && bound.holds;
}

DiagnosticsReport diagnose(const SimResult& sim, const Problem& p) {
  DiagnosticsReport rep;
  rep.r = p.sys.r;
  const auto fam = s_polynomials(p.sys.R);
  rep.constants = kernel_vectors(p.sys.r);
  rep.zeta_sup.assign(static_cast<std::size_t>(p.sys.r - 1), 0.0);
  rep.zeta_trace.reserve(sim.samples.size());
  for (const Sample& s : sim.samples) {
    const auto z = zeta_defining(p.sys, fam, s.x, s.xi);
    Vec stacked(static_cast<Eigen::Index>(z.size()) * p.sys.n);
    for (std::size_t i = 0; i < z.size(); ++i) {
      stacked.segment(static_cast<Eigen::Index>(i) * p.sys.n, p.sys.n) = z[i];
      rep.zeta_sup[i] = std::max(rep.zeta_sup[i], z[i].norm());
    }
    rep.zeta_trace.push_back(std::move(stacked));
  }
  rep.residuals = identity_residuals(sim, p.sys, rep.constants, fam);
  rep.zeta_dot = zeta_dot_check(sim, p.sys, fam);
  rep.coefficients = coefficient_checks(fam, rep.constants);
  rep.bound = eps_sigma_bound(sim, p);
  return rep;
}

}  // namespace funnel::analysis

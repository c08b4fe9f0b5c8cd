#include "funnel/integrator.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace funnel {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0, kB5 = -2187.0 / 6784.0,
                 kB6 = 11.0 / 84.0;
// b - b_hat
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

constexpr double kOrder = 5.0;
constexpr double kAlpha = 0.7 / kOrder;
constexpr double kBeta = 0.4 / kOrder;
constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;

struct Layout {
  Eigen::Index nx, nxi, neta;
  int n, levels;
};

Layout layout_of(const Problem& p) {
  const int n = p.sys.n;
  return {static_cast<Eigen::Index>(p.sys.r) * n, static_cast<Eigen::Index>(p.sys.r - 1) * n, p.sys.op.m, n,
          p.sys.r - 1};
}

std::vector<Vec> split_filters(const Vec& xi, int n, int levels) {
  std::vector<Vec> out(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) out[static_cast<std::size_t>(i)] = xi.segment(static_cast<Eigen::Index>(i) * n, n);
  return out;
}

struct Evaluation {
  Vec dz;
  bool tainted = false;
};

// Closed-loop field on the flat state z = (x, xi, eta). Outside the domain the
// denominators are clamped and the result flagged as tainted.
class ClosedLoopField {
 public:
  ClosedLoopField(const Problem& p, double guard) : p_(p), lay_(layout_of(p)), guard_(guard) {}

  Evaluation operator()(double t, const Vec& z) const {
    const Vec x = z.head(lay_.nx);
    const Vec xi_flat = z.segment(lay_.nx, lay_.nxi);
    const Vec eta = z.tail(lay_.neta);
    const auto xi = split_filters(xi_flat, lay_.n, lay_.levels);
    const double phi = funnel_eval(p_.funnel, t).phi;
    const Vec e = x.head(lay_.n) - reference_eval(p_.ref, t).y;
    const ThetaChain chain = evaluate_theta_chain(e, xi, phi, p_.params, guard_, true);
    const Vec u = -p_.params.gain * chain.theta.back() / chain.denom.back();
    Evaluation ev{Vec(z.size()), chain.clamped};
    PlantDerivative pd;
    try {
      pd = plant_rhs(p_.sys, t, x, u, eta);
    } catch (const NonFiniteError&) {
      // Stages far outside the domain may drive f to overflow; the step is rejected as non-finite.
      ev.dz.setConstant(std::numeric_limits<double>::quiet_NaN());
      return ev;
    }
    const auto dxi = filter_rhs(xi, u, p_.sys.r);

    ev.dz.head(lay_.nx) = pd.dx;
    for (int i = 0; i < lay_.levels; ++i) {
      ev.dz.segment(lay_.nx + static_cast<Eigen::Index>(i) * lay_.n, lay_.n) = dxi[static_cast<std::size_t>(i)];
    }
    ev.dz.tail(lay_.neta) = pd.deta;
    return ev;
  }

  // Normalized denominators at (t, z); the chain is continued through
  // violations so every level gets a margin.
  ThetaChain domain(double t, const Vec& z, double guard) const {
    const auto xi = split_filters(z.segment(lay_.nx, lay_.nxi), lay_.n, lay_.levels);
    const double phi = funnel_eval(p_.funnel, t).phi;
    const Vec e = z.head(lay_.n) - reference_eval(p_.ref, t).y;
    return evaluate_theta_chain(e, xi, phi, p_.params, guard, true);
  }

  const Layout& layout() const { return lay_; }

 private:
  const Problem& p_;
  Layout lay_;
  double guard_;
};

int nearest_level(const ThetaChain& chain) {
  const auto it = std::min_element(chain.margin.begin(), chain.margin.end());
  return static_cast<int>(std::distance(chain.margin.begin(), it));
}

}  // namespace

std::vector<std::string> validate_problem(const Problem& p, double t_end) {
  std::vector<std::string> errors = validate_system(p.sys);
  const bool sys_ok = errors.empty();
  for (auto& e : validate_params(p.params, p.sys.r, p.sys.n)) errors.push_back(std::move(e));
  for (auto& e : validate_funnel(p.funnel, p.sys.t0, t_end)) errors.push_back(std::move(e));
  for (auto& e : validate_reference(p.ref)) errors.push_back(std::move(e));
  if (sys_ok && reference_dim(p.ref) != p.sys.n) {
    errors.push_back("reference: dimension " + std::to_string(reference_dim(p.ref)) + " does not match plant n = " +
                     std::to_string(p.sys.n));
  }
  return errors;
}

std::vector<std::string> validate_integrator(const IntegratorConfig& cfg, double t0) {
  std::vector<std::string> errors;
  if (!(cfg.rel_tol > 0.0)) errors.emplace_back("integrator.rel_tol must be > 0");
  if (!(cfg.abs_tol > 0.0)) errors.emplace_back("integrator.abs_tol must be > 0");
  if (!(cfg.h_min > 0.0)) errors.emplace_back("integrator.h_min must be > 0");
  if (!(cfg.h_max > cfg.h_min)) errors.emplace_back("integrator.h_max must exceed integrator.h_min");
  if (!(cfg.h_init > 0.0)) errors.emplace_back("integrator.h_init must be > 0");
  if (!(cfg.t_end > t0)) errors.emplace_back("integrator.t_end must exceed the start time t0");
  if (!(cfg.guard_factor >= 0.0 && cfg.guard_factor < 1.0)) {
    errors.emplace_back("integrator.guard_factor must lie in [0, 1)");
  }
  return errors;
}

ClosedLoopDerivative closed_loop_rhs(const ClosedLoopState& s, const Problem& p) {
  const int n = p.sys.n;
  const auto xi = split_filters(s.xi, n, p.sys.r - 1);
  const double phi = funnel_eval(p.funnel, s.t).phi;
  const Vec e = s.x.head(n) - reference_eval(p.ref, s.t).y;
  const ThetaChain chain = theta_chain(e, xi, phi, p.params);
  const Vec u = control_input(chain, p.params);
  PlantDerivative pd = plant_rhs(p.sys, s.t, s.x, u, s.eta);
  const auto dxi = filter_rhs(xi, u, p.sys.r);
  ClosedLoopDerivative d{std::move(pd.dx), Vec(s.xi.size()), std::move(pd.deta)};
  for (std::size_t i = 0; i < dxi.size(); ++i) d.dxi.segment(static_cast<Eigen::Index>(i) * n, n) = dxi[i];
  return d;
}

ClosedLoopState initial_state(const Problem& p) {
  ClosedLoopState s;
  s.t = p.sys.t0;
  s.x = initial_plant_state(p.sys);
  s.xi.resize(static_cast<Eigen::Index>(p.sys.r - 1) * p.sys.n);
  for (int i = 0; i < p.sys.r - 1; ++i) {
    s.xi.segment(static_cast<Eigen::Index>(i) * p.sys.n, p.sys.n) = p.params.xi0[static_cast<std::size_t>(i)];
  }
  s.eta = initial_operator_state(p.sys);
  return s;
}

Sample make_sample(const Problem& p, double t, double h, const Vec& x, const Vec& xi, const Vec& eta) {
  const int n = p.sys.n;
  Sample s;
  s.t = t;
  s.h = h;
  s.x = x;
  s.xi = xi;
  s.eta = eta;
  s.y_ref = reference_eval(p.ref, t).y;
  s.e = x.head(n) - s.y_ref;
  s.phi = funnel_eval(p.funnel, t).phi;
  s.funnel_ratio = s.phi * s.e.norm();
  const ThetaChain chain = theta_chain(s.e, split_filters(xi, n, p.sys.r - 1), s.phi, p.params);
  s.theta = chain.theta;
  s.theta_ratio.resize(static_cast<Eigen::Index>(chain.theta.size()));
  for (std::size_t i = 0; i < chain.theta.size(); ++i) {
    s.theta_ratio[static_cast<Eigen::Index>(i)] = chain.theta[i].norm() / p.params.theta_hat[i];
  }
  s.u = control_input(chain, p.params);
  return s;
}

double SimResult::max_funnel_ratio() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.funnel_ratio);
  return m;
}

std::vector<double> SimResult::max_theta_ratio() const {
  std::vector<double> m;
  for (const auto& s : samples) {
    m.resize(static_cast<std::size_t>(s.theta_ratio.size()), 0.0);
    for (Eigen::Index i = 0; i < s.theta_ratio.size(); ++i) {
      m[static_cast<std::size_t>(i)] = std::max(m[static_cast<std::size_t>(i)], s.theta_ratio[i]);
    }
  }
  return m;
}

double SimResult::max_input_norm() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.u.norm());
  return m;
}

double SimResult::max_error_norm() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.e.norm());
  return m;
}

InfeasibleStart::InfeasibleStart(FeasibilityReport report)
    : std::runtime_error("initial data violate the feasibility conditions: " + report.failed.value_or("?")),
      report_(std::move(report)) {}

StepUnderflow::StepUnderflow(double t, double h, std::string reason, int level, double margin)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "step size underflow at t = " << t << " (h = " << h << ", rejected by " << reason
           << "; nearest domain constraint " << constraint_name(level) << ", margin " << margin << ")";
        return os.str();
      }()),
      t_(t),
      h_(h),
      reason_(std::move(reason)),
      level_(level),
      margin_(margin) {}

SimResult simulate(const Problem& p, const IntegratorConfig& cfg) {
  const auto wall_start = std::chrono::steady_clock::now();
  std::vector<std::string> errors = validate_problem(p, cfg.t_end);
  for (auto& e : validate_integrator(cfg, p.sys.t0)) errors.push_back(std::move(e));
  if (!errors.empty()) throw ValidationError(std::move(errors));

  SimResult res;
  res.config = cfg;
  res.feasibility = initial_feasibility(p.sys, p.params, p.funnel, p.ref);
  if (!res.feasibility.feasible) throw InfeasibleStart(res.feasibility);

  const ClosedLoopField field(p, cfg.guard_factor);
  const Layout& lay = field.layout();
  const ClosedLoopState s0 = initial_state(p);
  Vec z(lay.nx + lay.nxi + lay.neta);
  z << s0.x, s0.xi, s0.eta;
  double t = s0.t;

  auto record = [&](double h) {
    res.samples.push_back(
        make_sample(p, t, h, z.head(lay.nx), z.segment(lay.nx, lay.nxi), z.tail(lay.neta)));
  };
  record(0.0);

  IntegratorStats& st = res.stats;
  st.min_step = std::numeric_limits<double>::infinity();
  const std::size_t dim = static_cast<std::size_t>(z.size());
  const double inv_dim = 1.0 / static_cast<double>(std::max<std::size_t>(dim, 1));
  auto error_norm = [&](const Vec& delta, const Vec& z_new) {
    const Vec scale = (cfg.abs_tol + cfg.rel_tol * z.cwiseAbs().cwiseMax(z_new.cwiseAbs()).array()).matrix();
    return std::sqrt(delta.cwiseQuotient(scale).squaredNorm() * inv_dim);
  };

  Evaluation k1 = field(t, z);
  ++st.rhs_evals;
  double h = std::clamp(cfg.h_init, cfg.h_min, cfg.h_max);
  double err_prev = 1e-4;
  bool last_rejected = false;
  bool retried_taint = false;

  std::string reason;
  int nearest = 0;
  double nearest_margin = 1.0;

  while (t < cfg.t_end) {
    if (st.accepted >= cfg.max_steps) {
      throw std::runtime_error("integrator: step budget exhausted at t = " + std::to_string(t));
    }
    const double remaining = cfg.t_end - t;
    const bool final_step = h >= remaining;
    const double step = final_step ? remaining : h;
    const double t_new = final_step ? cfg.t_end : t + step;

    bool tainted = k1.tainted;
    auto stage = [&](double tc, const Vec& zs) {
      Evaluation ev = field(tc, zs);
      ++st.rhs_evals;
      tainted = tainted || ev.tainted;
      return ev.dz;
    };

    const Vec k2 = stage(t + kC[1] * step, z + step * kA21 * k1.dz);
    const Vec k3 = stage(t + kC[2] * step, z + step * (kA31 * k1.dz + kA32 * k2));
    const Vec k4 = stage(t + kC[3] * step, z + step * (kA41 * k1.dz + kA42 * k2 + kA43 * k3));
    const Vec k5 = stage(t + kC[4] * step, z + step * (kA51 * k1.dz + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const Vec k6 = stage(t + kC[5] * step, z + step * (kA61 * k1.dz + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    const Vec z_new = z + step * (kB1 * k1.dz + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);

    bool ok = z_new.allFinite();
    Evaluation k7;
    if (ok) {
      k7 = field(t_new, z_new);
      ++st.rhs_evals;
      ok = k7.dz.allFinite();
    }
    double err = std::numeric_limits<double>::infinity();
    if (ok) {
      const Vec delta = step * (kE1 * k1.dz + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7.dz);
      err = error_norm(delta, z_new);
      ok = std::isfinite(err);
    }

    bool accept = false;
    double next_h = step;
    if (!ok) {
      ++st.rejected_nonfinite;
      reason = "non-finite state";
      const ThetaChain dom = field.domain(t, z, cfg.guard_factor);
      nearest = nearest_level(dom);
      nearest_margin = dom.margin[static_cast<std::size_t>(nearest)];
      next_h = 0.5 * step;
    } else {
      const ThetaChain dom = field.domain(t_new, z_new, cfg.guard_factor);
      nearest = nearest_level(dom);
      nearest_margin = dom.margin[static_cast<std::size_t>(nearest)];
      if (err > 1.0) {
        ++st.rejected_error;
        reason = "local error tolerance";
        next_h = step * std::max(kFacMin, kSafety * std::pow(err, -1.0 / kOrder));
      } else if (dom.exit_level) {
        ++st.rejected_domain;
        reason = constraint_name(*dom.exit_level);
        nearest = *dom.exit_level;
        nearest_margin = dom.margin[static_cast<std::size_t>(nearest)];
        next_h = 0.5 * step;
      } else if (tainted && !retried_taint) {
        ++st.rejected_taint;
        reason = "stage left the domain";
        retried_taint = true;
        next_h = 0.5 * step;
      } else {
        accept = true;
        const double e = std::max(err, 1e-10);
        double fac = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev, kBeta);
        fac = std::clamp(fac, kFacMin, kFacMax);
        if (last_rejected) fac = std::min(fac, 1.0);
        err_prev = std::max(err, 1e-4);
        next_h = step * fac;
      }
    }

    if (accept) {
      t = t_new;
      z = z_new;
      k1 = std::move(k7);
      ++st.accepted;
      st.min_step = std::min(st.min_step, step);
      st.max_step = std::max(st.max_step, step);
      record(step);
      last_rejected = false;
      retried_taint = false;
      // After a final shortened step keep the previous proposal.
      h = std::min(final_step ? std::max(h, next_h) : next_h, cfg.h_max);
    } else {
      ++st.rejected;
      last_rejected = true;
      h = next_h;
      if (h < cfg.h_min) {
        throw StepUnderflow(t, h, reason, nearest, nearest_margin);
      }
    }
  }

  if (st.accepted == 0) st.min_step = 0.0;
  st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

}  // namespace funnel

#include "funnel/controller.hpp"

#include <cmath>
#include <limits>

namespace funnel {

DomainExit::DomainExit(int level)
    : std::runtime_error("state left the controller domain: " + constraint_name(level)), level_(level) {}

std::string constraint_name(int level) {
  if (level == 0) return "funnel: phi*|e| < 1";
  const auto i = std::to_string(level);
  return "theta_" + i + ": |theta_" + i + "| < theta_hat_" + i;
}

std::vector<std::string> validate_params(const ControllerParams& params, int r, int n) {
  std::vector<std::string> errors;
  if (!(params.gain > 0.0)) errors.emplace_back("controller.gain must be > 0");
  if (static_cast<int>(params.theta_hat.size()) != r - 1) {
    errors.push_back("controller.theta_hat: expected " + std::to_string(r - 1) + " entries, got " +
                     std::to_string(params.theta_hat.size()));
  }
  for (std::size_t i = 0; i < params.theta_hat.size(); ++i) {
    if (!(params.theta_hat[i] > 0.0) || !std::isfinite(params.theta_hat[i])) {
      errors.push_back("controller.theta_hat[" + std::to_string(i) + "] must be > 0");
    }
  }
  if (static_cast<int>(params.xi0.size()) != r - 1) {
    errors.push_back("controller.xi0: expected " + std::to_string(r - 1) + " vectors, got " +
                     std::to_string(params.xi0.size()));
  }
  for (std::size_t i = 0; i < params.xi0.size(); ++i) {
    if (params.xi0[i].size() != n) {
      errors.push_back("controller.xi0[" + std::to_string(i) + "]: expected length " + std::to_string(n) + ", got " +
                       std::to_string(params.xi0[i].size()));
    }
  }
  return errors;
}

ThetaChain evaluate_theta_chain(const Vec& e, const std::vector<Vec>& xi, double phi,
                                const ControllerParams& params, double guard, bool clamp) {
  const std::size_t levels = xi.size();
  ThetaChain chain;
  chain.theta.reserve(levels);
  chain.denom.reserve(levels + 1);

  auto check = [&](double d, double scale, int level) {
    chain.margin.push_back(d / scale);
    const double floor = std::max(guard * scale, std::numeric_limits<double>::min());
    if (d > guard * scale && d > 0.0) return d;
    if (!chain.exit_level) chain.exit_level = level;
    if (!clamp) return std::numeric_limits<double>::quiet_NaN();
    chain.clamped = true;
    return floor;
  };

  double d = check(1.0 - phi * phi * e.squaredNorm(), 1.0, 0);
  chain.denom.push_back(d);
  if (std::isnan(d)) return chain;
  Vec prev = e / d;
  for (std::size_t i = 0; i < levels; ++i) {
    chain.theta.push_back(xi[i] + prev);
    const double hat = params.theta_hat[i];
    d = check(hat * hat - chain.theta.back().squaredNorm(), hat * hat, static_cast<int>(i) + 1);
    chain.denom.push_back(d);
    if (std::isnan(d)) return chain;
    prev = chain.theta.back() / d;
  }
  return chain;
}

ThetaChain theta_chain(const Vec& e, const std::vector<Vec>& xi, double phi, const ControllerParams& params) {
  ThetaChain chain = evaluate_theta_chain(e, xi, phi, params);
  if (chain.exit_level) throw DomainExit(*chain.exit_level);
  return chain;
}

Vec control_input(const ThetaChain& chain, const ControllerParams& params) {
  const auto last = static_cast<int>(params.theta_hat.size());
  if (static_cast<int>(chain.theta.size()) < last || static_cast<int>(chain.denom.size()) <= last) {
    throw DomainExit(chain.exit_level.value_or(last));
  }
  const double d = chain.denom[static_cast<std::size_t>(last)];
  if (!(d > 0.0)) throw DomainExit(last);
  return -params.gain * chain.theta.back() / d;
}

std::vector<Vec> filter_rhs(const std::vector<Vec>& xi, const Vec& u, int r) {
  std::vector<Vec> d(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const int i = static_cast<int>(k) + 1;
    const Vec& next = (k + 1 < xi.size()) ? xi[k + 1] : u;
    d[k] = -static_cast<double>(r - i) * xi[k] + next;
  }
  return d;
}

FeasibilityReport initial_feasibility(const SystemSpec& sys, const ControllerParams& params,
                                      const FunnelSpec& funnel, const ReferenceSpec& ref) {
  FeasibilityReport rep;
  const double phi = funnel_eval(funnel, sys.t0).phi;
  const Vec e = sys.y0.front() - reference_eval(ref, sys.t0).y;
  rep.funnel_ratio = phi * e.norm();
  rep.funnel_ok = rep.funnel_ratio < 1.0;
  if (!rep.funnel_ok) {
    rep.failed = constraint_name(0);
    return rep;
  }
  const ThetaChain chain = evaluate_theta_chain(e, params.xi0, phi, params);
  for (std::size_t i = 0; i < chain.theta.size(); ++i) {
    const double nrm = chain.theta[i].norm();
    rep.theta_norm.push_back(nrm);
    rep.theta_ratio.push_back(nrm / params.theta_hat[i]);
  }
  if (chain.exit_level) {
    rep.failed = constraint_name(*chain.exit_level);
    return rep;
  }
  rep.feasible = true;
  return rep;
}

}  // namespace funnel

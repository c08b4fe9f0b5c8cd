#include "funnel/signals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace funnel {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Three-point endpoint slope with the usual shape-preserving corrections.
double edge_slope(double h0, double h1, double d0, double d1) {
  double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (std::signbit(m) != std::signbit(d0) || d0 == 0.0) {
    m = 0.0;
  } else if (std::signbit(d0) != std::signbit(d1) && std::abs(m) > 3.0 * std::abs(d0)) {
    m = 3.0 * d0;
  }
  return m;
}

}  // namespace

TableFunnel::TableFunnel(std::vector<double> t, std::vector<double> phi)
    : t_(std::move(t)), phi_(std::move(phi)) {
  if (t_.size() != phi_.size()) {
    throw std::invalid_argument("table funnel: t and phi have different lengths");
  }
  if (t_.size() < 2) {
    throw std::invalid_argument("table funnel: at least two samples required");
  }
  for (std::size_t k = 1; k < t_.size(); ++k) {
    if (!(t_[k] > t_[k - 1])) {
      throw std::invalid_argument("table funnel: sample times must be strictly increasing");
    }
  }
  const std::size_t n = t_.size();
  std::vector<double> h(n - 1);
  std::vector<double> d(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = t_[k + 1] - t_[k];
    d[k] = (phi_[k + 1] - phi_[k]) / h[k];
  }
  slope_.assign(n, 0.0);
  if (n == 2) {
    slope_[0] = slope_[1] = d[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (d[k - 1] == 0.0 || d[k] == 0.0 || std::signbit(d[k - 1]) != std::signbit(d[k])) {
      slope_[k] = 0.0;
    } else {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      slope_[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
  }
  slope_[0] = edge_slope(h[0], h[1], d[0], d[1]);
  slope_[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
}

std::size_t TableFunnel::interval(double t) const {
  if (t < t_.front() || t > t_.back() || std::isnan(t)) {
    std::ostringstream os;
    os << "table funnel: t = " << t << " outside [" << t_.front() << ", " << t_.back() << "]";
    throw std::out_of_range(os.str());
  }
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(t_.begin(), it));
  return std::min(k == 0 ? 0 : k - 1, t_.size() - 2);
}

double TableFunnel::value(double t) const {
  const std::size_t k = interval(t);
  const double h = t_[k + 1] - t_[k];
  const double s = (t - t_[k]) / h;
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s * s * (3.0 - 2.0 * s);
  const double h11 = s * s * (s - 1.0);
  return h00 * phi_[k] + h10 * h * slope_[k] + h01 * phi_[k + 1] + h11 * h * slope_[k + 1];
}

double TableFunnel::derivative(double t) const {
  const std::size_t k = interval(t);
  const double h = t_[k + 1] - t_[k];
  const double s = (t - t_[k]) / h;
  const double dh00 = 6.0 * s * (s - 1.0);
  const double dh10 = (1.0 - s) * (1.0 - 3.0 * s);
  const double dh01 = -dh00;
  const double dh11 = s * (3.0 * s - 2.0);
  return (dh00 * phi_[k] + dh01 * phi_[k + 1]) / h + dh10 * slope_[k] + dh11 * slope_[k + 1];
}

FunnelValue funnel_eval(const FunnelSpec& spec, double t) {
  return std::visit(
      overloaded{
          [t](const PaperFunnel&) {
            const double e3 = std::exp(-3.0 * t);
            const double e1 = std::exp(-t);
            const double radius = 2.1 * (e3 + 0.05) + 2.0 * e1 + 0.05;
            const double dradius = -6.3 * e3 - 2.0 * e1;
            return FunnelValue{1.0 / radius, -dradius / (radius * radius)};
          },
          [t](const ExponentialFunnel& f) {
            const double decay = std::exp(-f.b * t);
            const double radius = f.a * decay + f.c;
            const double dradius = -f.a * f.b * decay;
            return FunnelValue{1.0 / radius, -dradius / (radius * radius)};
          },
          [t](const TableFunnel& f) { return FunnelValue{f.value(t), f.derivative(t)}; },
      },
      spec.kind);
}

std::optional<double> funnel_limit(const FunnelSpec& spec) {
  return std::visit(overloaded{
                        [](const PaperFunnel&) -> std::optional<double> { return 1.0 / (2.1 * 0.05 + 0.05); },
                        [](const ExponentialFunnel& f) -> std::optional<double> {
                          if (f.b > 0.0) return 1.0 / f.c;
                          if (f.b == 0.0) return 1.0 / (f.a + f.c);
                          return std::nullopt;
                        },
                        [](const TableFunnel&) -> std::optional<double> { return std::nullopt; },
                    },
                    spec.kind);
}

std::string funnel_kind_name(const FunnelSpec& spec) {
  return std::visit(overloaded{
                        [](const PaperFunnel&) { return std::string("paper"); },
                        [](const ExponentialFunnel&) { return std::string("exponential"); },
                        [](const TableFunnel&) { return std::string("table"); },
                    },
                    spec.kind);
}

std::vector<std::string> validate_funnel(const FunnelSpec& spec, double t0, double t_end) {
  std::vector<std::string> errors;
  if (const auto* table = std::get_if<TableFunnel>(&spec.kind)) {
    if (table->t_min() > t0 || table->t_max() < t_end) {
      std::ostringstream os;
      os << "funnel table covers [" << table->t_min() << ", " << table->t_max() << "] but the horizon is [" << t0
         << ", " << t_end << "]";
      errors.push_back(os.str());
      return errors;
    }
  }
  if (const auto* expo = std::get_if<ExponentialFunnel>(&spec.kind)) {
    if (expo->b < 0.0) {
      errors.emplace_back("funnel.b must be >= 0 (a growing radius makes phi vanish)");
    }
    if (!(expo->c > 0.0) || !(expo->a + expo->c > 0.0)) {
      errors.emplace_back("funnel radius a exp(-b t) + c must stay positive (need c > 0 and a + c > 0)");
    }
  }
  if (const auto limit = funnel_limit(spec); limit && !(*limit > 0.0 && std::isfinite(*limit))) {
    errors.emplace_back("funnel: limit of phi is not a positive finite number");
  }
  if (!errors.empty()) return errors;

  constexpr int kSamples = 10000;
  double min_phi = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (int k = 0; k < kSamples; ++k) {
    const double t = t0 + (t_end - t0) * static_cast<double>(k) / (kSamples - 1);
    const auto v = funnel_eval(spec, t);
    finite = finite && std::isfinite(v.phi) && std::isfinite(v.dphi);
    min_phi = std::min(min_phi, v.phi);
  }
  if (!finite) {
    errors.emplace_back("funnel: phi or its derivative is not finite on the horizon");
  } else if (!(min_phi > 0.0)) {
    std::ostringstream os;
    os << "funnel: inf phi on the horizon is " << min_phi << ", must be > 0";
    errors.push_back(os.str());
  }
  return errors;
}

ReferenceValue reference_eval(const ReferenceSpec& spec, double t) {
  return std::visit(
      overloaded{
          [t](const PaperReference&) {
            ReferenceValue v{Vec(2), Vec(2)};
            const double g = std::exp(-(t - 5.0) * (t - 5.0));
            v.y << g, std::sin(t);
            v.dy << -2.0 * (t - 5.0) * g, std::cos(t);
            return v;
          },
          [t](const SinusoidReference& s) {
            const Vec arg = (s.frequency * t + s.phase).eval();
            return ReferenceValue{s.amplitude.cwiseProduct(arg.array().sin().matrix()),
                                  s.amplitude.cwiseProduct(s.frequency).cwiseProduct(arg.array().cos().matrix())};
          },
          [](const ConstantReference& c) { return ReferenceValue{c.value, Vec::Zero(c.value.size())}; },
          [t](const PolynomialReference& p) {
            const auto n = static_cast<Eigen::Index>(p.coeffs.size());
            ReferenceValue v{Vec::Zero(n), Vec::Zero(n)};
            for (Eigen::Index k = 0; k < n; ++k) {
              const auto& c = p.coeffs[static_cast<std::size_t>(k)];
              // Horner for value and derivative together.
              double value = 0.0;
              double slope = 0.0;
              for (auto it = c.rbegin(); it != c.rend(); ++it) {
                slope = slope * t + value;
                value = value * t + *it;
              }
              v.y[k] = value;
              v.dy[k] = slope;
            }
            return v;
          },
      },
      spec.kind);
}

int reference_dim(const ReferenceSpec& spec) {
  return std::visit(overloaded{
                        [](const PaperReference&) { return 2; },
                        [](const SinusoidReference& s) { return static_cast<int>(s.amplitude.size()); },
                        [](const ConstantReference& c) { return static_cast<int>(c.value.size()); },
                        [](const PolynomialReference& p) { return static_cast<int>(p.coeffs.size()); },
                    },
                    spec.kind);
}

std::string reference_kind_name(const ReferenceSpec& spec) {
  return std::visit(overloaded{
                        [](const PaperReference&) { return std::string("paper"); },
                        [](const SinusoidReference&) { return std::string("sinusoid"); },
                        [](const ConstantReference&) { return std::string("constant"); },
                        [](const PolynomialReference&) { return std::string("polynomial"); },
                    },
                    spec.kind);
}

std::vector<std::string> validate_reference(const ReferenceSpec& spec) {
  std::vector<std::string> errors;
  if (const auto* s = std::get_if<SinusoidReference>(&spec.kind)) {
    if (s->frequency.size() != s->amplitude.size() || s->phase.size() != s->amplitude.size()) {
      errors.emplace_back("reference: amplitude, frequency and phase must have one entry per channel");
    }
  }
  if (const auto* p = std::get_if<PolynomialReference>(&spec.kind)) {
    for (const auto& c : p->coeffs) {
      if (c.empty()) errors.emplace_back("reference: polynomial channel without coefficients");
    }
  }
  if (reference_dim(spec) < 1) errors.emplace_back("reference: output dimension must be >= 1");
  return errors;
}

}  // namespace funnel

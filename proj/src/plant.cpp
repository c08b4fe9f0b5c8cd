#include "funnel/plant.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

namespace funnel {

ValidationError::ValidationError(std::vector<std::string> errors)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << errors.size() << " validation error(s)";
        for (const auto& e : errors) os << "\n  - " << e;
        return os.str();
      }()),
      errors_(std::move(errors)) {}

bool all_finite(const Vec& v) { return v.allFinite(); }

OperatorOutput operator_eval(const OperatorSpec& op, double t, const Vec& eta, const OutputStack& stack) {
  OperatorOutput out;
  out.w = op.readout(t, eta, stack);
  if (!all_finite(out.w)) {
    std::ostringstream os;
    os << "operator '" << op.name << "' produced a non-finite readout at t = " << t;
    throw NonFiniteError(os.str());
  }
  out.eta_dot = op.m > 0 ? op.state_rhs(t, eta, stack) : Vec(0);
  if (!all_finite(out.eta_dot)) {
    std::ostringstream os;
    os << "operator '" << op.name << "' produced non-finite internal dynamics at t = " << t;
    throw NonFiniteError(os.str());
  }
  return out;
}

std::string to_string(IntegralArgument arg) { return arg == IntegralArgument::s ? "s" : "t"; }

double gamma_sym_min_eig(const Mat& gamma) {
  const Mat sym = 0.5 * (gamma + gamma.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double gamma_spectral_radius(const Mat& gamma) {
  Eigen::EigenSolver<Mat> es(gamma, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<std::string> validate_system(const SystemSpec& sys) {
  std::vector<std::string> errors;
  auto shape = [](const Mat& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
  };
  if (sys.r < 2) errors.emplace_back("plant.r must be >= 2");
  if (sys.n < 1) errors.emplace_back("plant.n must be >= 1");
  if (sys.t0 < 0.0) errors.emplace_back("plant.t0 must be >= 0");
  if (!errors.empty()) return errors;

  if (static_cast<int>(sys.R.size()) != sys.r - 1) {
    errors.push_back("plant.R: expected " + std::to_string(sys.r - 1) + " matrices, got " +
                     std::to_string(sys.R.size()));
  }
  for (std::size_t i = 0; i < sys.R.size(); ++i) {
    if (sys.R[i].rows() != sys.n || sys.R[i].cols() != sys.n) {
      errors.push_back("plant.R[" + std::to_string(i) + "]: expected " + std::to_string(sys.n) + "x" +
                       std::to_string(sys.n) + ", got " + shape(sys.R[i]));
    }
  }
  bool gamma_ok = sys.gamma.rows() == sys.n && sys.gamma.cols() == sys.n;
  if (!gamma_ok) {
    errors.push_back("plant.gamma: expected " + std::to_string(sys.n) + "x" + std::to_string(sys.n) + ", got " +
                     shape(sys.gamma));
  } else if (!sys.gamma.allFinite()) {
    errors.emplace_back("plant.gamma: non-finite entries");
  } else if (const double lmin = gamma_sym_min_eig(sys.gamma); !(lmin > 0.0)) {
    std::ostringstream os;
    os << "plant.gamma: symmetric part must be positive definite (smallest eigenvalue " << lmin << ")";
    errors.push_back(os.str());
  }
  if (!sys.f) errors.emplace_back("plant.f: missing nonlinearity");
  if (!sys.op.readout) errors.emplace_back("plant.operator: missing readout");
  if (sys.op.m < 0) errors.emplace_back("plant.operator.m must be >= 0");
  if (sys.op.m > 0 && !sys.op.state_rhs) errors.emplace_back("plant.operator: m > 0 but no state dynamics");
  if (sys.op.eta0.size() != sys.op.m) {
    errors.push_back("plant.operator.eta0: expected length " + std::to_string(sys.op.m) + ", got " +
                     std::to_string(sys.op.eta0.size()));
  }
  if (sys.op.q != sys.q) {
    errors.push_back("plant.q = " + std::to_string(sys.q) + " but the operator reads out " +
                     std::to_string(sys.op.q) + " channels");
  }
  if (static_cast<int>(sys.y0.size()) != sys.r) {
    errors.push_back("plant.y0: expected " + std::to_string(sys.r) + " stacked vectors, got " +
                     std::to_string(sys.y0.size()));
  }
  for (std::size_t j = 0; j < sys.y0.size(); ++j) {
    if (sys.y0[j].size() != sys.n) {
      errors.push_back("plant.y0[" + std::to_string(j) + "]: expected length " + std::to_string(sys.n) +
                       ", got " + std::to_string(sys.y0[j].size()));
    }
  }
  if (!errors.empty()) return errors;

  // Probe readout and f dimensions at the initial point.
  try {
    const Vec x = initial_plant_state(sys);
    const OutputStack stack(x, sys.n);
    const Vec w = sys.op.readout(sys.t0, sys.op.eta0, stack);
    if (w.size() != sys.q) {
      errors.push_back("plant.operator: readout has length " + std::to_string(w.size()) + ", expected q = " +
                       std::to_string(sys.q));
    } else {
      const Vec fw = sys.f(w);
      if (fw.size() != sys.n) {
        errors.push_back("plant.f: output has length " + std::to_string(fw.size()) + ", expected n = " +
                         std::to_string(sys.n));
      }
    }
    if (sys.op.m > 0) {
      const Vec d = sys.op.state_rhs(sys.t0, sys.op.eta0, stack);
      if (d.size() != sys.op.m) {
        errors.push_back("plant.operator: internal dynamics have length " + std::to_string(d.size()) +
                         ", expected m = " + std::to_string(sys.op.m));
      }
    }
  } catch (const std::exception& ex) {
    errors.push_back(std::string("plant: probing f/operator failed: ") + ex.what());
  }
  return errors;
}

void require_valid(const SystemSpec& sys) {
  if (auto errors = validate_system(sys); !errors.empty()) throw ValidationError(std::move(errors));
}

PlantDerivative plant_rhs(const SystemSpec& sys, double t, const Vec& x, const Vec& u, const Vec& eta) {
  const int n = sys.n;
  const int r = sys.r;
  const OutputStack stack(x, n);
  const OperatorOutput op = operator_eval(sys.op, t, eta, stack);
  Vec fw = sys.f(op.w);
  if (!all_finite(fw)) {
    std::ostringstream os;
    os << "plant '" << sys.name << "': f produced a non-finite value at t = " << t;
    throw NonFiniteError(os.str());
  }

  PlantDerivative d{Vec(x.size()), op.eta_dot};
  d.dx.head(static_cast<Eigen::Index>(r - 1) * n) = x.tail(static_cast<Eigen::Index>(r - 1) * n);
  Vec top = fw + sys.gamma * u;
  for (int i = 1; i <= r - 1; ++i) {
    top.noalias() += sys.R[static_cast<std::size_t>(i - 1)] * stack[i];
  }
  d.dx.tail(n) = top;
  return d;
}

Vec initial_plant_state(const SystemSpec& sys) {
  Vec x(static_cast<Eigen::Index>(sys.r) * sys.n);
  for (int j = 0; j < sys.r; ++j) x.segment(static_cast<Eigen::Index>(j) * sys.n, sys.n) = sys.y0[static_cast<std::size_t>(j)];
  return x;
}

Vec initial_operator_state(const SystemSpec& sys, int history_steps) {
  Vec eta = sys.op.eta0;
  if (sys.t0 <= 0.0 || sys.op.m == 0 || !sys.history) return eta;
  const double h = sys.t0 / history_steps;
  auto rhs = [&](double t, const Vec& e) {
    const Vec x = sys.history(t);
    return sys.op.state_rhs(t, e, OutputStack(x, sys.n));
  };
  double t = 0.0;
  for (int k = 0; k < history_steps; ++k) {
    const Vec k1 = rhs(t, eta);
    const Vec k2 = rhs(t + 0.5 * h, eta + 0.5 * h * k1);
    const Vec k3 = rhs(t + 0.5 * h, eta + 0.5 * h * k2);
    const Vec k4 = rhs(t + h, eta + h * k3);
    eta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (k + 1) * h;
  }
  return eta;
}

OperatorSpec identity_operator(int n) {
  OperatorSpec op;
  op.name = "identity";
  op.m = 0;
  op.q = n;
  op.eta0 = Vec(0);
  op.readout = [](double, const Vec&, const OutputStack& s) -> Vec { return s[0]; };
  return op;
}

Vec paper_disturbance(double t) {
  Vec d(2);
  d << 0.2 * std::sin(5.0 * t) + 0.2 * std::cos(7.0 * t), 0.25 * std::sin(9.0 * t) + 0.2 * std::cos(3.0 * t);
  return d;
}

OperatorSpec paper_operator(IntegralArgument arg) {
  OperatorSpec op;
  op.name = "paper_nonlinear/" + to_string(arg);
  op.q = 5;
  // ||y||^2 tanh(||y''||^2)
  auto kernel_input = [](const OutputStack& s) { return s[0].squaredNorm() * std::tanh(s[2].squaredNorm()); };
  auto memoryless = [](double t, const OutputStack& s) {
    Vec w(5);
    const Vec d = paper_disturbance(t);
    const auto y = s[0];
    const auto dy = s[1];
    w[0] = d[0];
    w[1] = d[1];
    w[2] = y[0] * y[0] + std::exp(y[0] - std::abs(dy[0]));
    w[3] = y[1] * y[1] * y[1] - std::sin(dy[1]);
    w[4] = 0.0;
    return w;
  };
  if (arg == IntegralArgument::s) {
    op.m = 1;
    op.eta0 = Vec::Zero(1);
    op.state_rhs = [kernel_input](double, const Vec& eta, const OutputStack& s) -> Vec {
      Vec d(1);
      d[0] = -eta[0] + kernel_input(s);
      return d;
    };
    op.readout = [memoryless](double t, const Vec& eta, const OutputStack& s) -> Vec {
      Vec w = memoryless(t, s);
      w[4] = eta[0];
      return w;
    };
  } else {
    op.m = 0;
    op.eta0 = Vec(0);
    op.readout = [memoryless, kernel_input](double t, const Vec&, const OutputStack& s) -> Vec {
      Vec w = memoryless(t, s);
      w[4] = (1.0 - std::exp(-t)) * kernel_input(s);
      return w;
    };
  }
  return op;
}

SystemSpec make_paper_nonlinear(IntegralArgument arg) {
  SystemSpec sys;
  sys.name = "paper_nonlinear";
  sys.r = 3;
  sys.n = 2;
  sys.q = 5;
  sys.t0 = 0.0;
  Mat r1(2, 2);
  r1 << -1, 0, 0, 0;
  Mat r2(2, 2);
  r2 << 1, -1, 0, 0;
  sys.R = {r1, r2};
  sys.gamma.resize(2, 2);
  sys.gamma << 2.0, 0.2, 0.2, 2.0;
  sys.f = [](const Vec& z) -> Vec {
    Vec out(2);
    out << z[0] + z[2] + z[4] * z[4] * z[4], z[1] + z[3] - z[4];
    return out;
  };
  sys.op = paper_operator(arg);
  sys.y0 = {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)};
  sys.integral_arg = arg;
  return sys;
}

SystemSpec make_chain_integrator(int r, int n, const Mat& gamma) {
  SystemSpec sys;
  sys.name = "chain_integrator";
  sys.r = r;
  sys.n = n;
  sys.q = n;
  sys.R.assign(static_cast<std::size_t>(std::max(r - 1, 0)), Mat::Zero(n, n));
  sys.gamma = gamma;
  sys.f = [n](const Vec&) -> Vec { return Vec::Zero(n); };
  sys.op = identity_operator(n);
  sys.y0.assign(static_cast<std::size_t>(std::max(r, 0)), Vec::Zero(n));
  return sys;
}

SystemSpec make_linear_test(int r, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.2);
  auto random_matrix = [&] {
    Mat m(n, n);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
    return m;
  };
  SystemSpec sys;
  sys.name = "linear_test";
  sys.r = r;
  sys.n = n;
  sys.q = n;
  for (int i = 1; i <= r - 1; ++i) {
    Mat ri = random_matrix();
    if (i == r - 1) ri -= Mat::Identity(n, n);
    sys.R.push_back(ri);
  }
  const Mat g = random_matrix();
  sys.gamma = Mat::Identity(n, n) + 0.5 * (g - g.transpose());
  const Mat feedthrough = random_matrix();
  sys.f = [feedthrough](const Vec& w) -> Vec { return feedthrough * w; };
  sys.op = identity_operator(n);
  sys.y0.assign(static_cast<std::size_t>(r), Vec::Zero(n));
  return sys;
}

}  // namespace funnel

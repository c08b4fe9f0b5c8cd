#include "funnel/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace funnel {

using nlohmann::ordered_json;

namespace {

std::string idx(int i) { return std::to_string(i); }

ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json mat_json(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

ordered_json vecs_json(const std::vector<Vec>& vs) {
  ordered_json a = ordered_json::array();
  for (const auto& v : vs) a.push_back(vec_json(v));
  return a;
}

// JSON has no inf/nan; such values are written as null.
ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

void write_row(std::ostream& out, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << format_number(row[i]);
  }
  out << '\n';
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out << ',';
    out << cols[i];
  }
  out << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("error while writing '" + path.string() + "'");
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v, std::chars_format::general);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> trace_columns(int r, int n) {
  std::vector<std::string> cols{"t"};
  for (int k = 1; k <= n; ++k) cols.push_back("y_" + idx(k));
  for (int k = 1; k <= n; ++k) cols.push_back("yref_" + idx(k));
  cols.insert(cols.end(), {"e_norm", "phi", "funnel_ratio"});
  for (int i = 1; i < r; ++i) {
    for (int k = 1; k <= n; ++k) cols.push_back("xi_" + idx(i) + "_" + idx(k));
  }
  for (int i = 1; i < r; ++i) cols.push_back("theta_" + idx(i) + "_norm");
  for (int k = 1; k <= n; ++k) cols.push_back("u_" + idx(k));
  cols.emplace_back("h");
  return cols;
}

std::vector<std::string> state_columns(int r, int n, int m) {
  std::vector<std::string> cols{"t"};
  for (int j = 0; j < r; ++j) {
    for (int k = 1; k <= n; ++k) cols.push_back("x_" + idx(j) + "_" + idx(k));
  }
  for (int k = 1; k <= m; ++k) cols.push_back("eta_" + idx(k));
  return cols;
}

void write_trace_csv(const std::filesystem::path& path, const SimResult& sim, const Problem& p) {
  const int n = p.sys.n;
  std::ofstream out = open_out(path);
  write_header(out, trace_columns(p.sys.r, n));
  std::vector<double> row;
  for (const Sample& s : sim.samples) {
    row.clear();
    row.push_back(s.t);
    for (int k = 0; k < n; ++k) row.push_back(s.x[k]);
    for (int k = 0; k < n; ++k) row.push_back(s.y_ref[k]);
    row.insert(row.end(), {s.e.norm(), s.phi, s.funnel_ratio});
    for (Eigen::Index k = 0; k < s.xi.size(); ++k) row.push_back(s.xi[k]);
    for (const Vec& th : s.theta) row.push_back(th.norm());
    for (int k = 0; k < n; ++k) row.push_back(s.u[k]);
    row.push_back(s.h);
    write_row(out, row);
  }
  close_checked(out, path);
}

void write_state_csv(const std::filesystem::path& path, const SimResult& sim, const Problem& p) {
  std::ofstream out = open_out(path);
  write_header(out, state_columns(p.sys.r, p.sys.n, p.sys.op.m));
  std::vector<double> row;
  for (const Sample& s : sim.samples) {
    row.assign(1, s.t);
    for (Eigen::Index k = 0; k < s.x.size(); ++k) row.push_back(s.x[k]);
    for (Eigen::Index k = 0; k < s.eta.size(); ++k) row.push_back(s.eta[k]);
    write_row(out, row);
  }
  close_checked(out, path);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(parse_number(cell));
      } catch (const std::invalid_argument&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != table.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(table.header.size()) + " fields, got " + std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::filesystem::path state_path_for(const std::filesystem::path& trace) {
  std::filesystem::path out = trace;
  out.replace_filename(trace.stem().string() + "_state" + trace.extension().string());
  return out;
}

SimResult load_trace(const std::filesystem::path& trace, const std::filesystem::path& state, const Problem& p) {
  const int r = p.sys.r;
  const int n = p.sys.n;
  const int m = p.sys.op.m;
  const CsvTable tr = read_csv(trace);
  const CsvTable sv = read_csv(state);
  if (tr.header != trace_columns(r, n)) {
    throw std::runtime_error("'" + trace.string() + "' does not have the trace columns for r = " + idx(r) +
                             ", n = " + idx(n));
  }
  if (sv.header != state_columns(r, n, m)) {
    throw std::runtime_error("'" + state.string() + "' does not have the state columns for r = " + idx(r) +
                             ", n = " + idx(n) + ", m = " + idx(m));
  }
  if (tr.rows.size() != sv.rows.size()) {
    throw std::runtime_error("trace and state CSV have different row counts");
  }
  const std::size_t xi0 = tr.column("xi_1_1");
  const std::size_t h_col = tr.column("h");
  const std::size_t ratio_col = tr.column("funnel_ratio");
  const std::size_t u0 = tr.column("u_1");

  SimResult sim;
  sim.samples.reserve(tr.rows.size());
  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    const auto& a = tr.rows[k];
    const auto& b = sv.rows[k];
    if (a[0] != b[0]) throw std::runtime_error("trace and state CSV disagree on t at row " + std::to_string(k + 1));
    Vec x(static_cast<Eigen::Index>(r) * n);
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = b[static_cast<std::size_t>(1 + j)];
    Vec eta(m);
    for (int j = 0; j < m; ++j) eta[j] = b[static_cast<std::size_t>(1 + r * n + j)];
    Vec xi(static_cast<Eigen::Index>(r - 1) * n);
    for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = a[xi0 + static_cast<std::size_t>(j)];
    Sample s = make_sample(p, a[0], a[h_col], x, xi, eta);
    auto close = [](double u, double v) { return std::abs(u - v) <= 1e-9 * (1.0 + std::abs(v)); };
    bool ok = close(s.funnel_ratio, a[ratio_col]);
    for (int j = 0; j < n; ++j) ok = ok && close(s.u[j], a[u0 + static_cast<std::size_t>(j)]);
    if (!ok) {
      throw std::runtime_error("row " + std::to_string(k + 1) +
                               " of the trace does not match the configuration (recomputed controller signals differ)");
    }
    sim.samples.push_back(std::move(s));
  }
  sim.stats.accepted = sim.samples.empty() ? 0 : sim.samples.size() - 1;
  return sim;
}

ordered_json config_json(const ExperimentConfig& cfg, const SystemSpec& sys) {
  ordered_json plant;
  plant["name"] = cfg.plant.name;
  plant["r"] = sys.r;
  plant["n"] = sys.n;
  plant["t0"] = sys.t0;
  if (cfg.plant.name == "linear_test") plant["seed"] = cfg.plant.seed;
  plant["integral_arg"] = to_string(sys.integral_arg);
  plant["gamma"] = mat_json(sys.gamma);
  ordered_json R = ordered_json::array();
  for (const Mat& m : sys.R) R.push_back(mat_json(m));
  plant["R"] = R;
  plant["y0"] = vecs_json(sys.y0);

  ordered_json controller;
  controller["gain"] = cfg.controller.gain;
  controller["theta_hat"] = cfg.controller.theta_hat;
  controller["xi0"] = vecs_json(cfg.controller.xi0);

  ordered_json funnel;
  funnel["kind"] = funnel_kind_name(cfg.funnel);
  if (const auto* e = std::get_if<ExponentialFunnel>(&cfg.funnel.kind)) {
    funnel["a"] = e->a;
    funnel["b"] = e->b;
    funnel["c"] = e->c;
  } else if (const auto* tf = std::get_if<TableFunnel>(&cfg.funnel.kind)) {
    funnel["t"] = tf->times();
    funnel["phi"] = tf->values();
  }

  ordered_json reference;
  reference["kind"] = reference_kind_name(cfg.reference);
  if (const auto* s = std::get_if<SinusoidReference>(&cfg.reference.kind)) {
    reference["amplitude"] = vec_json(s->amplitude);
    reference["frequency"] = vec_json(s->frequency);
    reference["phase"] = vec_json(s->phase);
  } else if (const auto* c = std::get_if<ConstantReference>(&cfg.reference.kind)) {
    reference["value"] = vec_json(c->value);
  } else if (const auto* poly = std::get_if<PolynomialReference>(&cfg.reference.kind)) {
    reference["coeffs"] = poly->coeffs;
  }

  const IntegratorConfig& ic = cfg.integrator;
  ordered_json integrator{{"rel_tol", ic.rel_tol}, {"abs_tol", ic.abs_tol},           {"h_init", ic.h_init},
                          {"h_min", ic.h_min},     {"h_max", ic.h_max},               {"t_end", ic.t_end},
                          {"guard_factor", ic.guard_factor}, {"max_steps", ic.max_steps}};

  ordered_json overrides = ordered_json::array();
  for (const auto& [key, value] : cfg.overrides) overrides.push_back({{"key", key}, {"value", value}});

  ordered_json j;
  j["source"] = cfg.source_path;
  j["plant"] = plant;
  j["controller"] = controller;
  j["funnel"] = funnel;
  j["reference"] = reference;
  j["integrator"] = integrator;
  j["overrides"] = overrides;
  return j;
}

ordered_json feasibility_json(const FeasibilityReport& rep, const ControllerParams& params) {
  ordered_json j;
  j["feasible"] = rep.feasible;
  j["funnel_ratio"] = num(rep.funnel_ratio);
  j["funnel_ok"] = rep.funnel_ok;
  ordered_json levels = ordered_json::array();
  for (std::size_t i = 0; i < rep.theta_norm.size(); ++i) {
    levels.push_back({{"level", i + 1},
                      {"theta_norm", num(rep.theta_norm[i])},
                      {"theta_hat", params.theta_hat[i]},
                      {"ratio", num(rep.theta_ratio[i])},
                      {"ok", rep.theta_ratio[i] < 1.0}});
  }
  j["theta"] = levels;
  j["failed"] = rep.failed ? ordered_json(*rep.failed) : ordered_json(nullptr);
  return j;
}

ordered_json stats_json(const IntegratorStats& st) {
  return ordered_json{{"accepted", st.accepted},
                      {"rejected", st.rejected},
                      {"rejected_error", st.rejected_error},
                      {"rejected_domain", st.rejected_domain},
                      {"rejected_taint", st.rejected_taint},
                      {"rejected_nonfinite", st.rejected_nonfinite},
                      {"rhs_evals", st.rhs_evals},
                      {"min_step", st.min_step},
                      {"max_step", st.max_step}};
}

ordered_json invariants_json(const SimResult& sim, const ControllerParams& params) {
  const double funnel = sim.max_funnel_ratio();
  const std::vector<double> theta = sim.max_theta_ratio();
  bool theta_ok = true;
  ordered_json levels = ordered_json::array();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta_ok = theta_ok && theta[i] < 1.0;
    levels.push_back({{"level", i + 1},
                      {"max_ratio", num(theta[i])},
                      {"max_norm", num(theta[i] * params.theta_hat[i])},
                      {"theta_hat", params.theta_hat[i]}});
  }
  const double u = sim.max_input_norm();
  ordered_json j;
  j["max_funnel_ratio"] = num(funnel);
  j["funnel_ok"] = funnel < 1.0;
  j["theta"] = levels;
  j["theta_ok"] = theta_ok;
  j["max_input_norm"] = num(u);
  j["input_finite"] = std::isfinite(u);
  j["max_error_norm"] = num(sim.max_error_norm());
  j["all_hold"] = funnel < 1.0 && theta_ok && std::isfinite(u);
  return j;
}

ordered_json diagnostics_json(const analysis::DiagnosticsReport& rep) {
  ordered_json consts;
  consts["c"] = vec_json(rep.constants.c);
  consts["q"] = rep.constants.q;
  ordered_json ck = ordered_json::array();
  for (int k = 2; k < rep.r; ++k) {
    ck.push_back({{"k", k}, {"c", vec_json(rep.constants.kernel(k))}, {"q_k", rep.constants.moment(k)}});
  }
  consts["c_k"] = ck;

  ordered_json residuals;
  residuals["dual_form"] = num(rep.residuals.dual_form);
  residuals["z_identity"] = num(rep.residuals.z_identity);
  ordered_json zk = ordered_json::array();
  for (std::size_t i = 0; i < rep.residuals.zk_reconstruct.size(); ++i) {
    zk.push_back({{"k", i + 2}, {"residual", num(rep.residuals.zk_reconstruct[i])}});
  }
  residuals["zk_reconstruct"] = zk;
  residuals["tolerance_dual_form"] = analysis::kDualFormTol;
  residuals["tolerance_identity"] = analysis::kIdentityTol;

  ordered_json coeffs = ordered_json::array();
  for (const auto& c : rep.coefficients) {
    coeffs.push_back({{"name", c.name}, {"max_residual", num(c.max_residual)}, {"tolerance", c.tolerance},
                      {"pass", c.pass()}});
  }

  const auto& b = rep.bound;
  ordered_json bound{{"lambda_min_sym", num(b.lambda_min_sym)},
                     {"lambda_max", num(b.lambda_max)},
                     {"yref_dot_sup", num(b.yref_dot_sup)},
                     {"phi_sup", num(b.phi_sup)},
                     {"phi_log_rate_sup", num(b.phi_log_rate_sup)},
                     {"dy_minus_gamma_xi_sup", num(b.dy_minus_gamma_xi_sup)},
                     {"sigma", num(b.sigma)},
                     {"eps_min", num(b.eps_min)},
                     {"observed_max", num(b.observed_max)},
                     {"initial_ratio", num(b.initial_ratio)},
                     {"margin", num(b.margin)},
                     {"covered", b.covered},
                     {"holds", b.holds}};

  ordered_json zeta_sup = ordered_json::array();
  for (double v : rep.zeta_sup) zeta_sup.push_back(num(v));

  ordered_json j;
  j["r"] = rep.r;
  j["pass"] = rep.pass();
  j["constants"] = consts;
  j["zeta_sup"] = zeta_sup;
  j["residuals"] = residuals;
  j["zeta_dot"] = {{"samples", rep.zeta_dot.samples},
                   {"failures", rep.zeta_dot.failures},
                   {"worst_ratio", num(rep.zeta_dot.worst_ratio)},
                   {"pass", rep.zeta_dot.pass()}};
  j["coefficients"] = coeffs;
  j["eps_sigma_bound"] = bound;
  return j;
}

std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  close_checked(out, path);
}

}  // namespace funnel

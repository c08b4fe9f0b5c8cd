#include "funnel/experiment.hpp"

#include "funnel/analysis.hpp"
#include "funnel/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef FUNNEL_VERSION
#define FUNNEL_VERSION "unknown"
#endif

namespace funnel {

using nlohmann::ordered_json;

namespace {

ordered_json tool_json() { return {{"name", "funnelctl"}, {"version", FUNNEL_VERSION}}; }

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

std::string join(const std::vector<double>& v, int digits = 6) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i], digits);
  return s;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

ordered_json failure_json(const StepUnderflow& e) {
  return {{"kind", "step_underflow"}, {"t", e.t()},
          {"h", e.h()},               {"reason", e.reason()},
          {"constraint", e.constraint()}, {"level", e.level()},
          {"margin", std::isfinite(e.margin()) ? ordered_json(e.margin()) : ordered_json(nullptr)},
          {"message", e.what()}};
}

}  // namespace

RunOptions with_environment(RunOptions opts) {
  if (!opts.output_dir) {
    if (const char* dir = std::getenv("FUNNEL_OUTPUT_DIR"); dir && *dir) opts.output_dir = dir;
  }
  if (!opts.workers) {
    if (const char* w = std::getenv("FUNNEL_WORKERS"); w && *w) {
      char* end = nullptr;
      const long v = std::strtol(w, &end, 10);
      if (*end != '\0' || v < 1) throw std::invalid_argument("FUNNEL_WORKERS must be a positive integer");
      opts.workers = static_cast<std::size_t>(v);
    }
  }
  return opts;
}

OutputPaths output_paths(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::filesystem::path dir = opts.output_dir.value_or(cfg.output.dir);
  const std::string& name = cfg.output.name;
  return {dir / (name + ".csv"), dir / (name + "_state.csv"), dir / (name + "_metadata.json")};
}

int run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  const Problem p = build_problem(cfg);
  const OutputPaths paths = output_paths(cfg, opts);

  ordered_json meta;
  meta["tool"] = tool_json();
  meta["integral_arg"] = to_string(p.sys.integral_arg);
  meta["config"] = config_json(cfg, p.sys);

  SimResult sim;
  try {
    sim = simulate(p, cfg.integrator);
  } catch (const InfeasibleStart& e) {
    err << "infeasible start: " << e.report().failed.value_or("?") << "\n"
        << dump_json(feasibility_json(e.report(), p.params));
    return kExitInfeasible;
  } catch (const StepUnderflow& e) {
    err << e.what() << "\n";
    meta["status"] = "step_underflow";
    meta["feasibility"] = feasibility_json(initial_feasibility(p.sys, p.params, p.funnel, p.ref), p.params);
    meta["failure"] = failure_json(e);
    try {
      write_text(paths.metadata, dump_json(meta));
    } catch (const std::exception& io) {
      err << io.what() << "\n";
      return kExitError;
    }
    return kExitUnderflow;
  } catch (const std::runtime_error& e) {
    err << e.what() << "\n";
    meta["status"] = "incomplete";
    meta["failure"] = {{"kind", "incomplete"}, {"message", e.what()}};
    try {
      write_text(paths.metadata, dump_json(meta));
    } catch (const std::exception& io) {
      err << io.what() << "\n";
      return kExitError;
    }
    return kExitFailed;
  }

  const ordered_json inv = invariants_json(sim, p.params);
  const bool holds = inv["all_hold"].get<bool>();
  meta["status"] = holds ? "completed" : "invariant_violated";
  meta["feasibility"] = feasibility_json(sim.feasibility, p.params);
  meta["integrator_stats"] = stats_json(sim.stats);
  meta["invariants"] = inv;
  meta["wall_seconds"] = sim.stats.wall_seconds;
  meta["rows"] = sim.samples.size();
  meta["files"] = {{"trace", paths.trace.filename().string()}, {"state", paths.state.filename().string()}};
  try {
    write_trace_csv(paths.trace, sim, p);
    write_state_csv(paths.state, sim, p);
    write_text(paths.metadata, dump_json(meta));
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitError;
  }

  if (!opts.quiet) {
    out << (holds ? "completed" : "completed with violated invariants") << " [" << sim.samples.front().t << ", "
        << sim.samples.back().t << "]: " << sim.stats.accepted << " steps (" << sim.stats.rejected << " rejected), "
        << fmt(sim.stats.wall_seconds, 3) << " s\n"
        << "  max phi|e|              " << fmt(sim.max_funnel_ratio()) << "\n"
        << "  max |theta_i|/theta_hat " << join(sim.max_theta_ratio()) << "\n"
        << "  max |u|                 " << fmt(sim.max_input_norm()) << "\n"
        << "  trace    " << paths.trace.string() << "\n"
        << "  metadata " << paths.metadata.string() << "\n";
  }
  return holds ? kExitOk : kExitFailed;
}

int run_feasible(const ExperimentConfig& cfg, std::ostream& out) {
  const Problem p = build_problem(cfg);
  const FeasibilityReport rep = initial_feasibility(p.sys, p.params, p.funnel, p.ref);
  out << dump_json(feasibility_json(rep, p.params));
  return rep.feasible ? kExitOk : kExitInfeasible;
}

int run_diagnose(const std::filesystem::path& trace, const ExperimentConfig& cfg, std::ostream& out,
                 std::ostream& err) {
  const Problem p = build_problem(cfg);
  SimResult sim;
  try {
    sim = load_trace(trace, state_path_for(trace), p);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitError;
  }
  if (sim.samples.size() < 3) {
    err << "trace has fewer than 3 rows; nothing to diagnose\n";
    return kExitError;
  }
  const analysis::DiagnosticsReport rep = analysis::diagnose(sim, p);

  const std::filesystem::path dir = trace.parent_path();
  const std::string stem = trace.stem().string();
  const std::filesystem::path json_path = dir / (stem + "_diagnostics.json");
  const std::filesystem::path zeta_path = dir / (stem + "_zeta.csv");
  try {
    write_text(json_path, dump_json(diagnostics_json(rep)));
    std::ostringstream zs;
    zs << "t";
    for (int i = 1; i < p.sys.r; ++i) {
      for (int k = 1; k <= p.sys.n; ++k) zs << ",zeta_" << i << "_" << k;
    }
    zs << "\n";
    for (std::size_t s = 0; s < sim.samples.size(); ++s) {
      zs << format_number(sim.samples[s].t);
      const Vec& z = rep.zeta_trace[s];
      for (Eigen::Index k = 0; k < z.size(); ++k) zs << "," << format_number(z[k]);
      zs << "\n";
    }
    write_text(zeta_path, zs.str());
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitError;
  }

  auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  const auto& res = rep.residuals;
  out << "diagnostics for " << trace.string() << " (r = " << rep.r << ", " << sim.samples.size() << " samples)\n";
  out << "  kernel vector c = [" << join(to_std(rep.constants.c)) << "], q = " << fmt(rep.constants.q) << "\n";
  out << "  zeta sup norms          " << join(rep.zeta_sup) << "\n";
  out << "  dual form residual      " << fmt(res.dual_form, 3) << " (tol " << analysis::kDualFormTol << ") "
      << verdict(res.dual_form < analysis::kDualFormTol) << "\n";
  out << "  Z identity residual     " << fmt(res.z_identity, 3) << " (tol " << analysis::kIdentityTol << ") "
      << verdict(res.z_identity < analysis::kIdentityTol) << "\n";
  for (std::size_t i = 0; i < res.zk_reconstruct.size(); ++i) {
    out << "  Z_" << i + 2 << " reconstruction      " << fmt(res.zk_reconstruct[i], 3) << " (tol "
        << analysis::kIdentityTol << ") " << verdict(res.zk_reconstruct[i] < analysis::kIdentityTol) << "\n";
  }
  out << "  zeta' spot check        " << rep.zeta_dot.samples << " samples, " << rep.zeta_dot.failures
      << " failures, worst ratio " << fmt(rep.zeta_dot.worst_ratio, 3) << " " << verdict(rep.zeta_dot.pass())
      << "\n";
  const auto coeff_ok = std::count_if(rep.coefficients.begin(), rep.coefficients.end(),
                                      [](const analysis::CoefficientCheck& c) { return c.pass(); });
  out << "  coefficient identities  " << coeff_ok << "/" << rep.coefficients.size() << " "
      << verdict(static_cast<std::size_t>(coeff_ok) == rep.coefficients.size()) << "\n";
  const auto& b = rep.bound;
  out << "  eps/sigma bound         sigma = " << fmt(b.sigma) << ", eps_min = " << fmt(b.eps_min)
      << ", observed max phi|e| = " << fmt(b.observed_max) << (b.covered ? " (covered)" : " (not covered)") << " "
      << verdict(b.holds) << "\n";
  out << "overall: " << verdict(rep.pass()) << "\n";
  out << "  summary " << json_path.string() << "\n  zeta    " << zeta_path.string() << "\n";
  return rep.pass() ? kExitOk : kExitFailed;
}

std::vector<std::vector<Override>> sweep_cells(const SweepConfig& sweep) {
  std::vector<std::vector<Override>> cells{{}};
  for (const SweepAxis& axis : sweep.axes) {
    std::vector<std::vector<Override>> next;
    next.reserve(cells.size() * axis.values.size());
    for (const auto& prefix : cells) {
      for (double v : axis.values) {
        auto cell = prefix;
        cell.emplace_back(axis.key, v);
        next.push_back(std::move(cell));
      }
    }
    cells = std::move(next);
  }
  if (sweep.axes.empty()) cells.clear();
  return cells;
}

namespace {

SweepRow run_cell(const ExperimentConfig& base, std::size_t index, const std::vector<Override>& values) {
  SweepRow row;
  row.cell = index;
  row.values = values;
  try {
    const ExperimentConfig cfg = parse_config_string(base.source_text, base.source_path, values);
    const Problem p = build_problem(cfg);
    const SimResult sim = simulate(p, cfg.integrator);
    row.feasible = true;
    row.max_funnel_ratio = sim.max_funnel_ratio();
    const auto th = sim.max_theta_ratio();
    row.max_theta_ratio = th.empty() ? 0.0 : *std::max_element(th.begin(), th.end());
    row.max_input_norm = sim.max_input_norm();
    row.max_error_norm = sim.max_error_norm();
    row.steps = sim.stats.accepted;
    row.completed = row.max_funnel_ratio < 1.0 && row.max_theta_ratio < 1.0 && std::isfinite(row.max_input_norm);
    row.status = row.completed ? "completed" : "invariant_violated";
  } catch (const ConfigError& e) {
    row.status = "invalid";
    row.message = e.errors().empty() ? e.what() : e.errors().front();
  } catch (const InfeasibleStart& e) {
    row.status = "infeasible";
    row.message = e.what();
  } catch (const StepUnderflow& e) {
    row.status = "step_underflow";
    row.feasible = true;
    row.message = e.what();
  } catch (const std::exception& e) {
    row.status = "failed";
    row.message = e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, std::size_t workers) {
  const auto cells = sweep_cells(cfg.sweep);
  std::vector<SweepRow> rows(cells.size());
  if (cells.empty()) return rows;
  workers = std::clamp<std::size_t>(workers, 1, cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) rows[i] = run_cell(cfg, i, cells[i]);
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return rows;
}

int run_sweep_command(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  if (cfg.sweep.axes.empty()) {
    err << "sweep: the configuration has no [[sweep.axis]] entries\n";
    return kExitError;
  }
  std::size_t workers = opts.workers.value_or(cfg.sweep.workers);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

  const auto start = std::chrono::steady_clock::now();
  const std::vector<SweepRow> rows = run_sweep(cfg, workers);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream csv;
  csv << "cell";
  for (const auto& axis : cfg.sweep.axes) csv << "," << axis.key;
  csv << ",status,feasible,completed,max_funnel_ratio,max_theta_ratio,max_input_norm,max_error_norm,steps\n";
  ordered_json jrows = ordered_json::array();
  for (const SweepRow& r : rows) {
    csv << r.cell;
    ordered_json values = ordered_json::object();
    for (const auto& [key, v] : r.values) {
      csv << "," << format_number(v);
      values[key] = v;
    }
    csv << "," << r.status << "," << r.feasible << "," << r.completed << "," << format_number(r.max_funnel_ratio)
        << "," << format_number(r.max_theta_ratio) << "," << format_number(r.max_input_norm) << ","
        << format_number(r.max_error_norm) << "," << r.steps << "\n";
    jrows.push_back({{"cell", r.cell},
                     {"values", values},
                     {"status", r.status},
                     {"feasible", r.feasible},
                     {"completed", r.completed},
                     {"max_funnel_ratio", r.max_funnel_ratio},
                     {"max_theta_ratio", r.max_theta_ratio},
                     {"max_input_norm", std::isfinite(r.max_input_norm) ? ordered_json(r.max_input_norm)
                                                                        : ordered_json(nullptr)},
                     {"max_error_norm", r.max_error_norm},
                     {"steps", r.steps},
                     {"message", r.message}});
  }
  const std::filesystem::path dir = opts.output_dir.value_or(cfg.output.dir);
  const std::filesystem::path csv_path = dir / (cfg.output.name + "_sweep.csv");
  const std::filesystem::path json_path = dir / (cfg.output.name + "_sweep.json");
  ordered_json meta{{"tool", tool_json()}, {"source", cfg.source_path}, {"workers", workers},
                    {"wall_seconds", wall}, {"rows", jrows}};
  try {
    write_text(csv_path, csv.str());
    write_text(json_path, dump_json(meta));
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitError;
  }

  bool all = true;
  if (!opts.quiet) {
    out << "sweep: " << rows.size() << " cells on " << std::min(workers, rows.size()) << " workers, " << fmt(wall, 3)
        << " s\n";
  }
  for (const SweepRow& r : rows) {
    all = all && r.completed;
    if (opts.quiet) continue;
    out << "  [" << r.cell << "]";
    for (const auto& [key, v] : r.values) out << " " << key << "=" << fmt(v);
    out << "  " << r.status;
    if (r.feasible && r.status != "step_underflow") {
      out << "  max phi|e| " << fmt(r.max_funnel_ratio, 4) << "  max |u| " << fmt(r.max_input_norm, 4);
    }
    if (!r.message.empty()) out << "  (" << r.message << ")";
    out << "\n";
  }
  if (!opts.quiet) out << "  summary " << csv_path.string() << "\n";
  return all ? kExitOk : kExitFailed;
}

}  // namespace funnel

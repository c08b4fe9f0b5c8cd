#include "funnel/config.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace funnel {

namespace {

const std::vector<std::string> kPlants{"paper_nonlinear", "chain_integrator", "linear_test"};

// One segment of a dotted key path: a table key with an optional list index.
struct PathSegment {
  std::string key;
  std::optional<std::size_t> index;
};

std::optional<std::vector<PathSegment>> split_path(const std::string& path) {
  std::vector<PathSegment> out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    PathSegment seg;
    const auto open = part.find('[');
    if (open == std::string::npos) {
      seg.key = part;
    } else {
      const auto close = part.find(']', open);
      if (close == std::string::npos || close != part.size() - 1 || close == open + 1) return std::nullopt;
      seg.key = part.substr(0, open);
      const std::string digits = part.substr(open + 1, close - open - 1);
      if (digits.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
      seg.index = std::stoul(digits);
    }
    if (seg.key.empty()) return std::nullopt;
    out.push_back(seg);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

template <typename Container>
void set_scalar(Container& c, const std::string& key, double value) {
  if (std::floor(value) == value && std::abs(value) < 9.0e15) {
    c.insert_or_assign(key, static_cast<std::int64_t>(value));
  } else {
    c.insert_or_assign(key, value);
  }
}

void assign_scalar(toml::array& arr, std::size_t index, double value) {
  const auto pos = arr.cbegin() + static_cast<std::ptrdiff_t>(index);
  if (std::floor(value) == value && std::abs(value) < 9.0e15 && !arr[index].is_floating_point()) {
    arr.replace(pos, static_cast<std::int64_t>(value));
  } else {
    arr.replace(pos, value);
  }
}

std::optional<std::string> apply_override(toml::table& root, const Override& ov) {
  const auto path = split_path(ov.first);
  if (!path) return "sweep: malformed key path '" + ov.first + "'";
  toml::table* table = &root;
  for (std::size_t k = 0; k < path->size(); ++k) {
    const PathSegment& seg = (*path)[k];
    const bool last = k + 1 == path->size();
    if (seg.index) {
      toml::array* arr = table->get_as<toml::array>(seg.key);
      if (!arr || *seg.index >= arr->size()) {
        return "sweep: key '" + ov.first + "' indexes past the configured list";
      }
      toml::node& item = *arr->get(*seg.index);
      if (last) {
        if (!item.is_number()) return "sweep: key '" + ov.first + "' does not name a scalar";
        assign_scalar(*arr, *seg.index, ov.second);
        return std::nullopt;
      }
      table = item.as_table();
    } else if (last) {
      const toml::node* existing = table->get(seg.key);
      if (existing && !existing->is_number()) return "sweep: key '" + ov.first + "' does not name a scalar";
      if (existing && existing->is_floating_point()) {
        table->insert_or_assign(seg.key, ov.second);
      } else {
        set_scalar(*table, seg.key, ov.second);
      }
      return std::nullopt;
    } else {
      if (!table->contains(seg.key)) table->insert(seg.key, toml::table{});
      table = table->get_as<toml::table>(seg.key);
    }
    if (!table) return "sweep: key '" + ov.first + "' passes through a non-table value";
  }
  return std::nullopt;
}

// Typed access with key-path error messages and unknown-key detection.
class Reader {
 public:
  std::vector<std::string> errors;

  const toml::table* section(const toml::table& root, const std::string& name, bool required,
                             std::initializer_list<const char*> allowed) {
    const toml::node* node = root.get(name);
    if (!node) {
      if (required) errors.push_back(name + ": missing section");
      return nullptr;
    }
    const toml::table* t = node->as_table();
    if (!t) {
      errors.push_back(name + ": expected a table");
      return nullptr;
    }
    check_keys(*t, name, allowed);
    return t;
  }

  void check_keys(const toml::table& t, const std::string& path, std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : t) {
      if (!ok.count(std::string(k.str()))) errors.push_back(path + "." + std::string(k.str()) + ": unknown key");
    }
  }

  std::optional<double> number(const toml::table* t, const std::string& path, const char* key, bool required) {
    const toml::node* node = t ? t->get(key) : nullptr;
    const std::string full = path + "." + key;
    if (!node) {
      if (required) errors.push_back(full + ": missing key");
      return std::nullopt;
    }
    if (auto v = node->value<double>(); v && node->is_number()) {
      if (!std::isfinite(*v)) {
        errors.push_back(full + ": must be finite");
        return std::nullopt;
      }
      return *v;
    }
    errors.push_back(full + ": expected a number");
    return std::nullopt;
  }

  std::optional<std::int64_t> integer(const toml::table* t, const std::string& path, const char* key,
                                      bool required) {
    const toml::node* node = t ? t->get(key) : nullptr;
    const std::string full = path + "." + key;
    if (!node) {
      if (required) errors.push_back(full + ": missing key");
      return std::nullopt;
    }
    if (node->is_integer()) return node->value<std::int64_t>();
    if (node->is_floating_point()) {
      const double v = *node->value<double>();
      if (std::floor(v) == v && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
    }
    errors.push_back(full + ": expected an integer");
    return std::nullopt;
  }

  std::optional<std::string> string(const toml::table* t, const std::string& path, const char* key,
                                    bool required) {
    const toml::node* node = t ? t->get(key) : nullptr;
    const std::string full = path + "." + key;
    if (!node) {
      if (required) errors.push_back(full + ": missing key");
      return std::nullopt;
    }
    if (auto v = node->value<std::string>()) return *v;
    errors.push_back(full + ": expected a string");
    return std::nullopt;
  }

  /// A list of numbers; a scalar is accepted when broadcast_to is given.
  std::optional<std::vector<double>> numbers(const toml::node* node, const std::string& full,
                                             std::optional<std::size_t> broadcast_to = std::nullopt) {
    if (!node) return std::nullopt;
    if (node->is_number()) {
      if (!broadcast_to) {
        errors.push_back(full + ": expected a list of numbers");
        return std::nullopt;
      }
      return std::vector<double>(*broadcast_to, *node->value<double>());
    }
    const toml::array* arr = node->as_array();
    if (!arr) {
      errors.push_back(full + ": expected a list of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::node* item = arr->get(i);
      if (!item->is_number()) {
        errors.push_back(full + "[" + std::to_string(i) + "]: expected a number");
        return std::nullopt;
      }
      const double v = *item->value<double>();
      if (!std::isfinite(v)) {
        errors.push_back(full + "[" + std::to_string(i) + "]: must be finite");
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  /// Row-major list of rows; a scalar means that multiple of the identity.
  std::optional<Mat> matrix(const toml::node* node, const std::string& full, int n) {
    if (!node) return std::nullopt;
    if (node->is_number()) return Mat(*node->value<double>() * Mat::Identity(n, n));
    const toml::array* rows = node->as_array();
    if (!rows || rows->empty()) {
      errors.push_back(full + ": expected a matrix (list of rows) or a scalar");
      return std::nullopt;
    }
    std::vector<std::vector<double>> data;
    for (std::size_t i = 0; i < rows->size(); ++i) {
      auto row = numbers(rows->get(i), full + "[" + std::to_string(i) + "]");
      if (!row) return std::nullopt;
      data.push_back(std::move(*row));
    }
    const std::size_t cols = data.front().size();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].size() != cols) {
        errors.push_back(full + ": rows have different lengths");
        return std::nullopt;
      }
    }
    Mat m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
    }
    return m;
  }

  /// List of vectors of length n; scalars broadcast (a bare scalar fills every entry).
  std::optional<std::vector<Vec>> vectors(const toml::node* node, const std::string& full, std::size_t count,
                                          int n) {
    if (!node) return std::nullopt;
    if (node->is_number()) return std::vector<Vec>(count, Vec::Constant(n, *node->value<double>()));
    const toml::array* arr = node->as_array();
    if (!arr) {
      errors.push_back(full + ": expected a list of vectors");
      return std::nullopt;
    }
    std::vector<Vec> out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      auto v = numbers(arr->get(i), full + "[" + std::to_string(i) + "]", static_cast<std::size_t>(n));
      if (!v) return std::nullopt;
      out.push_back(Eigen::Map<const Vec>(v->data(), static_cast<Eigen::Index>(v->size())));
    }
    return out;
  }
};

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

void read_plant(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t =
      rd.section(root, "plant", true, {"name", "r", "n", "t0", "seed", "integral_arg", "gamma", "R", "y0"});
  if (!t) return;
  PlantConfig& pc = cfg.plant;
  pc.name = rd.string(t, "plant", "name", true).value_or("");
  const bool known = std::find(kPlants.begin(), kPlants.end(), pc.name) != kPlants.end();
  if (!pc.name.empty() && !known) rd.errors.push_back("plant.name: unknown plant '" + pc.name + "'");

  const auto r = rd.integer(t, "plant", "r", pc.name != "paper_nonlinear" && known);
  const auto n = rd.integer(t, "plant", "n", false);
  if (pc.name == "paper_nonlinear") {
    if (r && *r != 3) rd.errors.push_back("plant.r: paper_nonlinear has r = 3");
    if (n && *n != 2) rd.errors.push_back("plant.n: paper_nonlinear has n = 2");
    pc.r = 3;
    pc.n = 2;
  } else {
    pc.r = static_cast<int>(r.value_or(0));
    pc.n = static_cast<int>(n.value_or(pc.name == "linear_test" ? 2 : 1));
  }
  if (known && pc.r < 2) rd.errors.push_back("plant.r must be >= 2");
  if (known && pc.n < 1) rd.errors.push_back("plant.n must be >= 1");

  pc.t0 = rd.number(t, "plant", "t0", false).value_or(0.0);
  if (const auto seed = rd.integer(t, "plant", "seed", false)) {
    if (*seed < 0) {
      rd.errors.push_back("plant.seed must be >= 0");
    } else {
      pc.seed = static_cast<std::uint64_t>(*seed);
    }
  }
  if (const auto arg = rd.string(t, "plant", "integral_arg", false)) {
    if (*arg == "s") {
      pc.integral_arg = IntegralArgument::s;
    } else if (*arg == "t") {
      pc.integral_arg = IntegralArgument::t;
    } else {
      rd.errors.push_back("plant.integral_arg: expected \"s\" or \"t\"");
    }
  }
  if (pc.n < 1 || pc.r < 2) return;
  pc.gamma = rd.matrix(t->get("gamma"), "plant.gamma", pc.n);
  if (const toml::node* node = t->get("R")) {
    const toml::array* arr = node->as_array();
    if (!arr) {
      rd.errors.push_back("plant.R: expected a list of matrices");
    } else {
      std::vector<Mat> R;
      bool ok = true;
      for (std::size_t i = 0; i < arr->size(); ++i) {
        auto m = rd.matrix(arr->get(i), "plant.R[" + std::to_string(i) + "]", pc.n);
        ok = ok && m.has_value();
        if (m) R.push_back(std::move(*m));
      }
      if (ok) pc.R = std::move(R);
    }
  }
  pc.y0 = rd.vectors(t->get("y0"), "plant.y0", static_cast<std::size_t>(pc.r), pc.n);
}

void read_controller(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t = rd.section(root, "controller", true, {"gain", "theta_hat", "xi0"});
  if (!t) return;
  ControllerParams& cp = cfg.controller;
  cp.gain = rd.number(t, "controller", "gain", false).value_or(1.0);
  const int levels = cfg.plant.r - 1;
  if (levels < 1 || cfg.plant.n < 1) return;
  if (const toml::node* node = t->get("theta_hat")) {
    if (auto v = rd.numbers(node, "controller.theta_hat", static_cast<std::size_t>(levels))) cp.theta_hat = *v;
  } else {
    rd.errors.emplace_back("controller.theta_hat: missing key");
  }
  if (const toml::node* node = t->get("xi0")) {
    if (auto v = rd.vectors(node, "controller.xi0", static_cast<std::size_t>(levels), cfg.plant.n)) cp.xi0 = *v;
  } else {
    cp.xi0.assign(static_cast<std::size_t>(levels), Vec::Zero(cfg.plant.n));
  }
}

void read_funnel(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t = rd.section(root, "funnel", true, {"kind", "a", "b", "c", "t", "phi"});
  if (!t) return;
  const std::string kind = rd.string(t, "funnel", "kind", true).value_or("");
  if (kind == "paper") {
    rd.check_keys(*t, "funnel", {"kind"});
    cfg.funnel.kind = PaperFunnel{};
  } else if (kind == "exponential") {
    rd.check_keys(*t, "funnel", {"kind", "a", "b", "c"});
    const auto a = rd.number(t, "funnel", "a", true);
    const auto b = rd.number(t, "funnel", "b", true);
    const auto c = rd.number(t, "funnel", "c", true);
    if (a && b && c) cfg.funnel.kind = ExponentialFunnel{*a, *b, *c};
  } else if (kind == "table") {
    rd.check_keys(*t, "funnel", {"kind", "t", "phi"});
    const auto ts = rd.numbers(t->get("t"), "funnel.t");
    const auto ps = rd.numbers(t->get("phi"), "funnel.phi");
    if (!t->get("t")) rd.errors.emplace_back("funnel.t: missing key");
    if (!t->get("phi")) rd.errors.emplace_back("funnel.phi: missing key");
    if (ts && ps) {
      try {
        cfg.funnel.kind = TableFunnel(*ts, *ps);
      } catch (const std::exception& e) {
        rd.errors.push_back(std::string("funnel: ") + e.what());
      }
    }
  } else if (!kind.empty()) {
    rd.errors.push_back("funnel.kind: unknown funnel '" + kind + "' (paper, exponential, table)");
  }
}

void read_reference(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t =
      rd.section(root, "reference", true, {"kind", "amplitude", "frequency", "phase", "value", "coeffs"});
  if (!t) return;
  const std::string kind = rd.string(t, "reference", "kind", true).value_or("");
  const auto n = static_cast<std::size_t>(std::max(cfg.plant.n, 1));
  if (kind == "paper") {
    rd.check_keys(*t, "reference", {"kind"});
    cfg.reference.kind = PaperReference{};
  } else if (kind == "sinusoid") {
    rd.check_keys(*t, "reference", {"kind", "amplitude", "frequency", "phase"});
    if (!t->get("amplitude")) rd.errors.emplace_back("reference.amplitude: missing key");
    if (!t->get("frequency")) rd.errors.emplace_back("reference.frequency: missing key");
    const auto amp = rd.numbers(t->get("amplitude"), "reference.amplitude", n);
    const auto freq = rd.numbers(t->get("frequency"), "reference.frequency", n);
    const auto phase = t->get("phase") ? rd.numbers(t->get("phase"), "reference.phase", n)
                                       : std::optional<std::vector<double>>(std::vector<double>(n, 0.0));
    if (amp && freq && phase) cfg.reference.kind = SinusoidReference{to_vec(*amp), to_vec(*freq), to_vec(*phase)};
  } else if (kind == "constant") {
    rd.check_keys(*t, "reference", {"kind", "value"});
    if (!t->get("value")) rd.errors.emplace_back("reference.value: missing key");
    if (const auto v = rd.numbers(t->get("value"), "reference.value", n)) cfg.reference.kind = ConstantReference{to_vec(*v)};
  } else if (kind == "polynomial") {
    rd.check_keys(*t, "reference", {"kind", "coeffs"});
    const toml::array* arr = t->get("coeffs") ? t->get("coeffs")->as_array() : nullptr;
    if (!arr) {
      rd.errors.emplace_back("reference.coeffs: expected one coefficient list per channel");
      return;
    }
    PolynomialReference poly;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      auto c = rd.numbers(arr->get(i), "reference.coeffs[" + std::to_string(i) + "]");
      if (!c) return;
      poly.coeffs.push_back(std::move(*c));
    }
    cfg.reference.kind = std::move(poly);
  } else if (!kind.empty()) {
    rd.errors.push_back("reference.kind: unknown reference '" + kind + "' (paper, sinusoid, constant, polynomial)");
  }
}

void read_integrator(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t = rd.section(root, "integrator", false,
                                    {"rel_tol", "abs_tol", "h_init", "h_min", "h_max", "t_end", "guard_factor",
                                     "max_steps"});
  IntegratorConfig& ic = cfg.integrator;
  if (!t) return;
  const std::string p = "integrator";
  ic.rel_tol = rd.number(t, p, "rel_tol", false).value_or(ic.rel_tol);
  ic.abs_tol = rd.number(t, p, "abs_tol", false).value_or(ic.abs_tol);
  ic.h_init = rd.number(t, p, "h_init", false).value_or(ic.h_init);
  ic.h_min = rd.number(t, p, "h_min", false).value_or(ic.h_min);
  ic.h_max = rd.number(t, p, "h_max", false).value_or(ic.h_max);
  ic.t_end = rd.number(t, p, "t_end", false).value_or(ic.t_end);
  ic.guard_factor = rd.number(t, p, "guard_factor", false).value_or(ic.guard_factor);
  if (const auto steps = rd.integer(t, p, "max_steps", false)) {
    if (*steps < 1) {
      rd.errors.emplace_back("integrator.max_steps must be >= 1");
    } else {
      ic.max_steps = static_cast<std::size_t>(*steps);
    }
  }
}

void read_output(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t = rd.section(root, "output", false, {"dir", "name"});
  cfg.output.name = std::filesystem::path(cfg.source_path).stem().string();
  if (cfg.output.name.empty()) cfg.output.name = "run";
  if (!t) return;
  cfg.output.dir = rd.string(t, "output", "dir", false).value_or(cfg.output.dir);
  cfg.output.name = rd.string(t, "output", "name", false).value_or(cfg.output.name);
  if (cfg.output.name.empty()) rd.errors.emplace_back("output.name must not be empty");
}

void read_sweep(Reader& rd, const toml::table& root, ExperimentConfig& cfg) {
  const toml::table* t = rd.section(root, "sweep", false, {"workers", "axis"});
  if (!t) return;
  if (const auto w = rd.integer(t, "sweep", "workers", false)) {
    if (*w < 1) {
      rd.errors.emplace_back("sweep.workers must be >= 1");
    } else {
      cfg.sweep.workers = static_cast<std::size_t>(*w);
    }
  }
  const toml::node* node = t->get("axis");
  const toml::array* axes = node ? node->as_array() : nullptr;
  if (!axes || axes->empty()) {
    rd.errors.emplace_back("sweep.axis: expected at least one [[sweep.axis]] table");
    return;
  }
  for (std::size_t i = 0; i < axes->size(); ++i) {
    const std::string path = "sweep.axis[" + std::to_string(i) + "]";
    const toml::table* at = axes->get(i)->as_table();
    if (!at) {
      rd.errors.push_back(path + ": expected a table");
      continue;
    }
    rd.check_keys(*at, path, {"key", "values"});
    SweepAxis axis;
    axis.key = rd.string(at, path, "key", true).value_or("");
    if (!axis.key.empty() && !split_path(axis.key)) rd.errors.push_back(path + ".key: malformed key path");
    if (!at->get("values")) {
      rd.errors.push_back(path + ".values: missing key");
    } else if (auto v = rd.numbers(at->get("values"), path + ".values")) {
      if (v->empty()) rd.errors.push_back(path + ".values: empty axis");
      axis.values = std::move(*v);
    }
    cfg.sweep.axes.push_back(std::move(axis));
  }
}

}  // namespace

const std::vector<std::string>& plant_names() { return kPlants; }

SystemSpec build_system(const PlantConfig& plant) {
  SystemSpec sys;
  if (plant.name == "paper_nonlinear") {
    sys = make_paper_nonlinear(plant.integral_arg);
  } else if (plant.name == "chain_integrator") {
    sys = make_chain_integrator(plant.r, plant.n, Mat::Identity(plant.n, plant.n));
  } else if (plant.name == "linear_test") {
    sys = make_linear_test(plant.r, plant.n, plant.seed);
  } else {
    throw std::invalid_argument("unknown plant '" + plant.name + "'");
  }
  if (plant.gamma) sys.gamma = *plant.gamma;
  if (plant.R) sys.R = *plant.R;
  if (plant.y0) sys.y0 = *plant.y0;
  sys.t0 = plant.t0;
  if (sys.t0 > 0.0 && sys.op.m > 0 && !sys.history) {
    // Constant continuation of the initial data on [0, t0].
    Vec stacked(static_cast<Eigen::Index>(sys.r) * sys.n);
    for (int j = 0; j < sys.r && j < static_cast<int>(sys.y0.size()); ++j) {
      if (sys.y0[static_cast<std::size_t>(j)].size() == sys.n) {
        stacked.segment(static_cast<Eigen::Index>(j) * sys.n, sys.n) = sys.y0[static_cast<std::size_t>(j)];
      }
    }
    sys.history = [stacked](double) { return stacked; };
  }
  return sys;
}

Problem build_problem(const ExperimentConfig& cfg) {
  return Problem{build_system(cfg.plant), cfg.controller, cfg.funnel, cfg.reference};
}

ExperimentConfig parse_config_string(const std::string& text, const std::string& source_path,
                                     const std::vector<Override>& overrides) {
  toml::table root;
  try {
    root = toml::parse(text, source_path);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "syntax error at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
       << e.description();
    throw ConfigError({os.str()});
  }

  ExperimentConfig cfg;
  cfg.source_path = source_path;
  cfg.source_text = text;
  cfg.overrides = overrides;

  Reader rd;
  for (const auto& ov : overrides) {
    if (auto err = apply_override(root, ov)) rd.errors.push_back(*err);
  }
  rd.check_keys(root, "config", {"plant", "controller", "funnel", "reference", "integrator", "output", "sweep"});
  read_plant(rd, root, cfg);
  read_controller(rd, root, cfg);
  read_funnel(rd, root, cfg);
  read_reference(rd, root, cfg);
  read_integrator(rd, root, cfg);
  read_output(rd, root, cfg);
  read_sweep(rd, root, cfg);

  if (rd.errors.empty()) {
    const Problem p = build_problem(cfg);
    rd.errors = validate_problem(p, cfg.integrator.t_end);
    for (auto& e : validate_integrator(cfg.integrator, p.sys.t0)) rd.errors.push_back(std::move(e));
  } else {
    // Structural errors prevent building the problem; still report the scalar checks.
    const ControllerParams& cp = cfg.controller;
    if (!(cp.gain > 0.0)) rd.errors.emplace_back("controller.gain must be > 0");
    for (std::size_t i = 0; i < cp.theta_hat.size(); ++i) {
      if (!(cp.theta_hat[i] > 0.0)) {
        rd.errors.push_back("controller.theta_hat[" + std::to_string(i) + "] must be > 0");
      }
    }
    for (auto& e : validate_integrator(cfg.integrator, cfg.plant.t0)) rd.errors.push_back(std::move(e));
  }
  if (!rd.errors.empty()) throw ConfigError(std::move(rd.errors));
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str(), path);
}

}  // namespace funnel

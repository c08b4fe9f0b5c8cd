#include "funnel/experiment.hpp"
#include "funnel/io.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace funnel;

namespace {

const char* kChain = R"(
[plant]
name = "chain_integrator"
r = 3

[controller]
theta_hat = 3.0

[funnel]
kind = "exponential"
a = 1.0
b = 1.0
c = 1.0

[reference]
kind = "sinusoid"
amplitude = 0.3
frequency = 1.0

[integrator]
t_end = 5.0

[output]
name = "chain"
)";

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunOptions to(const std::filesystem::path& dir) {
  RunOptions opts;
  opts.output_dir = dir.string();
  opts.quiet = true;
  return opts;
}

}  // namespace

TEST_CASE("simulate writes trace, state and metadata") {
  const auto dir = test::scratch_dir("exp_simulate");
  const ExperimentConfig cfg = parse_config_string(kChain, "chain.toml");
  std::ostringstream out, err;
  REQUIRE(run_simulate(cfg, to(dir), out, err) == kExitOk);
  const OutputPaths paths = output_paths(cfg, to(dir));
  CHECK(paths.trace == dir / "chain.csv");
  REQUIRE(std::filesystem::exists(paths.trace));
  REQUIRE(std::filesystem::exists(paths.state));
  const auto meta = nlohmann::ordered_json::parse(slurp(paths.metadata));
  CHECK(meta["status"] == "completed");
  CHECK(meta["tool"]["version"] == FUNNEL_VERSION);
  CHECK(meta["config"]["plant"]["r"] == 3);
  CHECK(meta["invariants"]["all_hold"].get<bool>());
  CHECK(meta.contains("wall_seconds"));
  CHECK(meta["rows"].get<std::size_t>() == read_csv(paths.trace).rows.size());

  std::ostringstream dout, derr;
  CHECK(run_diagnose(paths.trace, cfg, dout, derr) == kExitOk);
  CHECK(dout.str().find("overall: PASS") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "chain_diagnostics.json"));
  const CsvTable zeta = read_csv(dir / "chain_zeta.csv");
  CHECK(zeta.header == std::vector<std::string>{"t", "zeta_1_1", "zeta_2_1"});
}

TEST_CASE("feasible output equals the metadata section byte for byte") {
  const auto dir = test::scratch_dir("exp_feasible");
  const ExperimentConfig cfg = parse_config(test::source_path("configs/paper_sec4.toml").string());
  std::ostringstream fout, out, err;
  CHECK(run_feasible(cfg, fout) == kExitOk);
  REQUIRE(run_simulate(cfg, to(dir), out, err) == kExitOk);
  const auto meta = nlohmann::ordered_json::parse(slurp(output_paths(cfg, to(dir)).metadata));
  CHECK(dump_json(meta["feasibility"]) == fout.str());
}

TEST_CASE("infeasible start exits 3 and writes nothing") {
  const auto dir = test::scratch_dir("exp_infeasible");
  const ExperimentConfig cfg = parse_config(test::source_path("configs/paper_sec4.toml").string());
  const ExperimentConfig bad =
      parse_config_string(cfg.source_text, cfg.source_path, {{"controller.theta_hat[1]", 1e-12}});
  std::ostringstream out, err, fout;
  CHECK(run_simulate(bad, to(dir), out, err) == kExitInfeasible);
  CHECK(std::filesystem::is_empty(dir));
  CHECK(err.str().find("theta_2") != std::string::npos);
  CHECK(run_feasible(bad, fout) == kExitInfeasible);
}

TEST_CASE("step underflow exits 2 and records the failure") {
  const auto dir = test::scratch_dir("exp_underflow");
  const ExperimentConfig cfg = parse_config(test::source_path("configs/paper_sec4.toml").string());
  const ExperimentConfig bad = parse_config_string(
      cfg.source_text, cfg.source_path,
      {{"integrator.h_min", 0.5}, {"integrator.h_init", 0.5}, {"integrator.h_max", 1.0}});
  std::ostringstream out, err;
  CHECK(run_simulate(bad, to(dir), out, err) == kExitUnderflow);
  const OutputPaths paths = output_paths(bad, to(dir));
  CHECK_FALSE(std::filesystem::exists(paths.trace));
  const auto meta = nlohmann::ordered_json::parse(slurp(paths.metadata));
  CHECK(meta["status"] == "step_underflow");
  CHECK(meta["failure"]["constraint"].get<std::string>().find("theta") != std::string::npos);
}

TEST_CASE("step budget exhaustion exits 4") {
  const auto dir = test::scratch_dir("exp_budget");
  const ExperimentConfig cfg =
      parse_config_string(kChain, "chain.toml", {{"integrator.max_steps", 5}});
  std::ostringstream out, err;
  CHECK(run_simulate(cfg, to(dir), out, err) == kExitFailed);
  const auto meta = nlohmann::ordered_json::parse(slurp(output_paths(cfg, to(dir)).metadata));
  CHECK(meta["status"] == "incomplete");
}

TEST_CASE("unwritable output directory exits 1") {
  const auto dir = test::scratch_dir("exp_io");
  write_text(dir / "blocker", "x");
  const ExperimentConfig cfg = parse_config_string(kChain, "chain.toml");
  std::ostringstream out, err;
  CHECK(run_simulate(cfg, to(dir / "blocker"), out, err) == kExitError);
}

TEST_CASE("sweep rows are deterministic and independent of the worker count") {
  const std::string text = std::string(kChain) + "\n[[sweep.axis]]\nkey = \"plant.r\"\nvalues = [2, 3, 4, 5]\n"
                                                 "[[sweep.axis]]\nkey = \"controller.gain\"\nvalues = [0.5, 1.0]\n";
  const ExperimentConfig cfg = parse_config_string(text, "sweep.toml");
  const auto serial = run_sweep(cfg, 1);
  const auto parallel = run_sweep(cfg, 4);
  REQUIRE(serial.size() == 8);
  REQUIRE(parallel.size() == 8);
  for (std::size_t k = 0; k < serial.size(); ++k) {
    CHECK(serial[k].cell == k);
    CHECK(parallel[k].cell == k);
    CHECK(serial[k].values == parallel[k].values);
    CHECK(serial[k].status == "completed");
    CHECK(serial[k].max_funnel_ratio == parallel[k].max_funnel_ratio);
    CHECK(serial[k].max_input_norm == parallel[k].max_input_norm);
    CHECK(serial[k].steps == parallel[k].steps);
  }
}

TEST_CASE("sweep records per-cell failures and continues") {
  const auto dir = test::scratch_dir("exp_sweep");
  const std::string text = std::string(kChain) +
                           "\n[[sweep.axis]]\nkey = \"controller.theta_hat[1]\"\nvalues = [3.0, -1.0, 3.0]\n";
  // A scalar theta_hat cannot be indexed, so spell the list out.
  std::string listed = text;
  listed.replace(listed.find("theta_hat = 3.0"), 15, "theta_hat = [3.0, 3.0]");
  const ExperimentConfig cfg = parse_config_string(listed, "sweep.toml");
  const auto rows = run_sweep(cfg, 2);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].status == "completed");
  CHECK(rows[1].status == "invalid");
  CHECK(rows[1].message.find("controller.theta_hat[1]") != std::string::npos);
  CHECK(rows[2].status == "completed");

  std::ostringstream out, err;
  CHECK(run_sweep_command(cfg, to(dir), out, err) == kExitFailed);
  std::ifstream in(dir / "chain_sweep.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header ==
        "cell,controller.theta_hat[1],status,feasible,completed,max_funnel_ratio,max_theta_ratio,"
        "max_input_norm,max_error_norm,steps");
  std::size_t rows_written = 0;
  while (std::getline(in, line)) ++rows_written;
  CHECK(rows_written == 3);
  CHECK(std::filesystem::exists(dir / "chain_sweep.json"));
}

TEST_CASE("sweep without axes is rejected") {
  const ExperimentConfig cfg = parse_config_string(kChain, "chain.toml");
  std::ostringstream out, err;
  CHECK(run_sweep_command(cfg, to(test::scratch_dir("exp_noaxis")), out, err) == kExitError);
}

TEST_CASE("environment overrides") {
  ::setenv("FUNNEL_OUTPUT_DIR", "/tmp/from_env", 1);
  ::setenv("FUNNEL_WORKERS", "3", 1);
  RunOptions opts = with_environment({});
  CHECK(opts.output_dir == "/tmp/from_env");
  CHECK(opts.workers == std::size_t{3});

  RunOptions explicit_opts;
  explicit_opts.output_dir = "cli";
  explicit_opts.workers = 1;
  opts = with_environment(explicit_opts);
  CHECK(opts.output_dir == "cli");
  CHECK(opts.workers == std::size_t{1});

  ::setenv("FUNNEL_WORKERS", "zero", 1);
  CHECK_THROWS_AS((void)with_environment({}), std::invalid_argument);
  ::unsetenv("FUNNEL_OUTPUT_DIR");
  ::unsetenv("FUNNEL_WORKERS");
}

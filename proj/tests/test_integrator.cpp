#include "funnel/integrator.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace funnel;
using doctest::Approx;

namespace {

Problem paper_problem(double theta2 = 0.01) {
  return {make_paper_nonlinear(), {1.0, {0.25, theta2}, {Vec::Zero(2), Vec::Zero(2)}}, {PaperFunnel{}},
          {PaperReference{}}};
}

Problem chain_problem(int r, double amplitude) {
  return {make_chain_integrator(r, 1, Mat::Identity(1, 1)),
          {1.0, std::vector<double>(static_cast<std::size_t>(r - 1), 3.0),
           std::vector<Vec>(static_cast<std::size_t>(r - 1), Vec::Zero(1))},
          {ExponentialFunnel{1.0, 1.0, 1.0}},
          {SinusoidReference{Vec::Constant(1, amplitude), Vec::Ones(1), Vec::Zero(1)}}};
}

IntegratorConfig horizon(double t_end) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  return cfg;
}

}  // namespace

TEST_CASE("integrator configuration validation") {
  CHECK(validate_integrator(IntegratorConfig{}, 0.0).empty());
  IntegratorConfig bad;
  bad.rel_tol = 0.0;
  bad.h_min = 1.0;
  bad.h_max = 0.1;
  bad.t_end = -1.0;
  CHECK(validate_integrator(bad, 0.0).size() >= 3);
}

TEST_CASE("equilibrium has zero closed-loop derivative") {
  const Problem p{make_chain_integrator(2, 1, Mat::Identity(1, 1)), {1.0, {1.0}, {Vec::Zero(1)}},
                  {ExponentialFunnel{1, 1, 1}}, {ConstantReference{Vec::Zero(1)}}};
  const auto d = closed_loop_rhs(initial_state(p), p);
  CHECK(d.dx.isZero(0.0));
  CHECK(d.dxi.isZero(0.0));
}

TEST_CASE("nonlinear example derivative at t = 0") {
  const Problem p = paper_problem();
  const ClosedLoopState s0 = initial_state(p);
  const auto d = closed_loop_rhs(s0, p);
  const Sample sample = make_sample(p, s0.t, 0.0, s0.x, s0.xi, s0.eta);
  CHECK(sample.u.norm() < 1e-3);
  const Vec expected = (Vec(2) << 1.2, 0.2).finished() + p.sys.gamma * sample.u;
  CHECK((d.dx.tail(2) - expected).norm() < 1e-14);
  CHECK(d.dx.head(2) == s0.x.segment(2, 2));
}

TEST_CASE("closed loop outside the funnel throws a level-0 domain exit") {
  Problem p = chain_problem(3, 0.0);
  ClosedLoopState s = initial_state(p);
  s.x[0] = 2.5;  // radius at t = 0 is 2
  try {
    (void)closed_loop_rhs(s, p);
    FAIL("expected DomainExit");
  } catch (const DomainExit& e) {
    CHECK(e.level() == 0);
  }
}

TEST_CASE("equilibrium is preserved by the integrator") {
  Problem p = chain_problem(3, 0.0);
  const SimResult sim = simulate(p, horizon(5.0));
  REQUIRE(sim.samples.size() >= 2);
  for (const Sample& s : sim.samples) {
    CHECK(s.e.isZero(0.0));
    CHECK(s.u.isZero(0.0));
    CHECK(s.xi.isZero(0.0));
  }
}

TEST_CASE("infeasible theta_hat raises InfeasibleStart") {
  const Problem p = paper_problem(1e-12);
  try {
    (void)simulate(p, horizon(1.0));
    FAIL("expected InfeasibleStart");
  } catch (const InfeasibleStart& e) {
    CHECK_FALSE(e.report().feasible);
    REQUIRE(e.report().failed.has_value());
    CHECK(*e.report().failed == constraint_name(2));
  }
}

TEST_CASE("invalid problems are rejected before integrating") {
  Problem p = paper_problem();
  p.sys.gamma = (Mat(2, 2) << 0.0, 1.0, -1.0, 0.0).finished();
  CHECK_FALSE(validate_problem(p, 10.0).empty());
  CHECK_THROWS_AS((void)simulate(p, horizon(1.0)), ValidationError);
}

TEST_CASE("huge h_min underflows and names the nearest constraint") {
  IntegratorConfig cfg = horizon(10.0);
  cfg.h_min = 0.5;
  cfg.h_init = 0.5;
  cfg.h_max = 1.0;
  try {
    (void)simulate(paper_problem(), cfg);
    FAIL("expected StepUnderflow");
  } catch (const StepUnderflow& e) {
    CHECK(e.h() < cfg.h_min);
    CHECK(e.level() >= 0);
    CHECK(e.level() <= 2);
    CHECK(e.constraint() == constraint_name(e.level()));
    CHECK_FALSE(e.reason().empty());
    CHECK(std::string(e.what()).find(e.constraint()) != std::string::npos);
  }
}

TEST_CASE("step budget exhaustion is an error") {
  IntegratorConfig cfg = horizon(10.0);
  cfg.max_steps = 10;
  CHECK_THROWS_AS((void)simulate(paper_problem(), cfg), std::runtime_error);
}

TEST_CASE("simulation bookkeeping") {
  const IntegratorConfig cfg = horizon(20.0);
  const SimResult sim = simulate(chain_problem(3, 0.3), cfg);
  REQUIRE(sim.samples.size() == sim.stats.accepted + 1);
  CHECK(sim.samples.front().t == 0.0);
  CHECK(sim.samples.back().t == 20.0);
  CHECK(sim.samples.front().h == 0.0);
  double t = 0.0;
  for (std::size_t k = 1; k < sim.samples.size(); ++k) {
    CHECK(sim.samples[k].t > sim.samples[k - 1].t);
    CHECK(sim.samples[k].h <= cfg.h_max * (1 + 1e-12));
    t += sim.samples[k].h;
  }
  CHECK(t == Approx(20.0).epsilon(1e-12));
  CHECK(sim.stats.min_step > 0.0);
  CHECK(sim.stats.max_step <= cfg.h_max * (1 + 1e-12));
  CHECK(sim.stats.rejected == sim.stats.rejected_error + sim.stats.rejected_domain + sim.stats.rejected_taint +
                                  sim.stats.rejected_nonfinite);
}

TEST_CASE("stored samples satisfy every domain constraint") {
  test::Gen gen(41);
  for (int trial = 0; trial < 12; ++trial) {
    const int r = gen.integer(2, 5);
    Problem p = chain_problem(r, gen.uniform(0.0, 0.5));
    const SimResult sim = simulate(p, horizon(10.0));
    for (const Sample& s : sim.samples) {
      CHECK(s.funnel_ratio < 1.0);
      CHECK(s.funnel_ratio == Approx(s.phi * s.e.norm()).epsilon(1e-15));
      for (std::size_t i = 0; i < s.theta.size(); ++i) CHECK(s.theta[i].norm() < p.params.theta_hat[i]);
      CHECK(all_finite(s.u));
    }
  }
}

TEST_CASE("samples are reproducible from state") {
  const Problem p = paper_problem();
  const SimResult sim = simulate(p, horizon(2.0));
  for (std::size_t k = 0; k < sim.samples.size(); k += 97) {
    const Sample& s = sim.samples[k];
    const Sample again = make_sample(p, s.t, s.h, s.x, s.xi, s.eta);
    CHECK(again.u == s.u);
    CHECK(again.funnel_ratio == s.funnel_ratio);
  }
}

TEST_CASE("simulation is deterministic") {
  const Problem p = chain_problem(4, 0.3);
  const SimResult a = simulate(p, horizon(10.0));
  const SimResult b = simulate(p, horizon(10.0));
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(a.samples[k].t == b.samples[k].t);
    CHECK(a.samples[k].x == b.samples[k].x);
    CHECK(a.samples[k].xi == b.samples[k].xi);
  }
}

TEST_CASE("solution converges as the tolerance tightens") {
  const Problem p{make_linear_test(4, 2, 7),
                  {1.0, {3.0, 3.0, 3.0}, {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)}},
                  {ExponentialFunnel{1, 1, 1}},
                  {SinusoidReference{Vec::Constant(2, 0.3), Vec::Ones(2), Vec::Zero(2)}}};
  IntegratorConfig loose = horizon(10.0), tight = horizon(10.0);
  loose.rel_tol = 1e-6;
  loose.abs_tol = 1e-8;
  tight.rel_tol = 1e-11;
  tight.abs_tol = 1e-13;
  const Sample a = simulate(p, loose).samples.back();
  const Sample b = simulate(p, tight).samples.back();
  CHECK((a.x - b.x).norm() < 1e-5 * (1.0 + b.x.norm()));
  CHECK((a.xi - b.xi).norm() < 1e-5 * (1.0 + b.xi.norm()));
}

TEST_CASE("summary statistics") {
  const SimResult sim = simulate(chain_problem(2, 0.3), horizon(5.0));
  double ratio = 0.0, unorm = 0.0;
  for (const Sample& s : sim.samples) {
    ratio = std::max(ratio, s.funnel_ratio);
    unorm = std::max(unorm, s.u.norm());
  }
  CHECK(sim.max_funnel_ratio() == ratio);
  CHECK(sim.max_input_norm() == unorm);
  CHECK(sim.max_theta_ratio().size() == 1);
}

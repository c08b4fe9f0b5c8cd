#include "funnel/signals.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace funnel;
using doctest::Approx;

namespace {

double paper_phi(double t) { return 1.0 / (2.1 * (std::exp(-3.0 * t) + 0.05) + 2.0 * std::exp(-t) + 0.05); }

}  // namespace

TEST_CASE("paper funnel values") {
  const FunnelSpec spec{PaperFunnel{}};
  CHECK(funnel_eval(spec, 0.0).phi == Approx(1.0 / 4.255).epsilon(1e-14));
  CHECK(funnel_eval(spec, 0.0).phi == Approx(0.2350176).epsilon(1e-7));
  REQUIRE(funnel_limit(spec).has_value());
  CHECK(*funnel_limit(spec) == Approx(1.0 / 0.155).epsilon(1e-14));
  CHECK(funnel_eval(spec, 60.0).phi == Approx(6.4516).epsilon(1e-4));
  for (double t : {0.3, 1.0, 2.5, 7.0}) CHECK(funnel_eval(spec, t).phi == Approx(paper_phi(t)).epsilon(1e-14));
}

TEST_CASE("constant exponential funnel") {
  const FunnelSpec spec{ExponentialFunnel{0.0, 1.0, 2.0}};
  for (double t : {0.0, 0.5, 3.0, 100.0}) {
    CHECK(funnel_eval(spec, t).phi == 0.5);
    CHECK(funnel_eval(spec, t).dphi == 0.0);
  }
}

TEST_CASE("funnel derivative matches central differences") {
  test::Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const FunnelSpec spec = trial % 2 ? FunnelSpec{PaperFunnel{}}
                                      : FunnelSpec{ExponentialFunnel{gen.uniform(0, 3), gen.uniform(0, 3),
                                                                     gen.uniform(0.05, 2)}};
    const double t = gen.uniform(0.0, 10.0);
    const double h = 1e-5;
    const double fd = (funnel_eval(spec, t + h).phi - funnel_eval(spec, t - h).phi) / (2 * h);
    CHECK(funnel_eval(spec, t).dphi == Approx(fd).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("exponential funnel validation") {
  CHECK(validate_funnel(FunnelSpec{ExponentialFunnel{1.0, 1.0, 1.0}}, 0.0, 10.0).empty());
  CHECK_FALSE(validate_funnel(FunnelSpec{ExponentialFunnel{1.0, 1.0, 0.0}}, 0.0, 10.0).empty());
  CHECK_FALSE(validate_funnel(FunnelSpec{ExponentialFunnel{1.0, -1.0, 1.0}}, 0.0, 10.0).empty());
  CHECK(validate_funnel(FunnelSpec{PaperFunnel{}}, 0.0, 10.0).empty());
}

TEST_CASE("table funnel interpolates without overshoot") {
  test::Gen gen(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int count = gen.integer(2, 12);
    std::vector<double> ts(count), ps(count);
    double t = gen.uniform(-1, 1), p = gen.uniform(0.1, 1);
    for (int k = 0; k < count; ++k) {
      ts[k] = t;
      ps[k] = p;
      t += gen.uniform(0.1, 2.0);
      p += gen.uniform(0.0, 1.0);  // non-decreasing data
    }
    const TableFunnel table(ts, ps);
    for (int k = 0; k < count; ++k) CHECK(table.value(ts[k]) == Approx(ps[k]).epsilon(1e-14));
    for (int s = 0; s < 200; ++s) {
      const double x = gen.uniform(ts.front(), ts.back());
      const double v = table.value(x);
      CHECK(v >= ps.front() - 1e-12);
      CHECK(v <= ps.back() + 1e-12);
      const double h = 1e-7;
      const double fd = (table.value(std::min(x + h, ts.back())) - table.value(std::max(x - h, ts.front()))) /
                        (std::min(x + h, ts.back()) - std::max(x - h, ts.front()));
      CHECK(table.derivative(x) >= -1e-12);
      CHECK(table.derivative(x) == Approx(fd).epsilon(1e-4).scale(1.0));
    }
    CHECK_THROWS_AS((void)table.value(ts.back() + 1.0), std::out_of_range);
  }
  CHECK_THROWS_AS(TableFunnel({0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TableFunnel({0.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("table funnel must cover the horizon") {
  const FunnelSpec spec{TableFunnel({0.0, 5.0}, {1.0, 2.0})};
  CHECK(validate_funnel(spec, 0.0, 5.0).empty());
  CHECK_FALSE(validate_funnel(spec, 0.0, 10.0).empty());
}

TEST_CASE("paper reference values") {
  const ReferenceSpec spec{PaperReference{}};
  const auto at5 = reference_eval(spec, 5.0);
  CHECK(at5.y[0] == 1.0);
  CHECK(at5.y[1] == Approx(std::sin(5.0)).epsilon(1e-15));
  const auto at0 = reference_eval(spec, 0.0);
  CHECK(at0.y[0] == Approx(std::exp(-25.0)).epsilon(1e-14));
  CHECK(at0.y[0] == Approx(1.39e-11).epsilon(1e-2));
  CHECK(at0.y[1] == 0.0);
  CHECK(reference_dim(spec) == 2);
}

TEST_CASE("reference derivatives match central differences") {
  test::Gen gen(13);
  const Vec amp = gen.vec(3), freq = gen.vec(3), phase = gen.vec(3);
  const std::vector<ReferenceSpec> specs{ReferenceSpec{PaperReference{}},
                                         ReferenceSpec{SinusoidReference{amp, freq, phase}},
                                         ReferenceSpec{PolynomialReference{{{1.0, -2.0, 0.5}, {0.0}, {3.0, 1.0}}}}};
  for (const auto& spec : specs) {
    for (int s = 0; s < 20; ++s) {
      const double t = gen.uniform(0.0, 10.0);
      const double h = 1e-5;
      const Vec fd = (reference_eval(spec, t + h).y - reference_eval(spec, t - h).y) / (2 * h);
      CHECK((reference_eval(spec, t).dy - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("constant and polynomial references") {
  const Vec v = (Vec(2) << 1.0, 2.0).finished();
  const auto c = reference_eval(ReferenceSpec{ConstantReference{v}}, 3.7);
  CHECK(c.y == v);
  CHECK(c.dy.isZero(0.0));
  const auto p = reference_eval(ReferenceSpec{PolynomialReference{{{1.0, -2.0, 0.5}}}}, 2.0);
  CHECK(p.y[0] == Approx(1.0 - 4.0 + 2.0));
  CHECK(p.dy[0] == Approx(-2.0 + 2.0));
  const auto s = reference_eval(ReferenceSpec{SinusoidReference{Vec::Constant(1, 0.3), Vec::Ones(1), Vec::Zero(1)}}, 1.0);
  CHECK(s.y[0] == Approx(0.3 * std::sin(1.0)));
  CHECK(s.dy[0] == Approx(0.3 * std::cos(1.0)));
}

TEST_CASE("reference validation") {
  CHECK(validate_reference(ReferenceSpec{PaperReference{}}).empty());
  CHECK_FALSE(validate_reference(ReferenceSpec{SinusoidReference{Vec::Ones(2), Vec::Ones(3), Vec::Zero(2)}}).empty());
}

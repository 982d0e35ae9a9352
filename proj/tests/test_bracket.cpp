#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "riglab/bracket.hpp"

using namespace riglab;
using expr::HamiltonianExpr;

namespace {
const ManifoldSpec kT1 = ManifoldSpec::torus(1);
const ManifoldSpec kT2 = ManifoldSpec::torus(2);

std::vector<PhasePoint> random_points(int count, int dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uq(0.0, 6.28);
  std::uniform_real_distribution<double> up(-2.0, 2.0);
  std::vector<PhasePoint> pts;
  for (int i = 0; i < count; ++i) {
    if (dim == 1)
      pts.push_back(PhasePoint::raw(Vec(uq(rng)), Vec(up(rng))));
    else
      pts.push_back(PhasePoint::raw(Vec(uq(rng), uq(rng)), Vec(up(rng), up(rng))));
  }
  return pts;
}
}  // namespace

TEST_CASE("canonical pairs bracket to one") {
  const HamiltonianExpr q1 = expr::parse_unvalidated("q1", kT2);
  const HamiltonianExpr q2 = expr::parse_unvalidated("q2", kT2);
  const HamiltonianExpr p1 = expr::parse_unvalidated("p1", kT2);
  const HamiltonianExpr p2 = expr::parse_unvalidated("p2", kT2);
  for (const PhasePoint& x : random_points(20, 2, 5)) {
    CHECK(bracket::bracket(q1, p1, x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bracket::bracket(q2, p2, x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bracket::bracket(q1, p2, x) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(bracket::bracket(q1, q2, x) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(bracket::bracket(p1, p2, x) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("free kinetic against a potential gives minus p cos q") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  for (const PhasePoint& x : random_points(50, 1, 6)) {
    CHECK(bracket::bracket(f, g, x) ==
          doctest::Approx(-x.p[0] * std::cos(x.q[0])).epsilon(1e-13));
  }
}

TEST_CASE("antisymmetry is exact") {
  const HamiltonianExpr f = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  const HamiltonianExpr g = expr::parse("0.5*p1^2 + 0.125*sin(8*q1)*sin(p1)", kT1);
  for (const PhasePoint& x : random_points(100, 1, 7)) {
    CHECK(bracket::bracket(f, g, x) == -bracket::bracket(g, f, x));
    CHECK(bracket::bracket(f, f, x) == 0.0);
  }
}

TEST_CASE("bilinearity against sampled combinations") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const HamiltonianExpr h = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  const HamiltonianExpr combo = expr::parse("2.5*sin(q1) + cosh(p1) + 0.5*cos(q1)", kT1);
  for (const PhasePoint& x : random_points(100, 1, 8)) {
    const double lhs = bracket::bracket(f, combo, x);
    const double rhs = 2.5 * bracket::bracket(f, g, x) + bracket::bracket(f, h, x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("leibniz rule for products") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const HamiltonianExpr h = expr::parse("cos(q1) + 0.2*p1^2", kT1);
  const HamiltonianExpr gh = expr::parse("(sin(q1))*(cos(q1) + 0.2*p1^2)", kT1);
  for (const PhasePoint& x : random_points(100, 1, 9)) {
    const double lhs = bracket::bracket(f, gh, x);
    const double rhs =
        bracket::bracket(f, g, x) * h.eval(x) + g.eval(x) * bracket::bracket(f, h, x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("jacobi identity via symbolic inner brackets") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const HamiltonianExpr h = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  const HamiltonianExpr gh = bracket::bracket_expr(g, h);
  const HamiltonianExpr hf = bracket::bracket_expr(h, f);
  const HamiltonianExpr fg = bracket::bracket_expr(f, g);
  for (const PhasePoint& x : random_points(100, 1, 10)) {
    const double cyc = bracket::bracket(f, gh, x) + bracket::bracket(g, hf, x) +
                       bracket::bracket(h, fg, x);
    CHECK(cyc == doctest::Approx(0.0).epsilon(1e-8));
  }
}

TEST_CASE("symbolic bracket agrees with the pointwise bracket") {
  const HamiltonianExpr f = expr::parse("0.5*(p1^2 + p2^2) + 0.3*cos(q1)*cos(q2)", kT2);
  const HamiltonianExpr g = expr::parse("sin(q1) + sin(q2)", kT2);
  const HamiltonianExpr fg = bracket::bracket_expr(f, g);
  for (const PhasePoint& x : random_points(50, 2, 11)) {
    CHECK(fg.eval(x) == doctest::Approx(bracket::bracket(f, g, x)).epsilon(1e-12));
  }

  const HamiltonianExpr other = expr::parse("sin(q1)", kT1);
  CHECK_THROWS_AS(bracket::bracket_expr(f, other), Error);
}

TEST_CASE("parameterized brackets take k through either slot") {
  const HamiltonianExpr fk = expr::parse("0.5*p1^2 + (1/k)*sin(k*q1)", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const PhasePoint x = PhasePoint::raw(Vec(0.7), Vec(1.1));
  const double expected = -1.1 * std::cos(0.7);  // dF/dp = p, and dG/dp = 0
  CHECK(bracket::bracket(fk, g, x, 8.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bracket::bracket(g, fk, x, 8.0) == doctest::Approx(-expected).epsilon(1e-12));
  CHECK_THROWS_AS(bracket::bracket(fk, g, x), Error);
}

TEST_CASE("bracket as the flow derivative of an observable") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const PhasePoint x0(Vec(0.6), Vec(1.2), kT1);
  dynamics::FlowSpec spec{f, std::nullopt, 0.0, 0.02, 1e-5, dynamics::Integrator::RK4, 1, 10.0};
  const DiscretizedArc arc = dynamics::integrate(spec, x0).arc;
  const int m = arc.nodes() / 2;
  const double fd = (g.eval(arc.phase_at(m + 1)) - g.eval(arc.phase_at(m - 1))) / (2.0 * arc.dt());
  CHECK(fd == doctest::Approx(bracket::bracket(g, f, arc.phase_at(m))).epsilon(1e-6));
}

TEST_CASE("endpoint difference equals the bracket integral along the flow") {
  const HamiltonianExpr f = expr::parse("0.5*p1^2", kT1);
  const HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const PhasePoint x0(Vec(0.0), Vec(1.0), kT1);
  CHECK(bracket::flow_integral_identity_check(f, g, x0, 1.0) <= 1e-6);
  // Both sides have closed forms (sin 1); a finer grid removes the trapezoid floor.
  CHECK(bracket::flow_integral_identity_check(f, g, x0, 1.0, std::nullopt, 1e-4) <= 1e-8);

  const HamiltonianExpr pend = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const HamiltonianExpr obs = expr::parse("cos(q1)*cosh(p1)", kT1);
  CHECK(bracket::flow_integral_identity_check(pend, obs, x0, 2.0) <= 1e-6);
  CHECK(bracket::flow_integral_identity_check(pend, expr::parse("p1", kT1), x0, 2.0) <= 1e-6);

  // G = F: the integrand is identically zero, so only energy drift remains.
  CHECK(bracket::flow_integral_identity_check(pend, pend, x0, 1.0) <= 1e-8);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "riglab/legendre.hpp"

using namespace riglab;

namespace {
const ManifoldSpec kT1 = ManifoldSpec::torus(1);
constexpr double kHalfPi = 1.5707963267948966;
}  // namespace

TEST_CASE("legendre map of a mechanical Hamiltonian is the momentum itself") {
  const expr::HamiltonianExpr h = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const TangentPoint y = legendre::legendre_map(h, PhasePoint::raw(Vec(0.4), Vec(1.7)));
  CHECK(y.v[0] == doctest::Approx(1.7).epsilon(1e-14));
  CHECK(y.q[0] == doctest::Approx(0.4));
}

TEST_CASE("cosh fiber inverse hits the closed form") {
  const expr::HamiltonianExpr h = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  const legendre::LegendreResult res =
      legendre::legendre_inverse(h, TangentPoint::raw(Vec(kHalfPi), Vec(1.0)));
  CHECK(res.p_star[0] == doctest::Approx(0.8813735870195430).epsilon(1e-10));
  CHECK(res.L_value == doctest::Approx(0.8813735870195430 - std::sqrt(2.0)).epsilon(1e-10));
  CHECK(res.residual <= 1e-10);
  CHECK(res.newton_iters <= 20);
}

TEST_CASE("legendre roundtrip across the corpus") {
  std::mt19937_64 rng(99);
  for (const expr::CorpusEntry& entry : expr::corpus()) {
    const expr::HamiltonianExpr h = expr::parse(entry.source, entry.manifold);
    const int n = entry.manifold.dim;
    for (int trial = 0; trial < 200; ++trial) {
      Vec q = Vec::zero(n), p = Vec::zero(n);
      for (int i = 0; i < n; ++i) {
        std::uniform_real_distribution<double> uq(entry.q_range[static_cast<size_t>(i)][0],
                                                  entry.q_range[static_cast<size_t>(i)][1]);
        std::uniform_real_distribution<double> up(entry.p_range[static_cast<size_t>(i)][0],
                                                  entry.p_range[static_cast<size_t>(i)][1]);
        q[i] = uq(rng);
        p[i] = up(rng);
      }
      const TangentPoint y = legendre::legendre_map(h, PhasePoint::raw(q, p));
      const legendre::LegendreResult back = legendre::legendre_inverse(h, y);
      for (int i = 0; i < n; ++i) CHECK(back.p_star[i] == doctest::Approx(p[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("lagrangian of the free Hamiltonian is kinetic energy") {
  const expr::HamiltonianExpr h = expr::parse("0.5*p1^2", kT1);
  CHECK(legendre::lagrangian(h, TangentPoint::raw(Vec(1.0), Vec(2.0))) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("lagrangian jet carries exact derivatives") {
  const expr::HamiltonianExpr h = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const double q = 0.7, v = 1.3;
  const legendre::LagrangianJet jet = legendre::lagrangian_jet(h, TangentPoint::raw(Vec(q), Vec(v)));
  CHECK(jet.L == doctest::Approx(0.5 * v * v - 1.0 + std::cos(q)).epsilon(1e-12));
  CHECK(jet.p_star[0] == doctest::Approx(v).epsilon(1e-12));
  CHECK(jet.dLdq[0] == doctest::Approx(-std::sin(q)).epsilon(1e-12));
  CHECK(jet.d2vv(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const double step = 1e-5;
  const double dv_fd = (legendre::lagrangian(h, TangentPoint::raw(Vec(q), Vec(v + step))) -
                        legendre::lagrangian(h, TangentPoint::raw(Vec(q), Vec(v - step)))) /
                       (2.0 * step);
  const double dq_fd = (legendre::lagrangian(h, TangentPoint::raw(Vec(q + step), Vec(v))) -
                        legendre::lagrangian(h, TangentPoint::raw(Vec(q - step), Vec(v)))) /
                       (2.0 * step);
  CHECK(jet.p_star[0] == doctest::Approx(dv_fd).epsilon(1e-8));
  CHECK(jet.dLdq[0] == doctest::Approx(dq_fd).epsilon(1e-8));
}

TEST_CASE("lagrangian is convex in v along sampled fibers") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const expr::CorpusEntry& entry : expr::corpus()) {
    if (entry.manifold.dim != 1) continue;
    const expr::HamiltonianExpr h = expr::parse(entry.source, entry.manifold);
    for (int trial = 0; trial < 30; ++trial) {
      const double q = u(rng), v = u(rng), step = 1e-4;
      const double lm = legendre::lagrangian(h, TangentPoint::raw(Vec(q), Vec(v - step)));
      const double l0 = legendre::lagrangian(h, TangentPoint::raw(Vec(q), Vec(v)));
      const double lp = legendre::lagrangian(h, TangentPoint::raw(Vec(q), Vec(v + step)));
      CHECK((lm - 2.0 * l0 + lp) / (step * step) >= -1e-8);
    }
  }
}

TEST_CASE("newton failure reports the last iterate") {
  const expr::HamiltonianExpr h = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  CHECK_THROWS_AS(
      legendre::legendre_inverse(h, TangentPoint::raw(Vec(0.0), Vec(1.0)), std::nullopt, 1e-10, 1),
      legendre::NewtonError);
}

TEST_CASE("roc table columns shrink for a convergent family") {
  const expr::HamiltonianSequence seq(expr::parse("0.5*p1^2 + (1/k)*sin(k*q1)", kT1),
                                      expr::parse("0.5*p1^2", kT1));
  const Box q_range{{0.0, 6.283185307179586}};
  const Box p_range{{-3.0, 3.0}};
  const legendre::ConvergenceTable table =
      legendre::roc_table(seq, q_range, p_range, {4, 16, 64, 256});
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows.front().k == 4);
  CHECK(table.rows.back().k == 256);
  CHECK(table.rows.front().sup_F_dev == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(table.rows.back().sup_F_dev == doctest::Approx(1.0 / 256.0).epsilon(1e-3));
  CHECK(table.rows.back().sup_F_dev < 0.05 * table.rows.front().sup_F_dev);
  CHECK(table.rows.back().sup_L_dev < 0.05 * table.rows.front().sup_L_dev + 1e-12);
  for (const legendre::ConvergenceRow& row : table.rows) {
    CHECK(row.sup_dFp_dev == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(row.sup_Linv_dev <= 1e-9);
  }

  const std::string csv = table.to_csv();
  CHECK(csv.find("k,sup_F_dev") == 0);
  CHECK(csv.find("256,") != std::string::npos);
}

TEST_CASE("roc table separates value convergence from gradient convergence") {
  // Fiber oscillation: values shrink like 1/k while the fiber gradient
  // deviation stays at the 0.1 amplitude.
  const expr::HamiltonianSequence seq(
      expr::parse("0.5*p1^2 + (0.1/k)*sin(q1)*sin(k*p1)", kT1),
      expr::parse("0.5*p1^2", kT1));
  const legendre::ConvergenceTable table = legendre::roc_table(
      seq, {{0.0, 6.283185307179586}}, {{-3.0, 3.0}}, {4, 8});
  CHECK(table.rows.back().sup_F_dev < 0.7 * table.rows.front().sup_F_dev);
  CHECK(table.rows.front().sup_dFp_dev > 0.09);
  CHECK(table.rows.back().sup_dFp_dev > 0.09);
}

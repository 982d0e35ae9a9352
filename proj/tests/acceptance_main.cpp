// Acceptance gate: one line per criterion, nonzero exit when any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "riglab/bracket.hpp"
#include "riglab/config.hpp"
#include "riglab/dynamics.hpp"
#include "riglab/experiment.hpp"
#include "riglab/legendre.hpp"
#include "riglab/variational.hpp"

using namespace riglab;

namespace {

const ManifoldSpec kT1 = ManifoldSpec::torus(1);
constexpr double kTwoPi = 6.283185307179586;

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  bool passed;
  std::string detail;
  double elapsed = 0.0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

char scratch[256];

std::string fmt(const char* f, ...) {
  va_list ap;
  va_start(ap, f);
  vsnprintf(scratch, sizeof scratch, f, ap);
  va_end(ap);
  return scratch;
}

// 1: fiberwise roundtrip of the gradient map and its Newton inverse.
void criterion_roundtrip(Criterion& c) {
  std::mt19937_64 rng(20260801u);
  double worst = 0.0;
  int checked = 0;
  for (const expr::CorpusEntry& entry : expr::corpus()) {
    if (entry.manifold.dim != 1) continue;
    const expr::HamiltonianExpr h = expr::parse(entry.source, entry.manifold);
    std::uniform_real_distribution<double> uq(entry.q_range[0][0], entry.q_range[0][1]);
    std::uniform_real_distribution<double> up(entry.p_range[0][0], entry.p_range[0][1]);
    for (int i = 0; i < 1000; ++i) {
      const double q = uq(rng), p = up(rng);
      const TangentPoint y = legendre::legendre_map(h, PhasePoint::raw(Vec(q), Vec(p)));
      const legendre::LegendreResult back = legendre::legendre_inverse(h, y);
      worst = std::max(worst, std::abs(back.p_star[0] - p));
      ++checked;
    }
  }
  c.passed = checked == 4000 && worst <= 1e-8;
  c.detail = fmt("worst |p - roundtrip| %.3e on %d samples", worst, checked);
}

// 2: fiber-gradient convergence table for a value-convergent family.
void criterion_gradient_trend(Criterion& c) {
  const expr::HamiltonianSequence seq(
      expr::parse("0.5*p1^2 + (1/k)*sin(k*q1)*sin(p1)", kT1), expr::parse("0.5*p1^2", kT1));
  const legendre::ConvergenceTable table = legendre::roc_table(
      seq, {{0.0, kTwoPi}}, {{-3.0, 3.0}}, {4, 8, 16, 32, 64, 128, 256});
  bool capped = true;
  for (const legendre::ConvergenceRow& row : table.rows)
    capped = capped && row.sup_dFp_dev <= 1.5 / row.k;
  const double first = table.rows.front().sup_dFp_dev;
  const double last = table.rows.back().sup_dFp_dev;
  c.passed = capped && last * 20.0 <= first;
  c.detail = fmt("sup gradient dev %.3e -> %.3e (ratio %.0fx), per-k cap %s", first, last,
                 first / last, capped ? "held" : "broken");
}

// 3: two-solution comparison bound across randomized perturbed pendulum pairs.
void criterion_comparison_bound(Criterion& c) {
  const expr::HamiltonianExpr base = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const Box qr{{0.0, kTwoPi}};
  const Box pr{{-3.0, 3.0}};
  const double K = std::max(2.0, dynamics::lipschitz_estimate(base, qr, pr));
  const double h = 1e-3, T = 1.0;
  const double slack = 10.0 * h * h * (1.0 + K * std::exp(K * T));
  std::mt19937_64 rng(424242u);
  std::uniform_real_distribution<double> amp(0.0, 0.08);
  std::uniform_real_distribution<double> uq(0.0, kTwoPi);
  std::uniform_real_distribution<double> up(-1.2, 1.2);
  double worst_margin = -1e9;
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double c1 = amp(rng), c2 = amp(rng);
    const expr::HamiltonianExpr h1 =
        expr::parse(fmt("0.5*p1^2 + 1 - cos(q1) + %.6f*cos(q1)", c1), kT1);
    const expr::HamiltonianExpr h2 =
        expr::parse(fmt("0.5*p1^2 + 1 - cos(q1) + %.6f*sin(2*q1)", c2), kT1);
    const PhasePoint x0(Vec(uq(rng)), Vec(up(rng)), kT1);
    dynamics::FlowSpec s1{h1, std::nullopt, 0.0, T, h, dynamics::Integrator::RK4, 1, 10.0};
    dynamics::FlowSpec s2 = s1;
    s2.H = h2;
    const DiscretizedArc a1 = dynamics::integrate(s1, x0).arc;
    const DiscretizedArc a2 = dynamics::integrate(s2, x0).arc;
    const dynamics::GronwallBoundInput g{
        K, 0.0, dynamics::epsilon_defect(base, a1).defect,
        dynamics::epsilon_defect(base, a2).defect, 0.0};
    for (int i = 0; i < a1.nodes(); ++i) {
      const double margin = dynamics::phase_node_distance(a1, a2, i) -
                            dynamics::gronwall_bound(g, a1.time_at(i)) - slack;
      worst_margin = std::max(worst_margin, margin);
      if (margin > 0.0) ++violations;
    }
  }
  c.passed = violations == 0;
  c.detail = fmt("50 pairs, worst node margin %.3e, %d violations", worst_margin, violations);
}

// 4: direct minimization recovers a flowed orbit and beats random competitors.
void criterion_orbit_recovery(Criterion& c) {
  const expr::HamiltonianExpr h = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const double tau = 0.3;
  dynamics::FlowSpec spec{h, std::nullopt, 0.0, tau, 1e-3, dynamics::Integrator::RK4, 1, 10.0};
  const DiscretizedArc orbit =
      dynamics::euler_lagrange_flow(spec, TangentPoint::raw(Vec(0.5), Vec(1.0))).arc;
  variational::ActionProblem prob{h,   std::nullopt, orbit.q_lift.front(), orbit.q_lift.back(),
                                  tau, 301,          std::nullopt,         100.0};
  const variational::MinimizerResult res = variational::minimize_action(prob);
  double c0 = 0.0;
  for (int i = 0; i < res.arc.nodes(); ++i) {
    const int j = static_cast<int>(std::llround(res.arc.time_at(i) / 1e-3));
    c0 = std::max(c0, std::abs(res.arc.q_lift[static_cast<size_t>(i)][0] -
                               orbit.q_lift[static_cast<size_t>(j)][0]));
  }
  const variational::WeierstrassReport wr = variational::weierstrass_check(
      h, PhasePoint(Vec(0.5), Vec(1.0), kT1), {tau}, std::nullopt, 200, 0.2, 301);
  const bool beat = wr.rows.size() == 1 && wr.rows[0].passed;
  c.passed = c0 <= 1e-4 && beat;
  c.detail = fmt("C0 recovery %.3e, orbit action %.6f vs best of 200 perturbations %.6f", c0,
                 wr.rows[0].orbit_action, wr.rows[0].best_perturbed);
}

// 5 and 6 share one convergence run.
variational::MinimizerConvergenceReport run_convergence() {
  const expr::HamiltonianSequence seq(expr::parse("0.5*p1^2 + (1/k)*sin(k*q1)", kT1),
                                      expr::parse("0.5*p1^2", kT1));
  return variational::minimizer_convergence_experiment(
      seq, PhasePoint(Vec(0.5), Vec(1.0), kT1), {4, 8, 16, 32, 64, 128, 256}, 0.2, 201);
}

void criterion_minimizer_trends(Criterion& c, const variational::MinimizerConvergenceReport& rep) {
  const variational::MinimizerConvergenceRow& first = rep.rows.front();
  const variational::MinimizerConvergenceRow& last = rep.rows.back();
  const bool q5 = last.sup_Q_dev * 5.0 <= first.sup_Q_dev;
  const bool p5 = last.L2_P_dev * 5.0 <= first.L2_P_dev;
  c.passed = q5 && p5 && rep.bounded_ok;
  c.detail = fmt("C0(Q) %.3e -> %.3e, L2(P) %.3e -> %.3e, node norms <= %.3g", first.sup_Q_dev,
                 last.sup_Q_dev, first.L2_P_dev, last.L2_P_dev, rep.uniform_bound_constant);
}

void criterion_action_chain(Criterion& c, const variational::MinimizerConvergenceReport& rep) {
  const double tau = 0.2;
  double worst = -1e9;
  bool ok = true;
  for (const variational::MinimizerConvergenceRow& row : rep.rows) {
    const double margin = std::abs(row.action_gap) - (2.0 * tau * row.eps_hat_k + rep.slack);
    worst = std::max(worst, margin);
    ok = ok && margin <= 0.0 && row.chain_ok;
  }
  c.passed = ok;
  c.detail = fmt("max |action gap| - bound = %.3e over %zu members", worst, rep.rows.size());
}

// 7: local solutions of the evolutionary equation by a characteristic fan.
void criterion_hj(Criterion& c) {
  const expr::HamiltonianExpr free_h = expr::parse("0.5*p1^2", kT1);
  const variational::HJLocalSolution sol =
      variational::hj_solve(free_h, PhasePoint(Vec(0.0), Vec(1.0), kT1), 0.4, 0.15, 41);
  double closed_form_err = 0.0;
  for (double t : {-0.12, -0.05, 0.0, 0.06, 0.14}) {
    for (double q : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
      const double u = sol.value_at(t, Vec(q));
      closed_form_err = std::max(closed_form_err, std::abs(u - (q - 0.5 * t)));
    }
  }
  const expr::HamiltonianExpr pend = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const variational::HJLocalSolution psol =
      variational::hj_solve(pend, PhasePoint(Vec(0.5), Vec(1.0), kT1), 0.4, 0.15, 41);

  const expr::HamiltonianSequence seq(expr::parse("0.5*p1^2 + (1/k)*sin(k*q1)", kT1),
                                      expr::parse("0.5*p1^2", kT1));
  const variational::L2HJReport l2 = variational::l2_convergence_via_hj(
      seq, PhasePoint(Vec(0.5), Vec(1.0), kT1), {4, 8, 16, 32, 64, 128, 256}, 0.2);
  bool ineq = true;
  for (const variational::L2HJRow& row : l2.rows) ineq = ineq && row.inequality_ok;

  c.passed = closed_form_err <= 1e-8 && psol.pde_residual <= 1e-4 &&
             psol.calibration_error <= 1e-5 && ineq;
  c.detail = fmt("closed form %.3e, residual %.3e, calibration %.3e, inequality %s",
                 closed_form_err, psol.pde_residual, psol.calibration_error,
                 ineq ? "held for all k" : "broken");
}

// 8: endpoint difference equals the bracket integral along the flow.
void criterion_flow_identity(Criterion& c) {
  const expr::HamiltonianExpr free_h = expr::parse("0.5*p1^2", kT1);
  const expr::HamiltonianExpr sin_g = expr::parse("sin(q1)", kT1);
  const double closed = bracket::flow_integral_identity_check(
      free_h, sin_g, PhasePoint(Vec(0.0), Vec(1.0), kT1), 1.0);

  std::vector<expr::HamiltonianExpr> pool;
  for (const expr::CorpusEntry& entry : expr::corpus()) {
    if (entry.manifold.dim != 1) continue;
    pool.push_back(expr::parse(entry.source, entry.manifold));
  }
  std::mt19937_64 rng(777u);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> ut(0.5, 2.0);
  std::uniform_real_distribution<double> uq(0.0, kTwoPi);
  std::uniform_real_distribution<double> up(-1.5, 1.5);
  double worst = closed;
  for (int trial = 0; trial < 20; ++trial) {
    const size_t fi = pick(rng), gi = pick(rng);
    const PhasePoint x0(Vec(uq(rng)), Vec(up(rng)), kT1);
    const double res = bracket::flow_integral_identity_check(pool[fi], pool[gi], x0, ut(rng),
                                                             std::nullopt, 5e-4);
    worst = std::max(worst, res);
  }
  c.passed = closed <= 1e-6 && worst <= 1e-6;
  c.detail = fmt("closed-form residual %.3e, worst of 20 random pairs %.3e", closed, worst);
}

// 9: shipped experiment descriptions run end to end with the expected verdicts,
// both in-process and through the command-line driver.
int cli_exit_code(const std::string& cli, const std::string& config, const std::string& out) {
  const std::string cmd = cli + " rigidity --config " + config + " --out " + out +
                          " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void criterion_flagship(Criterion& c) {
  const char* dir_env = std::getenv("RIGLAB_CONFIG_DIR");
  const std::string dir = dir_env ? dir_env : "configs";
  const std::string flagship = dir + "/theorem1_flagship.toml";
  const std::string variant = dir + "/theorem1_hypothesis_not_met.toml";

  const experiment::ExperimentReport main_rep =
      experiment::run_rigidity_experiment(config::experiment_from(config::Toml::parse_file(flagship)));
  const experiment::ExperimentReport variant_rep =
      experiment::run_rigidity_experiment(config::experiment_from(config::Toml::parse_file(variant)));
  const bool main_ok = main_rep.verdict == experiment::Verdict::Pass &&
                       main_rep.hypotheses_met && main_rep.conclusion_sup <= 1e-8;
  const bool variant_ok = variant_rep.verdict == experiment::Verdict::HypothesisNotMet;

  const char* cli_env = std::getenv("RIGLAB_CLI");
  const std::string cli = cli_env ? cli_env : "./rigidity-lab";
  const int code_main = cli_exit_code(cli, flagship, "acceptance_runs/flagship");
  const int code_variant = cli_exit_code(cli, variant, "acceptance_runs/variant");

  c.passed = main_ok && variant_ok && code_main == 0 && code_variant == 0;
  c.detail = fmt("flagship %s (conclusion sup %.3e, exit %d), variant %s (exit %d)",
                 verdict_name(main_rep.verdict), main_rep.conclusion_sup, code_main,
                 verdict_name(variant_rep.verdict), code_variant);
}

// 10: algebraic identities of the bracket on seeded samples.
void criterion_algebra(Criterion& c) {
  const expr::HamiltonianExpr f = expr::parse("0.5*p1^2 + 1 - cos(q1)", kT1);
  const expr::HamiltonianExpr g = expr::parse("sin(q1)", kT1);
  const expr::HamiltonianExpr h = expr::parse("cosh(p1) + 0.5*cos(q1)", kT1);
  const expr::HamiltonianExpr combo = expr::parse("2.5*sin(q1) + cosh(p1) + 0.5*cos(q1)", kT1);
  const expr::HamiltonianExpr gh_prod = expr::parse("(sin(q1))*(cosh(p1) + 0.5*cos(q1))", kT1);
  const expr::HamiltonianExpr gh = bracket::bracket_expr(g, h);
  const expr::HamiltonianExpr hf = bracket::bracket_expr(h, f);
  const expr::HamiltonianExpr fg = bracket::bracket_expr(f, g);

  std::mt19937_64 rng(10101u);
  std::uniform_real_distribution<double> uq(0.0, kTwoPi);
  std::uniform_real_distribution<double> up(-2.0, 2.0);
  bool anti = true;
  double bil = 0.0, leib = 0.0, jac = 0.0;
  for (int i = 0; i < 200; ++i) {
    const PhasePoint x = PhasePoint::raw(Vec(uq(rng)), Vec(up(rng)));
    anti = anti && bracket::bracket(f, g, x) == -bracket::bracket(g, f, x) &&
           bracket::bracket(f, f, x) == 0.0;
    bil = std::max(bil, std::abs(bracket::bracket(f, combo, x) -
                                 (2.5 * bracket::bracket(f, g, x) + bracket::bracket(f, h, x))));
    leib = std::max(
        leib, std::abs(bracket::bracket(f, gh_prod, x) -
                       (bracket::bracket(f, g, x) * h.eval(x) +
                        g.eval(x) * bracket::bracket(f, h, x))));
    jac = std::max(jac, std::abs(bracket::bracket(f, gh, x) + bracket::bracket(g, hf, x) +
                                 bracket::bracket(h, fg, x)));
  }
  c.passed = anti && bil <= 1e-12 && leib <= 1e-10 && jac <= 1e-8;
  c.detail = fmt("antisymmetry %s, bilinearity %.1e, Leibniz %.1e, Jacobi %.1e",
                 anti ? "exact" : "BROKEN", bil, leib, jac);
}

}  // namespace

int main() {
  std::vector<Criterion> cs = {
      {1, "fiber map roundtrip on the corpus", 5.0, false, ""},
      {2, "fiber-gradient convergence trend", 10.0, false, ""},
      {3, "two-solution comparison bound", 30.0, false, ""},
      {4, "orbit recovery by direct minimization", 60.0, false, ""},
      {5, "minimizer convergence trends", 300.0, false, ""},
      {6, "action chain bound", 300.0, false, ""},
      {7, "characteristic-fan local solutions", 120.0, false, ""},
      {8, "bracket integral along the flow", 30.0, false, ""},
      {9, "shipped experiments end to end", 300.0, false, ""},
      {10, "bracket algebra identities", 5.0, false, ""},
  };

  int failures = 0;
  variational::MinimizerConvergenceReport shared;
  for (Criterion& c : cs) {
    const Clock::time_point t0 = Clock::now();
    try {
      switch (c.id) {
        case 1: criterion_roundtrip(c); break;
        case 2: criterion_gradient_trend(c); break;
        case 3: criterion_comparison_bound(c); break;
        case 4: criterion_orbit_recovery(c); break;
        case 5:
          shared = run_convergence();
          criterion_minimizer_trends(c, shared);
          break;
        case 6: criterion_action_chain(c, shared); break;
        case 7: criterion_hj(c); break;
        case 8: criterion_flow_identity(c); break;
        case 9: criterion_flagship(c); break;
        case 10: criterion_algebra(c); break;
      }
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = fmt("threw: %s", e.what());
    }
    c.elapsed = seconds_since(t0);
    if (c.elapsed > c.budget_seconds) {
      c.passed = false;
      c.detail += fmt(" [over budget %.0fs]", c.budget_seconds);
    }
    if (!c.passed) ++failures;
    printf("[%s] %2d %-42s %s (%.2fs)\n", c.passed ? "PASS" : "FAIL", c.id, c.title,
           c.detail.c_str(), c.elapsed);
  }
  printf("%d/%zu criteria passed\n", static_cast<int>(cs.size()) - failures, cs.size());
  return failures == 0 ? 0 : 1;
}

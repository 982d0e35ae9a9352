#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "riglab/bracket.hpp"
#include "riglab/config.hpp"
#include "riglab/dynamics.hpp"
#include "riglab/experiment.hpp"
#include "riglab/legendre.hpp"
#include "riglab/report_io.hpp"
#include "riglab/variational.hpp"

namespace {

using namespace riglab;

struct Opts {
  std::string config;
  std::string out = "runs";
};

void ensure_out(const Opts& o) { std::filesystem::create_directories(o.out); }

std::string out_path(const Opts& o, const char* name) {
  return (std::filesystem::path(o.out) / name).string();
}

int run_parse_check(const Opts& o) {
  const config::Toml toml = config::Toml::parse_file(o.config);
  const ManifoldSpec m = config::manifold_from(toml);
  bool ok = true;
  bool any = false;
  for (const char* key : {"sequences.F.family", "sequences.F.limit", "sequences.G.family",
                          "sequences.G.limit", "experiment.bracket_limit"}) {
    if (!toml.has(key)) continue;
    any = true;
    try {
      const expr::HamiltonianExpr h = expr::parse(toml.get_string(key), m);
      std::printf("%-26s ok      %s\n", key, h.to_string().c_str());
    } catch (const expr::ParseError& e) {
      ok = false;
      std::printf("%-26s FAIL    %s\n", key, e.what());
    }
  }
  if (!any) throw config::ConfigError("no expressions configured under [sequences.*]");
  if (ok && toml.has("experiment.box") && toml.has("experiment.ks") &&
      toml.has("experiment.base_points")) {
    const experiment::RigidityExperiment exp = config::experiment_from(toml);
    const expr::TonelliCertificate cert =
        exp.F_seq.limit.tonelli_check(exp.q_range, exp.p_range, 400, std::nullopt,
                                      exp.scheme.seed);
    std::printf("F limit fiber-Hessian min eigenvalue on box: %.6g (%s)\n",
                cert.hessian_min_eig, cert.tonelli_on_box() ? "convex" : "NOT convex");
    std::printf("superlinearity probe %s\n",
                cert.superlinearity_plausible() ? "increasing" : "NOT increasing");
    if (exp.mode == experiment::Mode::TonelliTheorem && !cert.tonelli_on_box()) ok = false;
  }
  return ok ? 0 : 2;
}

int run_legendre(const Opts& o) {
  const experiment::RigidityExperiment exp =
      config::experiment_from(config::Toml::parse_file(o.config));
  const legendre::ConvergenceTable table =
      legendre::roc_table(exp.F_seq, exp.q_range, exp.p_range, exp.ks, exp.scheme);
  ensure_out(o);
  report_io::write_text_file(out_path(o, "legendre.csv"), table.to_csv());
  const legendre::ConvergenceRow& a = table.rows.front();
  const legendre::ConvergenceRow& b = table.rows.back();
  std::printf("k=%d..%d  sup_F_dev %.3e -> %.3e  sup_dFp_dev %.3e -> %.3e\n", a.k, b.k,
              a.sup_F_dev, b.sup_F_dev, a.sup_dFp_dev, b.sup_dFp_dev);
  std::printf("wrote %s\n", out_path(o, "legendre.csv").c_str());
  const bool trend = b.sup_F_dev <= a.sup_F_dev / 5.0 + 1e-12;
  std::printf("value-deviation trend: %s\n", trend ? "pass" : "fail");
  return trend ? 0 : 2;
}

int run_flow(const Opts& o) {
  const experiment::RigidityExperiment exp =
      config::experiment_from(config::Toml::parse_file(o.config));
  dynamics::FlowSpec spec{exp.F_seq.limit, std::nullopt, 0.0,
                          exp.T,           exp.dt,       dynamics::Integrator::RK4,
                          1,               10.0};
  const dynamics::IntegrationResult res = dynamics::integrate(spec, exp.base_points.front());
  ensure_out(o);
  report_io::write_text_file(out_path(o, "flow.csv"), report_io::arc_csv(res.arc));
  std::printf("flowed [0, %g] in %d nodes, energy drift %.3e\n", exp.T, res.arc.nodes(),
              res.energy_drift);
  std::printf("wrote %s\n", out_path(o, "flow.csv").c_str());
  return 0;
}

int run_minimize(const Opts& o) {
  const experiment::RigidityExperiment exp =
      config::experiment_from(config::Toml::parse_file(o.config));
  const expr::HamiltonianExpr& H = exp.F_seq.limit;
  dynamics::FlowSpec spec{H,      std::nullopt, 0.0,
                          exp.tau, exp.tau / (exp.minimizer_nodes - 1),
                          dynamics::Integrator::RK4, 1, 1e6};
  const DiscretizedArc orbit = dynamics::integrate(spec, exp.base_points.front()).arc;
  variational::ActionProblem prob{H,
                                  std::nullopt,
                                  orbit.q_lift.front(),
                                  orbit.q_lift.back(),
                                  exp.tau,
                                  exp.minimizer_nodes,
                                  std::nullopt,
                                  100.0};
  const variational::MinimizerResult res = variational::minimize_action(prob);
  ensure_out(o);
  report_io::write_text_file(out_path(o, "minimizer.csv"), report_io::arc_csv(res.arc));
  std::printf("action %.12g, gradient %.3e, EL residual %.3e, %lld iterations, confined %s\n",
              res.action, res.grad_norm, res.el_residual, res.iters,
              res.confined ? "yes" : "no");
  std::printf("wrote %s\n", out_path(o, "minimizer.csv").c_str());
  return 0;
}

int run_hj(const Opts& o) {
  const config::Toml toml = config::Toml::parse_file(o.config);
  const experiment::RigidityExperiment exp = config::experiment_from(toml);
  const double radius = toml.get_number_or("experiment.hj_radius", 0.5);
  const int fan = static_cast<int>(toml.get_integer_or("experiment.hj_fan", 33));
  const double tol_pde = toml.get_number_or("experiment.tol_pde", 1e-4);
  const double tol_calibration = toml.get_number_or("experiment.tol_calibration", 1e-5);
  const variational::HJLocalSolution sol = variational::hj_solve(
      exp.F_seq.limit, exp.base_points.front(), radius, exp.tau, fan, std::nullopt, exp.dt);
  ensure_out(o);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"radius\": %.17g,\n  \"tau\": %.17g,\n  \"levels\": %d,\n"
                "  \"pde_residual\": %.17g,\n  \"calibration_error\": %.17g\n}\n",
                sol.radius, sol.tau, sol.levels(), sol.pde_residual, sol.calibration_error);
  report_io::write_text_file(out_path(o, "hj.json"), buf);
  std::printf("pde residual %.3e (tol %.1e), calibration %.3e (tol %.1e)\n", sol.pde_residual,
              tol_pde, sol.calibration_error, tol_calibration);
  std::printf("wrote %s\n", out_path(o, "hj.json").c_str());
  return (sol.pde_residual <= tol_pde && sol.calibration_error <= tol_calibration) ? 0 : 2;
}

int run_bracket(const Opts& o) {
  const experiment::RigidityExperiment exp =
      config::experiment_from(config::Toml::parse_file(o.config));
  const expr::HamiltonianExpr symbolic =
      bracket::bracket_expr(exp.F_seq.limit, exp.G_seq.limit);
  std::printf("{F, G} = %s\n", symbolic.to_string().c_str());
  bool ok = true;
  double declared_dev = 0.0;
  if (exp.declared_bracket_limit) {
    declared_dev =
        sup_phase(exp.q_range, exp.p_range, exp.scheme, [&](const PhasePoint& x) {
          return symbolic.eval(x) - exp.declared_bracket_limit->eval(x);
        });
    std::printf("sup |{F, G} - declared limit| = %.3e (tol %.1e)\n", declared_dev,
                exp.tol.conclusion);
    if (declared_dev > exp.tol.conclusion) ok = false;
  }
  const double residual = bracket::flow_integral_identity_check(
      exp.F_seq.limit, exp.G_seq.limit, exp.base_points.front(), exp.T, std::nullopt, exp.dt);
  std::printf("flow-integral identity residual over [0, %g]: %.3e (tol %.1e)\n", exp.T, residual,
              exp.tol.replay_identity);
  if (residual > exp.tol.replay_identity) ok = false;
  ensure_out(o);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"symbolic\": \"%s\",\n  \"declared_dev\": %.17g,\n"
                "  \"identity_residual\": %.17g\n}\n",
                symbolic.to_string().c_str(), declared_dev, residual);
  report_io::write_text_file(out_path(o, "bracket.json"), buf);
  return ok ? 0 : 2;
}

int run_rigidity(const Opts& o) {
  const experiment::RigidityExperiment exp =
      config::experiment_from(config::Toml::parse_file(o.config));
  const experiment::ExperimentReport rep = experiment::run_rigidity_experiment(exp);
  report_io::write_experiment_outputs(rep, o.out);
  std::printf("verdict: %s\n", experiment::verdict_name(rep.verdict));
  std::printf("hypotheses met: %s (F %d, G %d, bracket %d)\n",
              rep.hypotheses_met ? "yes" : "no", int(rep.f_hyp_met), int(rep.g_hyp_met),
              int(rep.bracket_hyp_met));
  if (!rep.hyp_rows.empty())
    std::printf("bracket deviation %.3e -> %.3e across k\n", rep.hyp_rows.front().sup_bracket_dev,
                rep.hyp_rows.back().sup_bracket_dev);
  std::printf("conclusion sup |{F,G} - limit| = %.3e (%s)\n", rep.conclusion_sup,
              rep.conclusion_ok ? "ok" : "exceeds tolerance");
  std::printf("orbit audit %s, replay %s\n", rep.orbit_ok ? "ok" : "failed",
              rep.replay_ok ? "ok" : "failed");
  std::printf("wrote %s and %s\n", out_path(o, "report.csv").c_str(),
              out_path(o, "report.json").c_str());
  return rep.verdict == experiment::Verdict::Fail ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for Poisson-bracket rigidity on cotangent bundles"};
  app.require_subcommand(1);
  Opts opts;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "experiment description (TOML)")
        ->required();
    sub->add_option("--out", opts.out, "output directory (default runs/)");
    return sub;
  };
  CLI::App* sc_parse =
      add_common(app.add_subcommand("parse-check", "parse the configured expressions"));
  CLI::App* sc_legendre = add_common(
      app.add_subcommand("legendre", "sequence convergence table for the Legendre data"));
  CLI::App* sc_flow = add_common(app.add_subcommand("flow", "integrate the limit flow"));
  CLI::App* sc_minimize =
      add_common(app.add_subcommand("minimize", "fixed-endpoint action minimizer"));
  CLI::App* sc_hj =
      add_common(app.add_subcommand("hj", "local Hamilton-Jacobi solution diagnostics"));
  CLI::App* sc_bracket =
      add_common(app.add_subcommand("bracket", "symbolic bracket and identity checks"));
  CLI::App* sc_rigidity =
      add_common(app.add_subcommand("rigidity", "full rigidity experiment"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sc_parse->parsed()) return run_parse_check(opts);
    if (sc_legendre->parsed()) return run_legendre(opts);
    if (sc_flow->parsed()) return run_flow(opts);
    if (sc_minimize->parsed()) return run_minimize(opts);
    if (sc_hj->parsed()) return run_hj(opts);
    if (sc_bracket->parsed()) return run_bracket(opts);
    if (sc_rigidity->parsed()) return run_rigidity(opts);
  } catch (const riglab::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const riglab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

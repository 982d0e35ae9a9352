#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "riglab/bracket.hpp"
#include "riglab/config.hpp"
#include "riglab/dynamics.hpp"
#include "riglab/experiment.hpp"
#include "riglab/legendre.hpp"
#include "riglab/report_io.hpp"
#include "riglab/variational.hpp"

namespace py = pybind11;
using namespace riglab;

namespace {

Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > 2) throw Error("coordinate lists need 1 or 2 entries");
  Vec out = Vec::zero(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

std::vector<double> from_vec(const Vec& v) {
  std::vector<double> out(static_cast<size_t>(v.n));
  for (int i = 0; i < v.n; ++i) out[static_cast<size_t>(i)] = v[i];
  return out;
}

ManifoldSpec make_manifold(const std::string& kind, int dim,
                           const std::optional<std::vector<double>>& periods) {
  if (kind == "euclidean") {
    if (periods) throw Error("periods only apply to the torus");
    return ManifoldSpec::euclidean(dim);
  }
  if (kind != "torus") throw Error("manifold kind must be 'torus' or 'euclidean'");
  return ManifoldSpec::torus(dim, periods.value_or(std::vector<double>{}));
}

py::dict arc_dict(const DiscretizedArc& arc) {
  py::list t, q, fiber;
  for (int i = 0; i < arc.nodes(); ++i) {
    t.append(arc.time_at(i));
    q.append(from_vec(arc.q_lift[static_cast<size_t>(i)]));
    fiber.append(from_vec(arc.fiber[static_cast<size_t>(i)]));
  }
  py::dict out;
  out["t"] = t;
  out["q"] = q;
  out[arc.kind == ArcKind::Phase ? "p" : "v"] = fiber;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "convex Hamiltonian laboratory: expressions, flows, minimizers, Poisson brackets";

  py::register_exception<Error>(m, "RiglabError");

  py::class_<expr::HamiltonianExpr>(m, "Hamiltonian")
      .def("__repr__",
           [](const expr::HamiltonianExpr& h) { return "Hamiltonian(" + h.to_string() + ")"; })
      .def("to_string", &expr::HamiltonianExpr::to_string)
      .def("has_parameter", &expr::HamiltonianExpr::has_parameter)
      .def("separable", &expr::HamiltonianExpr::separable)
      .def("at_parameter", &expr::HamiltonianExpr::at_parameter, py::arg("k"))
      .def(
          "eval",
          [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
             const std::vector<double>& p, std::optional<double> k) {
            return h.eval(PhasePoint::raw(to_vec(q), to_vec(p)), k);
          },
          py::arg("q"), py::arg("p"), py::arg("k") = std::nullopt)
      .def(
          "partials",
          [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
             const std::vector<double>& p, std::optional<double> k) {
            const expr::Partials parts = h.partials(PhasePoint::raw(to_vec(q), to_vec(p)), k);
            py::dict out;
            out["dq"] = from_vec(parts.dq);
            out["dp"] = from_vec(parts.dp);
            return out;
          },
          py::arg("q"), py::arg("p"), py::arg("k") = std::nullopt)
      .def(
          "tonelli_min_eigenvalue",
          [](const expr::HamiltonianExpr& h, const Box& q_range, const Box& p_range,
             std::optional<double> k) {
            return h.tonelli_check(q_range, p_range, 400, k).hessian_min_eig;
          },
          py::arg("q_range"), py::arg("p_range"), py::arg("k") = std::nullopt);

  m.def(
      "parse",
      [](const std::string& source, const std::string& kind, int dim,
         const std::optional<std::vector<double>>& periods) {
        return expr::parse(source, make_manifold(kind, dim, periods));
      },
      py::arg("source"), py::arg("kind") = "torus", py::arg("dim") = 1,
      py::arg("periods") = std::nullopt);

  m.def(
      "legendre_map",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
         const std::vector<double>& p, std::optional<double> k) {
        return from_vec(legendre::legendre_map(h, PhasePoint::raw(to_vec(q), to_vec(p)), k).v);
      },
      py::arg("H"), py::arg("q"), py::arg("p"), py::arg("k") = std::nullopt);

  m.def(
      "legendre_inverse",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
         const std::vector<double>& v, std::optional<double> k) {
        const legendre::LegendreResult res =
            legendre::legendre_inverse(h, TangentPoint::raw(to_vec(q), to_vec(v)), k);
        py::dict out;
        out["p"] = from_vec(res.p_star);
        out["L"] = res.L_value;
        out["iterations"] = res.newton_iters;
        out["residual"] = res.residual;
        return out;
      },
      py::arg("H"), py::arg("q"), py::arg("v"), py::arg("k") = std::nullopt);

  m.def(
      "lagrangian",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
         const std::vector<double>& v, std::optional<double> k) {
        return legendre::lagrangian(h, TangentPoint::raw(to_vec(q), to_vec(v)), k);
      },
      py::arg("H"), py::arg("q"), py::arg("v"), py::arg("k") = std::nullopt);

  m.def(
      "integrate",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
         const std::vector<double>& p, double t1, double dt, const std::string& method,
         std::optional<double> k, double safety_radius) {
        dynamics::FlowSpec spec{h,
                                k,
                                0.0,
                                t1,
                                dt,
                                method == "verlet" ? dynamics::Integrator::StormerVerletSplit
                                                   : dynamics::Integrator::RK4,
                                1,
                                safety_radius};
        const dynamics::IntegrationResult res =
            dynamics::integrate(spec, PhasePoint(to_vec(q), to_vec(p), h.manifold()));
        py::dict out = arc_dict(res.arc);
        out["energy_drift"] = res.energy_drift;
        return out;
      },
      py::arg("H"), py::arg("q"), py::arg("p"), py::arg("t1"), py::arg("dt") = 1e-3,
      py::arg("method") = "rk4", py::arg("k") = std::nullopt, py::arg("safety_radius") = 10.0);

  m.def(
      "bracket",
      [](const expr::HamiltonianExpr& f, const expr::HamiltonianExpr& g,
         const std::vector<double>& q, const std::vector<double>& p, std::optional<double> k) {
        return bracket::bracket(f, g, PhasePoint::raw(to_vec(q), to_vec(p)), k);
      },
      py::arg("F"), py::arg("G"), py::arg("q"), py::arg("p"), py::arg("k") = std::nullopt);

  m.def("bracket_expr", &bracket::bracket_expr, py::arg("F"), py::arg("G"));

  m.def(
      "flow_identity_residual",
      [](const expr::HamiltonianExpr& f, const expr::HamiltonianExpr& g,
         const std::vector<double>& q, const std::vector<double>& p, double T,
         std::optional<double> k, double dt) {
        return bracket::flow_integral_identity_check(
            f, g, PhasePoint(to_vec(q), to_vec(p), f.manifold()), T, k, dt);
      },
      py::arg("F"), py::arg("G"), py::arg("q"), py::arg("p"), py::arg("T"),
      py::arg("k") = std::nullopt, py::arg("dt") = 1e-3);

  m.def(
      "minimize_action",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q_start,
         const std::vector<double>& q_end, double tau, int n, std::optional<double> k,
         double tol) {
        variational::ActionProblem prob{h,   k, to_vec(q_start), to_vec(q_end),
                                        tau, n, std::nullopt,    100.0};
        const variational::MinimizerResult res = variational::minimize_action(prob, tol);
        py::dict out = arc_dict(res.arc);
        out["action"] = res.action;
        out["grad_norm"] = res.grad_norm;
        out["el_residual"] = res.el_residual;
        out["confined"] = res.confined;
        out["iterations"] = res.iters;
        return out;
      },
      py::arg("H"), py::arg("q_start"), py::arg("q_end"), py::arg("tau"), py::arg("n") = 101,
      py::arg("k") = std::nullopt, py::arg("tol") = 1e-8);

  m.def(
      "hj_diagnostics",
      [](const expr::HamiltonianExpr& h, const std::vector<double>& q,
         const std::vector<double>& p, double r, double tau, int fan_size,
         std::optional<double> k, double dt) {
        const variational::HJLocalSolution sol = variational::hj_solve(
            h, PhasePoint(to_vec(q), to_vec(p), h.manifold()), r, tau, fan_size, k, dt);
        py::dict out;
        out["pde_residual"] = sol.pde_residual;
        out["calibration_error"] = sol.calibration_error;
        out["levels"] = sol.levels();
        return out;
      },
      py::arg("H"), py::arg("q"), py::arg("p"), py::arg("r"), py::arg("tau"),
      py::arg("fan_size") = 33, py::arg("k") = std::nullopt, py::arg("dt") = 1e-3);

  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& out_dir) {
        const experiment::RigidityExperiment exp =
            config::experiment_from(config::Toml::parse_file(config_path));
        const experiment::ExperimentReport rep = experiment::run_rigidity_experiment(exp);
        if (!out_dir.empty()) report_io::write_experiment_outputs(rep, out_dir);
        py::dict out;
        out["verdict"] = std::string(experiment::verdict_name(rep.verdict));
        out["hypotheses_met"] = rep.hypotheses_met;
        out["conclusion_sup"] = rep.conclusion_sup;
        out["conclusion_ok"] = rep.conclusion_ok;
        out["orbit_ok"] = rep.orbit_ok;
        out["replay_ok"] = rep.replay_ok;
        py::list devs;
        for (const experiment::HypothesisRow& r : rep.hyp_rows)
          devs.append(py::make_tuple(r.k, r.sup_F_dev, r.sup_G_dev, r.sup_bracket_dev));
        out["hypothesis_rows"] = devs;
        return out;
      },
      py::arg("config_path"), py::arg("out_dir") = "");
}

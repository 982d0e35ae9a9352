#include "riglab/bracket.hpp"

#include <cmath>
#include <vector>

namespace riglab::bracket {

double bracket(const expr::HamiltonianExpr& F, const expr::HamiltonianExpr& G,
               const PhasePoint& x, std::optional<double> k) {
  const expr::Partials pf = F.partials(x, F.has_parameter() ? k : std::nullopt);
  const expr::Partials pg = G.partials(x, G.has_parameter() ? k : std::nullopt);
  return dot(pf.dq, pg.dp) - dot(pf.dp, pg.dq);
}

expr::HamiltonianExpr bracket_expr(const expr::HamiltonianExpr& F,
                                   const expr::HamiltonianExpr& G) {
  if (!(F.manifold() == G.manifold()))
    throw Error("bracket_expr: F and G live on different manifolds");
  expr::NodePtr sum = expr::constant(0.0);
  for (int i = 0; i < F.manifold().dim; ++i) {
    const expr::NodePtr term =
        expr::sub(expr::mul(expr::differentiate(F.root(), expr::VarKind::Q, i),
                            expr::differentiate(G.root(), expr::VarKind::P, i)),
                  expr::mul(expr::differentiate(F.root(), expr::VarKind::P, i),
                            expr::differentiate(G.root(), expr::VarKind::Q, i)));
    sum = expr::add(sum, term);
  }
  return expr::HamiltonianExpr(sum, F.manifold());
}

double flow_integral_identity_check(const expr::HamiltonianExpr& F,
                                    const expr::HamiltonianExpr& G, const PhasePoint& x,
                                    double T, std::optional<double> k, double dt) {
  dynamics::FlowSpec spec{F, F.has_parameter() ? k : std::nullopt,
                          0.0,  T,
                          dt,   dynamics::Integrator::RK4,
                          1,    10.0};
  const DiscretizedArc arc = dynamics::integrate(spec, x).arc;
  const std::optional<double> kg = G.has_parameter() ? k : std::nullopt;
  std::vector<double> vals(static_cast<size_t>(arc.nodes()));
  for (int i = 0; i < arc.nodes(); ++i)
    vals[static_cast<size_t>(i)] = bracket(G, F, arc.phase_at(i), k);
  const double lhs = G.eval(arc.phase_at(arc.nodes() - 1), kg) - G.eval(arc.phase_at(0), kg);
  return std::abs(lhs - trapezoid(vals, arc.dt()));
}

}  // namespace riglab::bracket

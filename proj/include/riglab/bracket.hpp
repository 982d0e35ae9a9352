#pragma once

// Poisson bracket for the canonical symplectic form on T*M, in coordinates
// {F,G} = dF/dq . dG/dp - dF/dp . dG/dq, plus its symbolic counterpart and
// the endpoint-vs-integral identity along Hamiltonian flows.

#include <optional>

#include "riglab/dynamics.hpp"
#include "riglab/expr.hpp"

namespace riglab::bracket {

// k feeds whichever of F, G carries a parameter.
double bracket(const expr::HamiltonianExpr& F, const expr::HamiltonianExpr& G,
               const PhasePoint& x, std::optional<double> k = std::nullopt);

// {F,G} as an expression on the shared manifold, by exact differentiation.
expr::HamiltonianExpr bracket_expr(const expr::HamiltonianExpr& F,
                                   const expr::HamiltonianExpr& G);

struct BracketFunction {
  expr::HamiltonianExpr F;
  expr::HamiltonianExpr G;

  double operator()(const PhasePoint& x, std::optional<double> k = std::nullopt) const {
    return bracket(F, G, x, k);
  }
};

// |G(end) - G(start) - integral of {G,F} along the flow of F from x over
// [0,T]| with the integral by trapezoid on the flow grid.
double flow_integral_identity_check(const expr::HamiltonianExpr& F,
                                    const expr::HamiltonianExpr& G, const PhasePoint& x,
                                    double T, std::optional<double> k = std::nullopt,
                                    double dt = 1e-3);

}  // namespace riglab::bracket

#pragma once

// Fiberwise Legendre correspondence for convex Hamiltonians: the gradient map
// p -> dH/dp(q, p), its inverse by damped Newton, the Lagrangian
// L(q, v) = p*.v - H(q, p*), and sampled convergence tables for sequences.

#include <optional>
#include <string>
#include <vector>

#include "riglab/expr.hpp"
#include "riglab/sampling.hpp"

namespace riglab::legendre {

class NewtonError : public Error {
 public:
  NewtonError(const std::string& what, Vec last_iterate_, double residual_)
      : Error(what), last_iterate(last_iterate_), residual(residual_) {}
  Vec last_iterate;
  double residual;
};

struct LegendreResult {
  Vec p_star;
  double L_value = 0.0;
  int newton_iters = 0;
  double residual = 0.0;
};

TangentPoint legendre_map(const expr::HamiltonianExpr& H, const PhasePoint& x,
                          std::optional<double> k = std::nullopt);

LegendreResult legendre_inverse(const expr::HamiltonianExpr& H, const TangentPoint& y,
                                std::optional<double> k = std::nullopt, double tol = 1e-10,
                                int max_iters = 100);

double lagrangian(const expr::HamiltonianExpr& H, const TangentPoint& y,
                  std::optional<double> k = std::nullopt);

// L with its exact first derivatives and fiber Hessian, all obtained from the
// conjugate point p*: dL/dv = p*, dL/dq = -dH/dq(q, p*), d2L/dv2 = (d2H/dp2)^-1.
struct LagrangianJet {
  double L = 0.0;
  Vec p_star;  // = dL/dv
  Vec dLdq;
  Mat d2vv;
  int newton_iters = 0;
};

LagrangianJet lagrangian_jet(const expr::HamiltonianExpr& H, const TangentPoint& y,
                             std::optional<double> k = std::nullopt);

struct ConvergenceRow {
  int k = 0;
  double sup_F_dev = 0.0;
  double sup_dFp_dev = 0.0;
  double sup_Linv_dev = 0.0;
  double sup_L_dev = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  // sorted by k ascending
  Box q_range, p_range;
  uint64_t seed = 0;

  std::string to_csv() const;
};

// Sampled sup-deviations between the k-th member and the limit: values,
// fiber gradients, inverse Legendre maps (at equal (q, v)) and Lagrangians.
ConvergenceTable roc_table(const expr::HamiltonianSequence& seq, const Box& q_range,
                           const Box& p_range, std::vector<int> ks,
                           const SampleScheme& scheme = {});

}  // namespace riglab::legendre

#pragma once

// Hamiltonian vector fields and fixed-step flows on T*M, the Euler-Lagrange
// flow by Legendre conjugation, defect measurement for approximate solutions,
// and the Gronwall comparison bound for two such solutions of one field.

#include <optional>
#include <vector>

#include "riglab/expr.hpp"
#include "riglab/sampling.hpp"

namespace riglab::dynamics {

class EscapeError : public Error {
 public:
  EscapeError(const std::string& what, double t_escape_) : Error(what), t_escape(t_escape_) {}
  double t_escape;
};

enum class Integrator { RK4, StormerVerletSplit };

struct FlowSpec {
  expr::HamiltonianExpr H;
  std::optional<double> k;
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  Integrator integrator = Integrator::RK4;
  int record_every = 1;
  double safety_radius = 10.0;  // abort when |p| exceeds this
};

struct PhaseVelocity {
  Vec qdot;
  Vec pdot;
};

// X_H in coordinates: qdot = dH/dp, pdot = -dH/dq.
PhaseVelocity hamiltonian_field(const expr::HamiltonianExpr& H, const PhasePoint& x,
                                std::optional<double> k = std::nullopt);

struct IntegrationResult {
  DiscretizedArc arc;
  double energy_drift = 0.0;  // max over recorded nodes of |H(node) - H(start)|
};

IntegrationResult integrate(const FlowSpec& spec, const PhasePoint& x0);

// Flow on TM conjugated through the Legendre map at both ends.
IntegrationResult euler_lagrange_flow(const FlowSpec& spec, const TangentPoint& y0);

struct DefectEstimate {
  double defect = 0.0;          // max interior |central difference - X(node)|
  double discretization = 0.0;  // h^2-order truncation estimate of the measurement itself
};

// Certifies the arc as an eps-solution of the field of H, eps = defect.
DefectEstimate epsilon_defect(const expr::HamiltonianExpr& H, const DiscretizedArc& arc,
                              std::optional<double> k = std::nullopt);

struct GronwallBoundInput {
  double K = 0.0;
  double delta = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double tau = 0.0;
};

double gronwall_bound(const GronwallBoundInput& g, double t);

// Operator norm of the Jacobian of X_H at x (exact for n = 1, Frobenius upper
// bound for n = 2).
double field_jacobian_norm(const expr::HamiltonianExpr& H, const PhasePoint& x,
                           std::optional<double> k = std::nullopt);

// Sampled max Jacobian norm over the box, inflated by 10%.
double lipschitz_estimate(const expr::HamiltonianExpr& H, const Box& q_range, const Box& p_range,
                          std::optional<double> k = std::nullopt, const SampleScheme& scheme = {});

// Chart distance between same-index nodes of two equal-grid phase arcs.
double phase_node_distance(const DiscretizedArc& a, const DiscretizedArc& b, int i);

struct C1LemmaRow {
  int k = 0;
  double eps_k = 0.0;      // sampled sup over the ball of |X_{F_k} - X_F|
  double sup_dist = 0.0;   // max over grid times of the orbit distance
  double max_margin = 0.0; // max over nodes of dist - bound(t) (slack included)
  bool passed = false;
};

struct C1LemmaReport {
  double r = 0.0;
  double T = 0.0;  // from sup|X_F| * T < r
  double K = 0.0;
  double slack = 0.0;
  std::vector<C1LemmaRow> rows;
  bool hypothesis_met = false;  // eps_k trends to zero across ks
  bool all_passed = false;
};

C1LemmaReport verify_c1_convergence_lemma(const expr::HamiltonianSequence& seq,
                                          const PhasePoint& x0, std::vector<int> ks, double r,
                                          double dt = 1e-3, const SampleScheme& scheme = {});

}  // namespace riglab::dynamics

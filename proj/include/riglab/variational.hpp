#pragma once

// Action functional, direct-method minimization with fixed endpoints,
// Weierstrass local-minimality probes, sequence-convergence experiments for
// minimizers, and local Hamilton-Jacobi solutions by a characteristic fan.

#include <optional>
#include <vector>

#include "riglab/dynamics.hpp"
#include "riglab/expr.hpp"
#include "riglab/legendre.hpp"
#include "riglab/sampling.hpp"

namespace riglab::variational {

// Trapezoid integral of L(q, v) over a tangent arc.
double action(const expr::HamiltonianExpr& H, const DiscretizedArc& arc,
              std::optional<double> k = std::nullopt);

struct ActionProblem {
  expr::HamiltonianExpr H;
  std::optional<double> k;
  Vec q_start;  // lift coordinates
  Vec q_end;    // lift; its winding relative to q_start fixes the homotopy class
  double tau = 1.0;
  int N = 101;
  std::optional<DiscretizedArc> init;  // node positions to start from; straight line when absent
  double safety_radius = 100.0;        // cap on node speeds during the search
};

struct MinimizerResult {
  DiscretizedArc arc;  // tangent nodes; velocities by central differences
  double action = 0.0;
  double grad_norm = 0.0;    // final max-norm of the discrete action gradient
  double el_residual = 0.0;  // max interior |d/dt(dL/dv) - dL/dq|, central differences
  double sublevel_C = 0.0;
  bool confined = false;  // every node keeps H(q, L_q^-1(v)) <= sublevel_C + 2
  long long iters = 0;
};

MinimizerResult minimize_action(const ActionProblem& prob, double tol = 1e-8,
                                long long max_iters = 100000);

struct WeierstrassRow {
  double tau = 0.0;
  double orbit_action = 0.0;
  double best_perturbed = 0.0;  // min action among the perturbations
  bool passed = false;
};

struct WeierstrassReport {
  std::vector<WeierstrassRow> rows;
  double largest_passing_tau = 0.0;  // 0 when none passed
  uint64_t seed = 0;
};

// For each tau, integrates the orbit arc of x0 and checks it beats random
// endpoint-fixed perturbations of the base track.
WeierstrassReport weierstrass_check(const expr::HamiltonianExpr& H, const PhasePoint& x0,
                                    const std::vector<double>& tau_list,
                                    std::optional<double> k = std::nullopt,
                                    int n_perturbations = 200, double amplitude = 0.2,
                                    int N = 201, uint64_t seed = 77001u);

struct MinimizerConvergenceRow {
  int k = 0;
  double sup_Q_dev = 0.0;   // C0 distance of the minimizer base track to the limit orbit
  double L2_P_dev = 0.0;    // L2 distance of the momentum tracks
  double C0_bound = 0.0;    // max node norm of (Q_k, P_k)
  double action_gap = 0.0;  // A_L(g_k) - A_L(g)
  double A_L_gk = 0.0, A_Lk_gk = 0.0, A_Lk_g = 0.0;
  double eps_hat_k = 0.0;  // sampled sup over the sublevel set of |L_k - L|
  bool chain_ok = false;   // the two-sided action comparison chain holds with slack
  bool confined = false;
  int winding_shift[2] = {0, 0};  // chosen class relative to the limit orbit endpoint
  DiscretizedArc minimizer_arc;   // tangent nodes
  DiscretizedArc momentum_arc;    // phase nodes (Q_k, P_k)
};

struct MinimizerConvergenceReport {
  std::vector<MinimizerConvergenceRow> rows;  // ks ascending
  double limit_action = 0.0;
  double uniform_bound_constant = 0.0;  // 2x the limit orbit's max node norm
  double slack = 0.0;
  DiscretizedArc limit_tangent_arc;
  DiscretizedArc limit_phase_arc;
  bool q_trend_ok = false;
  bool p_trend_ok = false;
  bool bounded_ok = false;
  bool chain_all_ok = false;
  bool gaps_ok = false;

  bool all_ok() const {
    return q_trend_ok && p_trend_ok && bounded_ok && chain_all_ok && gaps_ok;
  }
};

// Fixed-endpoint minimizers of the members against the limit orbit through x0.
MinimizerConvergenceReport minimizer_convergence_experiment(const expr::HamiltonianSequence& seq,
                                                            const PhasePoint& x0,
                                                            std::vector<int> ks, double tau,
                                                            int N = 201,
                                                            const SampleScheme& scheme = {});

// Local solution of du/dt + H(q, du) = 0 near an orbit start, represented by a
// fan of characteristics seeded on a linear u_0 with du_0(center.q) = center.p.
struct HJLocalSolution {
  ManifoldSpec manifold;
  PhasePoint center;
  double radius = 0.0;
  double tau = 0.0;
  int fan_per_axis = 0;
  std::vector<double> times;  // uniform grid from -tau to +tau
  // Per time level, one entry per characteristic (row-major over the seed
  // grid for n = 2): base lift, momentum du, and value u.
  std::vector<std::vector<Vec>> q;
  std::vector<std::vector<Vec>> p;
  std::vector<std::vector<double>> u;
  double pde_residual = 0.0;       // max |du/dt + H(q, du)| over the validation grid
  double calibration_error = 0.0;  // max |A_L(orbit [0,t]) - (u_t(orbit t) - u_0(orbit 0))|

  int levels() const { return static_cast<int>(times.size()); }
  int level_of(double t) const;  // nearest grid level
  // Interpolated evaluation at time level j. Throws when q falls outside the fan.
  double value(int j, const Vec& q_query) const;
  Vec gradient(int j, const Vec& q_query) const;
  double value_at(double t, const Vec& q_query) const;  // linear blend between levels
  Vec gradient_at(double t, const Vec& q_query) const;

 private:
  Vec fan_chart(const Vec& q_query) const;  // shift by periods into the fan window
  int locate_1d(int j, double x) const;
};

HJLocalSolution hj_solve(const expr::HamiltonianExpr& H, const PhasePoint& x0, double r,
                         double tau, int fan_size = 33, std::optional<double> k = std::nullopt,
                         double dt = 1e-3);

struct L2HJRow {
  int k = 0;
  double lhs = 0.0;    // A_L(g_k) - (u_tau(g_k(tau)) - u_0(g_k(0)))
  double rhs = 0.0;    // C_q * integral of |g_k' - velocity-of-du along g_k|^2
  double eps_k = 0.0;  // sampled sup of |dL_k/dv - dL/dv| over the region
  double l2_vel_direct = 0.0;  // measured |g_k' - g'|_2
  double l2_vel_bound = 0.0;   // derived bound; must dominate the direct value
  double chain_lhs = 0.0;      // |dL_k/dv(g_k) - dL/dv(g)|_2
  double chain_rhs = 0.0;      // sqrt(tau) eps_k + ell (sqrt(tau)|g_k - g|_C0 + |g_k' - g'|_2)
  bool inequality_ok = false;
  bool bound_dominates = false;
  bool chain_ok = false;
};

struct L2HJReport {
  std::vector<L2HJRow> rows;
  double c_q = 0.0;  // half the min fiber-Hessian eigenvalue of L over the region
  double eps_k_sup = 0.0;  // largest per-k gradient deviation used in the chain
  double ell = 0.0;        // sampled Lipschitz constant of dL/dv
  double slack = 0.0;
  double pde_residual = 0.0;
  double calibration_error = 0.0;
  bool lhs_trend_ok = false;
  bool all_ok = false;
};

L2HJReport l2_convergence_via_hj(const expr::HamiltonianSequence& seq, const PhasePoint& x0,
                                 std::vector<int> ks, double tau, int N = 201,
                                 const SampleScheme& scheme = {});

}  // namespace riglab::variational

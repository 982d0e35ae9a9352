#include "riglab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <future>
#include <limits>
#include <random>

namespace riglab::variational {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<Vec> central_velocities(const std::vector<Vec>& qs, double h) {
  const int n = static_cast<int>(qs.size());
  std::vector<Vec> vs(qs.size());
  vs[0] = (1.0 / h) * (qs[1] - qs[0]);
  for (int j = 1; j + 1 < n; ++j)
    vs[static_cast<size_t>(j)] = (1.0 / (2.0 * h)) * (qs[static_cast<size_t>(j + 1)] -
                                                      qs[static_cast<size_t>(j - 1)]);
  vs[static_cast<size_t>(n - 1)] = (1.0 / h) * (qs[static_cast<size_t>(n - 1)] -
                                                qs[static_cast<size_t>(n - 2)]);
  return vs;
}

DiscretizedArc tangent_arc_from_nodes(const ManifoldSpec& m, double tau, std::vector<Vec> qs) {
  DiscretizedArc arc;
  arc.manifold = m;
  arc.kind = ArcKind::Tangent;
  arc.t0 = 0.0;
  arc.t1 = tau;
  const double h = tau / (static_cast<double>(qs.size()) - 1.0);
  arc.fiber = central_velocities(qs, h);
  arc.q_lift = std::move(qs);
  arc.validate();
  return arc;
}

struct NodeJets {
  std::vector<double> L;
  std::vector<Vec> Lq;
  std::vector<Vec> Lv;  // = p*
};

// Discrete action over the node track plus the jets needed for its gradient.
double discrete_action(const expr::HamiltonianExpr& H, std::optional<double> k,
                       const std::vector<Vec>& qs, double h, double safety_radius,
                       NodeJets* jets) {
  const int n = static_cast<int>(qs.size());
  const std::vector<Vec> vs = central_velocities(qs, h);
  jets->L.resize(qs.size());
  jets->Lq.resize(qs.size());
  jets->Lv.resize(qs.size());
  double a = 0.0;
  for (int j = 0; j < n; ++j) {
    if (norm(vs[static_cast<size_t>(j)]) > safety_radius)
      throw Error("minimize_action: node velocity left the safety box");
    const legendre::LagrangianJet jet = legendre::lagrangian_jet(
        H, TangentPoint::raw(qs[static_cast<size_t>(j)], vs[static_cast<size_t>(j)]), k);
    jets->L[static_cast<size_t>(j)] = jet.L;
    jets->Lq[static_cast<size_t>(j)] = jet.dLdq;
    jets->Lv[static_cast<size_t>(j)] = jet.p_star;
    const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    a += w * jet.L;
  }
  return a * h;
}

// dA/dq_m for interior m; the stencil h*(Lq_m - D_central(Lv)_m).
std::vector<Vec> discrete_gradient(const NodeJets& jets, double h) {
  const int n = static_cast<int>(jets.L.size());
  std::vector<Vec> g(static_cast<size_t>(std::max(0, n - 2)));
  for (int m = 1; m + 1 < n; ++m)
    g[static_cast<size_t>(m - 1)] = h * jets.Lq[static_cast<size_t>(m)] +
                                    0.5 * (jets.Lv[static_cast<size_t>(m - 1)] -
                                           jets.Lv[static_cast<size_t>(m + 1)]);
  return g;
}

double dot_nodes(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += dot(a[i], b[i]);
  return s;
}

double max_node_norm(const std::vector<Vec>& a) {
  double s = 0.0;
  for (const Vec& v : a) s = std::max(s, norm(v));
  return s;
}

// Energy H(q, p) of the conjugate momentum of (q, v).
double legendre_energy(const expr::HamiltonianExpr& H, std::optional<double> k, const Vec& q,
                       const Vec& v) {
  const legendre::LegendreResult inv = legendre::legendre_inverse(H, TangentPoint::raw(q, v), k);
  return H.eval(PhasePoint::raw(q, inv.p_star), k);
}

}  // namespace

double action(const expr::HamiltonianExpr& H, const DiscretizedArc& arc,
              std::optional<double> k) {
  if (arc.kind != ArcKind::Tangent) throw Error("action: expects a tangent arc");
  std::vector<double> samples(static_cast<size_t>(arc.nodes()));
  for (int i = 0; i < arc.nodes(); ++i)
    samples[static_cast<size_t>(i)] = legendre::lagrangian(
        H, TangentPoint::raw(arc.q_lift[static_cast<size_t>(i)],
                             arc.fiber[static_cast<size_t>(i)]),
        k);
  return trapezoid(samples, arc.dt());
}

MinimizerResult minimize_action(const ActionProblem& prob, double tol, long long max_iters) {
  if (prob.tau <= 0.0) throw Error("minimize_action: tau must be positive");
  if (prob.N < 3) throw Error("minimize_action: need at least 3 nodes");
  const int n = prob.N;
  const double h = prob.tau / (n - 1);
  const int dim = prob.H.manifold().dim;
  if (prob.q_start.n != dim || prob.q_end.n != dim)
    throw Error("minimize_action: endpoint dimension mismatch");

  std::vector<Vec> qs(static_cast<size_t>(n));
  if (prob.init) {
    if (prob.init->nodes() != n) throw Error("minimize_action: init arc node count mismatch");
    qs = prob.init->q_lift;
    qs.front() = prob.q_start;
    qs.back() = prob.q_end;
  } else {
    for (int j = 0; j < n; ++j) {
      const double s = static_cast<double>(j) / (n - 1);
      qs[static_cast<size_t>(j)] = prob.q_start + s * (prob.q_end - prob.q_start);
    }
  }

  NodeJets jets;
  double f = discrete_action(prob.H, prob.k, qs, h, prob.safety_radius, &jets);
  std::vector<Vec> g = discrete_gradient(jets, h);
  double gmax = max_node_norm(g);

  std::deque<double> history{f};
  double alpha = 1.0;
  std::vector<Vec> qs_prev, g_prev;
  long long it = 0;
  while (gmax > tol && it < max_iters) {
    // cap the raw step so the first iterations cannot jump across charts
    const double cap = 0.25 / std::max(1e-12, gmax);
    double step = std::min(alpha, cap);
    const double fmax = *std::max_element(history.begin(), history.end());
    const double gg = dot_nodes(g, g);
    std::vector<Vec> trial(qs.size());
    NodeJets trial_jets;
    double f_trial = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      trial = qs;
      for (size_t m = 0; m + 2 < qs.size(); ++m)
        trial[m + 1] = qs[m + 1] - step * g[m];
      try {
        f_trial = discrete_action(prob.H, prob.k, trial, h, prob.safety_radius, &trial_jets);
      } catch (const Error&) {
        step *= 0.5;
        continue;
      }
      if (f_trial <= fmax - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      char buf[120];
      std::snprintf(buf, sizeof(buf),
                    "minimize_action: line search stalled (gradient %.3e after %lld iterations)",
                    gmax, it);
      throw Error(buf);
    }
    qs_prev = std::move(qs);
    g_prev = std::move(g);
    qs = std::move(trial);
    jets = std::move(trial_jets);
    f = f_trial;
    g = discrete_gradient(jets, h);
    gmax = max_node_norm(g);
    history.push_back(f);
    if (history.size() > 10) history.pop_front();

    std::vector<Vec> s_vec(qs.size() > 2 ? qs.size() - 2 : 0), y_vec(s_vec.size());
    for (size_t m = 0; m + 2 < qs.size(); ++m) {
      s_vec[m] = qs[m + 1] - qs_prev[m + 1];
      y_vec[m] = g[m] - g_prev[m];
    }
    const double sy = dot_nodes(s_vec, y_vec);
    const double ss = dot_nodes(s_vec, s_vec);
    alpha = sy > 1e-300 ? std::min(1e6, std::max(1e-12, ss / sy)) : std::min(1e6, alpha * 2.0);
    ++it;
  }
  if (gmax > tol) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "minimize_action: no convergence after %lld iterations (gradient %.3e)",
                  max_iters, gmax);
    throw Error(buf);
  }

  MinimizerResult out;
  out.arc = tangent_arc_from_nodes(prob.H.manifold(), prob.tau, qs);
  out.action = f;
  out.grad_norm = gmax;
  out.iters = it;
  for (int j = 1; j + 1 < n; ++j) {
    const Vec defect = (1.0 / (2.0 * h)) * (jets.Lv[static_cast<size_t>(j + 1)] -
                                            jets.Lv[static_cast<size_t>(j - 1)]) -
                       jets.Lq[static_cast<size_t>(j)];
    out.el_residual = std::max(out.el_residual, norm(defect));
  }

  const std::vector<Vec>& vs = out.arc.fiber;
  double vmax = 0.0;
  for (const Vec& v : vs) vmax = std::max(vmax, norm(v));
  const double r_star = 1.5 * vmax + 1e-9;
  double c = -std::numeric_limits<double>::infinity();
  const int stride = std::max(1, n / 32);
  for (int j = 0; j < n; j += stride) {
    const Vec& q = out.arc.q_lift[static_cast<size_t>(j)];
    const int mv = dim == 1 ? 33 : 9;
    std::vector<int> idx(static_cast<size_t>(dim), 0);
    long long total = 1;
    for (int a = 0; a < dim; ++a) total *= mv;
    for (long long cidx = 0; cidx < total; ++cidx) {
      Vec v = Vec::zero(dim);
      for (int a = 0; a < dim; ++a)
        v[a] = -r_star + 2.0 * r_star * idx[static_cast<size_t>(a)] / (mv - 1);
      for (int a = 0; a < dim; ++a) {
        if (++idx[static_cast<size_t>(a)] < mv) break;
        idx[static_cast<size_t>(a)] = 0;
      }
      if (norm(v) > r_star) continue;
      try {
        c = std::max(c, legendre_energy(prob.H, prob.k, q, v));
      } catch (const Error&) {
      }
    }
  }
  out.sublevel_C = c;
  out.confined = true;
  for (int j = 0; j < n; ++j) {
    const double e = legendre_energy(prob.H, prob.k, out.arc.q_lift[static_cast<size_t>(j)],
                                     vs[static_cast<size_t>(j)]);
    if (e > c + 2.0) out.confined = false;
  }
  return out;
}

WeierstrassReport weierstrass_check(const expr::HamiltonianExpr& H, const PhasePoint& x0,
                                    const std::vector<double>& tau_list, std::optional<double> k,
                                    int n_perturbations, double amplitude, int N, uint64_t seed) {
  WeierstrassReport report;
  report.seed = seed;
  const int dim = H.manifold().dim;
  for (double tau : tau_list) {
    const double dt = tau / (N - 1);
    dynamics::FlowSpec spec{H, k, 0.0, tau, dt, dynamics::Integrator::RK4, 1, 1e6};
    const dynamics::IntegrationResult orbit =
        dynamics::euler_lagrange_flow(spec, legendre::legendre_map(H, x0, k));
    WeierstrassRow row;
    row.tau = tau;
    row.orbit_action = action(H, orbit.arc, k);
    row.best_perturbed = std::numeric_limits<double>::infinity();
    row.passed = true;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int kModes = 5;
    for (int s = 0; s < n_perturbations; ++s) {
      std::vector<Vec> qs = orbit.arc.q_lift;
      double coeff[2][kModes];
      for (int a = 0; a < dim; ++a)
        for (int m = 0; m < kModes; ++m) coeff[a][m] = 2.0 * unit(rng) - 1.0;
      double peak = 0.0;
      std::vector<Vec> deltas(qs.size(), Vec::zero(dim));
      for (int j = 0; j < N; ++j) {
        const double t = orbit.arc.time_at(j);
        Vec d = Vec::zero(dim);
        for (int a = 0; a < dim; ++a)
          for (int m = 0; m < kModes; ++m)
            d[a] += coeff[a][m] * std::sin((m + 1) * kPi * t / tau);
        deltas[static_cast<size_t>(j)] = d;
        peak = std::max(peak, norm(d));
      }
      const double scale = amplitude * (0.25 + 0.75 * unit(rng)) / std::max(peak, 1e-12);
      for (int j = 0; j < N; ++j)
        qs[static_cast<size_t>(j)] += scale * deltas[static_cast<size_t>(j)];
      const DiscretizedArc perturbed = tangent_arc_from_nodes(H.manifold(), tau, std::move(qs));
      const double a_pert = action(H, perturbed, k);
      row.best_perturbed = std::min(row.best_perturbed, a_pert);
      if (a_pert <= row.orbit_action) row.passed = false;
    }
    if (row.passed) report.largest_passing_tau = std::max(report.largest_passing_tau, tau);
    report.rows.push_back(row);
  }
  return report;
}

namespace {

struct LimitOrbit {
  DiscretizedArc phase;
  DiscretizedArc tangent;
};

LimitOrbit limit_orbit_arcs(const expr::HamiltonianExpr& H, const PhasePoint& x0, double tau,
                            int N) {
  dynamics::FlowSpec spec{H, std::nullopt, 0.0, tau, tau / (N - 1), dynamics::Integrator::RK4, 1,
                          1e6};
  LimitOrbit out;
  out.phase = dynamics::integrate(spec, x0).arc;
  out.tangent = out.phase;
  out.tangent.kind = ArcKind::Tangent;
  for (int i = 0; i < out.phase.nodes(); ++i)
    out.tangent.fiber[static_cast<size_t>(i)] =
        H.partials(PhasePoint::raw(out.phase.q_lift[static_cast<size_t>(i)],
                                   out.phase.fiber[static_cast<size_t>(i)]))
            .dp;
  return out;
}

std::vector<std::array<int, 2>> winding_shifts(const ManifoldSpec& m) {
  if (m.kind != ManifoldKind::Torus) return {{0, 0}};
  std::vector<std::array<int, 2>> shifts;
  const int lo = -1, hi = 1;
  if (m.dim == 1) {
    for (int a = lo; a <= hi; ++a) shifts.push_back({a, 0});
  } else {
    for (int a = lo; a <= hi; ++a)
      for (int b = lo; b <= hi; ++b) shifts.push_back({a, b});
  }
  std::sort(shifts.begin(), shifts.end(), [](const auto& x, const auto& y) {
    const int nx = std::abs(x[0]) + std::abs(x[1]);
    const int ny = std::abs(y[0]) + std::abs(y[1]);
    return nx != ny ? nx < ny : x < y;
  });
  return shifts;
}

struct MemberSolve {
  MinimizerResult best;
  std::array<int, 2> shift{0, 0};
  DiscretizedArc momentum;  // phase arc (Q_k, P_k)
};

MemberSolve solve_member(const expr::HamiltonianExpr& member, const Vec& q_start,
                         const Vec& q_end_base, double tau, int N) {
  const ManifoldSpec& m = member.manifold();
  MemberSolve out;
  bool have = false;
  std::string last_error = "no winding class attempted";
  for (const std::array<int, 2>& shift : winding_shifts(m)) {
    Vec q_end = q_end_base;
    for (int a = 0; a < m.dim; ++a)
      if (m.kind == ManifoldKind::Torus) q_end[a] += shift[static_cast<size_t>(a)] * m.period(a);
    ActionProblem prob{member, std::nullopt, q_start, q_end, tau, N, std::nullopt, 100.0};
    try {
      MinimizerResult res = minimize_action(prob);
      if (!have || res.action < out.best.action) {
        out.best = std::move(res);
        out.shift = shift;
        have = true;
      }
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!have) throw Error(std::string("minimizer failed in every winding class: ") + last_error);
  out.momentum = out.best.arc;
  out.momentum.kind = ArcKind::Phase;
  for (int i = 0; i < out.momentum.nodes(); ++i) {
    const legendre::LegendreResult inv = legendre::legendre_inverse(
        member, TangentPoint::raw(out.best.arc.q_lift[static_cast<size_t>(i)],
                                  out.best.arc.fiber[static_cast<size_t>(i)]));
    out.momentum.fiber[static_cast<size_t>(i)] = inv.p_star;
  }
  return out;
}

double max_phase_node_norm(const DiscretizedArc& phase) {
  double b = 0.0;
  for (int i = 0; i < phase.nodes(); ++i) {
    const Vec q = phase.q_reduced(i);
    const Vec& p = phase.fiber[static_cast<size_t>(i)];
    b = std::max(b, std::sqrt(dot(q, q) + dot(p, p)));
  }
  return b;
}

// Sampled sup over the energy sublevel {H(q, p*(q,v)) <= c_cap} of |L_k - L|.
double sup_lagrangian_dev_on_sublevel(const expr::HamiltonianExpr& member,
                                      const expr::HamiltonianExpr& limit, const Box& q_range,
                                      const Box& v_range, double c_cap,
                                      const SampleScheme& scheme) {
  double sup = 0.0;
  for_each_phase_sample(q_range, v_range, scheme, [&](const PhasePoint& x) {
    try {
      if (legendre_energy(limit, std::nullopt, x.q, x.p) > c_cap) return;
      const TangentPoint y = TangentPoint::raw(x.q, x.p);
      sup = std::max(sup,
                     std::abs(legendre::lagrangian(member, y) - legendre::lagrangian(limit, y)));
    } catch (const Error&) {
    }
  });
  return sup;
}

}  // namespace

MinimizerConvergenceReport minimizer_convergence_experiment(const expr::HamiltonianSequence& seq,
                                                            const PhasePoint& x0,
                                                            std::vector<int> ks, double tau,
                                                            int N, const SampleScheme& scheme) {
  std::sort(ks.begin(), ks.end());
  const expr::HamiltonianExpr& limit = seq.limit;
  const ManifoldSpec& m = limit.manifold();
  const double h = tau / (N - 1);

  MinimizerConvergenceReport report;
  const LimitOrbit orbit = limit_orbit_arcs(limit, x0, tau, N);
  report.limit_phase_arc = orbit.phase;
  report.limit_tangent_arc = orbit.tangent;
  report.limit_action = action(limit, orbit.tangent);
  report.uniform_bound_constant = 2.0 * std::max(1.0, max_phase_node_norm(orbit.phase));
  report.slack = 50.0 * h * h * (1.0 + std::abs(report.limit_action)) + 1e-7;

  double vmax = 0.0;
  for (const Vec& v : orbit.tangent.fiber) vmax = std::max(vmax, norm(v));
  const double r_star = 1.5 * vmax + 1e-9;
  Box q_range, v_range;
  for (int a = 0; a < m.dim; ++a) {
    if (m.kind == ManifoldKind::Torus) {
      q_range.push_back({0.0, m.period(a)});
    } else {
      double lo = orbit.phase.q_lift.front()[a], hi = lo;
      for (const Vec& q : orbit.phase.q_lift) {
        lo = std::min(lo, q[a]);
        hi = std::max(hi, q[a]);
      }
      q_range.push_back({lo - 1.0, hi + 1.0});
    }
    v_range.push_back({-(r_star + 1.0), r_star + 1.0});
  }
  double c_limit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < orbit.tangent.nodes(); ++i) {
    const Vec& q = orbit.tangent.q_lift[static_cast<size_t>(i)];
    for (int s = 0; s <= 16; ++s) {
      Vec v = Vec::zero(m.dim);
      v[0] = -r_star + 2.0 * r_star * s / 16.0;
      if (m.dim == 2) v[1] = v[0];
      try {
        c_limit = std::max(c_limit, legendre_energy(limit, std::nullopt, q, v));
      } catch (const Error&) {
      }
    }
  }

  const Vec q_start = orbit.phase.q_lift.front();
  const Vec q_end_base = orbit.phase.q_lift.back();

  auto row_for = [&](int k) {
    const expr::HamiltonianExpr member = seq.at(k);
    MemberSolve solved = solve_member(member, q_start, q_end_base, tau, N);
    MinimizerConvergenceRow row;
    row.k = k;
    row.winding_shift[0] = solved.shift[0];
    row.winding_shift[1] = solved.shift[1];
    row.sup_Q_dev = arc_distance_c0(solved.best.arc, orbit.tangent, ArcComponent::Base);
    row.L2_P_dev = arc_distance_l2(solved.momentum, orbit.phase, ArcComponent::Fiber);
    row.C0_bound = max_phase_node_norm(solved.momentum);
    row.A_L_gk = action(limit, solved.best.arc);
    row.A_Lk_gk = solved.best.action;
    row.A_Lk_g = action(member, orbit.tangent);
    row.action_gap = row.A_L_gk - report.limit_action;
    row.eps_hat_k = sup_lagrangian_dev_on_sublevel(member, limit, q_range, v_range,
                                                   c_limit + 2.0, scheme);
    const double te = tau * row.eps_hat_k + report.slack;
    row.chain_ok = row.A_L_gk <= row.A_Lk_gk + te && row.A_Lk_gk <= row.A_Lk_g + report.slack &&
                   row.A_Lk_g <= report.limit_action + te &&
                   std::abs(row.action_gap) <= 2.0 * tau * row.eps_hat_k + report.slack;
    row.confined = solved.best.confined;
    row.minimizer_arc = std::move(solved.best.arc);
    row.momentum_arc = std::move(solved.momentum);
    return row;
  };

  std::vector<std::future<MinimizerConvergenceRow>> jobs;
  jobs.reserve(ks.size());
  for (int k : ks) jobs.push_back(std::async(std::launch::async, row_for, k));
  for (auto& j : jobs) report.rows.push_back(j.get());

  if (!report.rows.empty()) {
    const MinimizerConvergenceRow& a = report.rows.front();
    const MinimizerConvergenceRow& b = report.rows.back();
    report.q_trend_ok = b.sup_Q_dev <= a.sup_Q_dev / 5.0 + 1e-12;
    report.p_trend_ok = b.L2_P_dev <= a.L2_P_dev / 5.0 + 1e-12;
    report.gaps_ok =
        std::abs(b.action_gap) <= std::max(std::abs(a.action_gap) / 5.0, report.slack);
    report.bounded_ok = true;
    report.chain_all_ok = true;
    for (const MinimizerConvergenceRow& r : report.rows) {
      if (r.C0_bound > report.uniform_bound_constant) report.bounded_ok = false;
      if (!r.chain_ok) report.chain_all_ok = false;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Hamilton-Jacobi by a characteristic fan

int HJLocalSolution::level_of(double t) const {
  const double dt = times[1] - times[0];
  const long long j = std::llround((t - times[0]) / dt);
  if (j < 0 || j >= static_cast<long long>(times.size()))
    throw Error("hj: time outside the solved window");
  return static_cast<int>(j);
}

Vec HJLocalSolution::fan_chart(const Vec& q_query) const {
  Vec out = q_query;
  if (manifold.kind == ManifoldKind::Torus) {
    for (int a = 0; a < manifold.dim; ++a) {
      const double per = manifold.period(a);
      out[a] += per * std::floor((center.q[a] - out[a]) / per + 0.5);
    }
  }
  return out;
}

int HJLocalSolution::locate_1d(int j, double x) const {
  const std::vector<Vec>& qs = q[static_cast<size_t>(j)];
  const int nfan = static_cast<int>(qs.size());
  if (x < qs.front()[0] - 1e-9 || x > qs.back()[0] + 1e-9)
    throw Error("hj: query outside the characteristic fan");
  int lo = 0, hi = nfan - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (qs[static_cast<size_t>(mid)][0] <= x)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

namespace {

struct Hermite {
  double value;
  double slope;
};

Hermite hermite_eval(double x0, double x1, double u0, double u1, double p0, double p1, double x) {
  const double w = x1 - x0;
  const double s = (x - x0) / w;
  const double s2 = s * s, s3 = s2 * s;
  Hermite out;
  out.value = (2 * s3 - 3 * s2 + 1) * u0 + w * (s3 - 2 * s2 + s) * p0 + (-2 * s3 + 3 * s2) * u1 +
              w * (s3 - s2) * p1;
  out.slope = ((6 * s2 - 6 * s) * u0 / w + (3 * s2 - 4 * s + 1) * p0 +
               (6 * s - 6 * s2) * u1 / w + (3 * s2 - 2 * s) * p1);
  return out;
}

// RK4 on the Hamiltonian field with a signed step; arcs cannot carry
// backward time grids, so the fan keeps raw node lists.
std::vector<PhasePoint> flow_raw(const expr::HamiltonianExpr& H, std::optional<double> k,
                                 const PhasePoint& x0, double h, long long steps) {
  std::vector<PhasePoint> out;
  out.reserve(static_cast<size_t>(steps) + 1);
  PhasePoint z = PhasePoint::raw(x0.q, x0.p);
  out.push_back(z);
  auto f = [&](const Vec& q, const Vec& p) {
    return dynamics::hamiltonian_field(H, PhasePoint::raw(q, p), k);
  };
  for (long long s = 0; s < steps; ++s) {
    const auto k1 = f(z.q, z.p);
    const auto k2 = f(z.q + (0.5 * h) * k1.qdot, z.p + (0.5 * h) * k1.pdot);
    const auto k3 = f(z.q + (0.5 * h) * k2.qdot, z.p + (0.5 * h) * k2.pdot);
    const auto k4 = f(z.q + h * k3.qdot, z.p + h * k3.pdot);
    z = PhasePoint::raw(
        z.q + (h / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot),
        z.p + (h / 6.0) * (k1.pdot + 2.0 * k2.pdot + 2.0 * k3.pdot + k4.pdot));
    if (!(norm(z.p) <= 1e6)) throw Error("hj_solve: characteristic escaped");
    out.push_back(z);
  }
  return out;
}

}  // namespace

double HJLocalSolution::value(int j, const Vec& q_query) const {
  const Vec x = fan_chart(q_query);
  const size_t sj = static_cast<size_t>(j);
  if (manifold.dim == 1) {
    const int i = locate_1d(j, x[0]);
    const size_t si = static_cast<size_t>(i);
    return hermite_eval(q[sj][si][0], q[sj][si + 1][0], u[sj][si], u[sj][si + 1], p[sj][si][0],
                        p[sj][si + 1][0], x[0])
        .value;
  }
  const int f = fan_per_axis;
  for (int cb = 0; cb + 1 < f; ++cb)
    for (int ca = 0; ca + 1 < f; ++ca) {
      const int i00 = cb * f + ca, i10 = i00 + 1, i01 = i00 + f, i11 = i01 + 1;
      for (const auto& tri : {std::array<int, 3>{i00, i10, i11}, {i00, i11, i01}}) {
        const Vec& a = q[sj][static_cast<size_t>(tri[0])];
        const Vec& b = q[sj][static_cast<size_t>(tri[1])];
        const Vec& c = q[sj][static_cast<size_t>(tri[2])];
        const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if (std::abs(det) < 1e-300) continue;
        const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < -1e-9 || l1 < -1e-9 || l2 < -1e-9) continue;
        double val = 0.0;
        const double ls[3] = {l0, l1, l2};
        for (int v3 = 0; v3 < 3; ++v3) {
          const size_t iv = static_cast<size_t>(tri[static_cast<size_t>(v3)]);
          const Vec d = x - q[sj][iv];
          val += ls[v3] * (u[sj][iv] + dot(p[sj][iv], d));
        }
        return val;
      }
    }
  throw Error("hj: query outside the characteristic fan");
}

Vec HJLocalSolution::gradient(int j, const Vec& q_query) const {
  const Vec x = fan_chart(q_query);
  const size_t sj = static_cast<size_t>(j);
  if (manifold.dim == 1) {
    const int i = locate_1d(j, x[0]);
    const size_t si = static_cast<size_t>(i);
    return Vec(hermite_eval(q[sj][si][0], q[sj][si + 1][0], u[sj][si], u[sj][si + 1],
                            p[sj][si][0], p[sj][si + 1][0], x[0])
                   .slope);
  }
  const int f = fan_per_axis;
  for (int cb = 0; cb + 1 < f; ++cb)
    for (int ca = 0; ca + 1 < f; ++ca) {
      const int i00 = cb * f + ca, i10 = i00 + 1, i01 = i00 + f, i11 = i01 + 1;
      for (const auto& tri : {std::array<int, 3>{i00, i10, i11}, {i00, i11, i01}}) {
        const Vec& a = q[sj][static_cast<size_t>(tri[0])];
        const Vec& b = q[sj][static_cast<size_t>(tri[1])];
        const Vec& c = q[sj][static_cast<size_t>(tri[2])];
        const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if (std::abs(det) < 1e-300) continue;
        const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < -1e-9 || l1 < -1e-9 || l2 < -1e-9) continue;
        Vec grad = Vec::zero(2);
        const double ls[3] = {l0, l1, l2};
        for (int v3 = 0; v3 < 3; ++v3)
          grad += ls[v3] * p[sj][static_cast<size_t>(tri[static_cast<size_t>(v3)])];
        return grad;
      }
    }
  throw Error("hj: query outside the characteristic fan");
}

double HJLocalSolution::value_at(double t, const Vec& q_query) const {
  const double dt = times[1] - times[0];
  const double s = (t - times[0]) / dt;
  const int j0 = std::clamp(static_cast<int>(std::floor(s)), 0, levels() - 2);
  const double w = s - j0;
  return (1.0 - w) * value(j0, q_query) + w * value(j0 + 1, q_query);
}

Vec HJLocalSolution::gradient_at(double t, const Vec& q_query) const {
  const double dt = times[1] - times[0];
  const double s = (t - times[0]) / dt;
  const int j0 = std::clamp(static_cast<int>(std::floor(s)), 0, levels() - 2);
  const double w = s - j0;
  return (1.0 - w) * gradient(j0, q_query) + w * gradient(j0 + 1, q_query);
}

HJLocalSolution hj_solve(const expr::HamiltonianExpr& H, const PhasePoint& x0, double r,
                         double tau, int fan_size, std::optional<double> k, double dt) {
  if (r <= 0.0 || tau <= 0.0) throw Error("hj_solve: r and tau must be positive");
  const int dim = H.manifold().dim;
  if (fan_size < 5) fan_size = 5;
  if (fan_size % 2 == 0) ++fan_size;
  const int chars = dim == 1 ? fan_size : fan_size * fan_size;
  const long long steps = std::max(1ll, std::llround(tau / dt));
  const double delta = tau / static_cast<double>(steps);
  const int levels = static_cast<int>(2 * steps + 1);

  HJLocalSolution sol;
  sol.manifold = H.manifold();
  sol.center = x0;
  sol.radius = r;
  sol.tau = tau;
  sol.fan_per_axis = fan_size;
  sol.times.resize(static_cast<size_t>(levels));
  for (int j = 0; j < levels; ++j)
    sol.times[static_cast<size_t>(j)] = -tau + delta * j;
  sol.q.assign(static_cast<size_t>(levels), std::vector<Vec>(static_cast<size_t>(chars)));
  sol.p = sol.q;
  sol.u.assign(static_cast<size_t>(levels), std::vector<double>(static_cast<size_t>(chars)));

  const double h_fan = 2.0 * r / (fan_size - 1);
  auto seed_of = [&](int i) {
    Vec s = x0.q;
    if (dim == 1) {
      s[0] += -r + h_fan * i;
    } else {
      s[0] += -r + h_fan * (i % fan_size);
      s[1] += -r + h_fan * (i / fan_size);
    }
    return s;
  };

  const int mid = static_cast<int>(steps);
  for (int i = 0; i < chars; ++i) {
    const Vec qi = seed_of(i);
    const PhasePoint zi = PhasePoint::raw(qi, x0.p);  // du0 = p0 everywhere (linear seed)
    const double u0 = dot(x0.p, qi - x0.q);
    const std::vector<PhasePoint> fwd = flow_raw(H, k, zi, delta, steps);
    const std::vector<PhasePoint> bwd = flow_raw(H, k, zi, -delta, steps);
    auto lagr_rate = [&](const Vec& qq, const Vec& pp) {
      const expr::Partials parts = H.partials(PhasePoint::raw(qq, pp), k);
      return dot(pp, parts.dp) - H.eval(PhasePoint::raw(qq, pp), k);
    };
    double acc = u0;
    double prev_rate = lagr_rate(qi, x0.p);
    for (int s = 0; s <= static_cast<int>(steps); ++s) {
      const size_t level = static_cast<size_t>(mid + s);
      const PhasePoint& node = fwd[static_cast<size_t>(s)];
      const double rate = lagr_rate(node.q, node.p);
      if (s > 0) acc += 0.5 * delta * (prev_rate + rate);
      prev_rate = rate;
      sol.q[level][static_cast<size_t>(i)] = node.q;
      sol.p[level][static_cast<size_t>(i)] = node.p;
      sol.u[level][static_cast<size_t>(i)] = acc;
    }
    acc = u0;
    prev_rate = lagr_rate(qi, x0.p);
    for (int s = 0; s <= static_cast<int>(steps); ++s) {
      const size_t level = static_cast<size_t>(mid - s);
      const PhasePoint& node = bwd[static_cast<size_t>(s)];
      const double rate = lagr_rate(node.q, node.p);
      if (s > 0) acc -= 0.5 * delta * (prev_rate + rate);
      prev_rate = rate;
      sol.q[level][static_cast<size_t>(i)] = node.q;
      sol.p[level][static_cast<size_t>(i)] = node.p;
      sol.u[level][static_cast<size_t>(i)] = acc;
    }
  }

  for (int j = 0; j < levels; ++j) {
    const auto& qs = sol.q[static_cast<size_t>(j)];
    if (dim == 1) {
      for (int i = 0; i + 1 < chars; ++i) {
        const double gap = qs[static_cast<size_t>(i + 1)][0] - qs[static_cast<size_t>(i)][0];
        if (gap < h_fan / 2.0)
          throw Error("hj_solve: characteristics cross; reduce tau or the radius");
      }
    } else {
      for (int b = 0; b < fan_size; ++b)
        for (int a = 0; a < fan_size; ++a) {
          const int i0 = b * fan_size + a;
          if (a + 1 < fan_size) {
            const Vec d = qs[static_cast<size_t>(i0 + 1)] - qs[static_cast<size_t>(i0)];
            if (norm(d) < h_fan / 2.0)
              throw Error("hj_solve: characteristics cross; reduce tau or the radius");
          }
          if (b + 1 < fan_size) {
            const Vec d = qs[static_cast<size_t>(i0 + fan_size)] - qs[static_cast<size_t>(i0)];
            if (norm(d) < h_fan / 2.0)
              throw Error("hj_solve: characteristics cross; reduce tau or the radius");
          }
        }
    }
  }

  // The fan drifts with the characteristics, so probe a static grid and skip
  // the points it no longer covers at a given level.
  const int stride = std::max(1, levels / 41);
  const int qgrid = dim == 1 ? 21 : 9;
  long long probed = 0;
  for (int j = 1; j + 1 < levels; j += stride) {
    for (int ia = 0; ia < qgrid; ++ia) {
      for (int ib = 0; ib < (dim == 1 ? 1 : qgrid); ++ib) {
        Vec qq = x0.q;
        qq[0] += -0.7 * r + 1.4 * r * ia / (qgrid - 1);
        if (dim == 2) qq[1] += -0.7 * r + 1.4 * r * ib / (qgrid - 1);
        try {
          const double dudt =
              (sol.value(j + 1, qq) - sol.value(j - 1, qq)) / (2.0 * delta);
          const double res = std::abs(dudt + H.eval(PhasePoint::raw(qq, sol.gradient(j, qq)), k));
          sol.pde_residual = std::max(sol.pde_residual, res);
          ++probed;
        } catch (const Error&) {
        }
      }
    }
  }
  if (probed < 10)
    throw Error("hj_solve: fan too narrow to validate the residual; widen r or shorten tau");

  {
    const int center_index = dim == 1 ? fan_size / 2 : (fan_size / 2) * fan_size + fan_size / 2;
    double a_accum = 0.0;
    double prev_l = 0.0;
    const double u_start = sol.value(mid, x0.q);
    for (int s = 0; s <= static_cast<int>(steps); ++s) {
      const size_t level = static_cast<size_t>(mid + s);
      const Vec& qq = sol.q[level][static_cast<size_t>(center_index)];
      const Vec& pp = sol.p[level][static_cast<size_t>(center_index)];
      const Vec vel = H.partials(PhasePoint::raw(qq, pp), k).dp;
      const double l_val = legendre::lagrangian_jet(H, TangentPoint::raw(qq, vel), k).L;
      if (s > 0) a_accum += 0.5 * delta * (prev_l + l_val);
      prev_l = l_val;
      const double u_here = sol.value(static_cast<int>(level), qq);
      sol.calibration_error =
          std::max(sol.calibration_error, std::abs(a_accum - (u_here - u_start)));
    }
  }
  return sol;
}

L2HJReport l2_convergence_via_hj(const expr::HamiltonianSequence& seq, const PhasePoint& x0,
                                 std::vector<int> ks, double tau, int N,
                                 const SampleScheme& scheme) {
  std::sort(ks.begin(), ks.end());
  const expr::HamiltonianExpr& limit = seq.limit;
  const int dim = limit.manifold().dim;
  const double h = tau / (N - 1);

  const LimitOrbit orbit = limit_orbit_arcs(limit, x0, tau, N);
  const double a_limit = action(limit, orbit.tangent);

  double reach = 0.0;
  for (const Vec& qv : orbit.phase.q_lift) reach = std::max(reach, norm(qv - x0.q));
  const double r = std::max(0.15, 2.5 * reach + 0.05);
  HJLocalSolution hj = hj_solve(limit, x0, r, tau, dim == 1 ? 41 : 9, std::nullopt, h);

  L2HJReport report;
  report.pde_residual = hj.pde_residual;
  report.calibration_error = hj.calibration_error;
  report.slack = 2.0 * hj.calibration_error + 2.0 * tau * hj.pde_residual +
                 20.0 * h * h * (1.0 + std::abs(a_limit));

  double vlo = 0.0, vhi = 0.0;
  for (const Vec& v : orbit.tangent.fiber)
    for (int a = 0; a < dim; ++a) {
      vlo = std::min(vlo, v[a]);
      vhi = std::max(vhi, v[a]);
    }
  Box q_range, v_range;
  for (int a = 0; a < dim; ++a) {
    q_range.push_back({x0.q[a] - r, x0.q[a] + r});
    v_range.push_back({vlo - 0.5, vhi + 0.5});
  }
  const SampleScheme small_scheme{8, 200, scheme.seed};
  double min_eig = std::numeric_limits<double>::infinity();
  double ell = 0.0;
  for_each_phase_sample(q_range, v_range, small_scheme, [&](const PhasePoint& x) {
    const TangentPoint y = TangentPoint::raw(x.q, x.p);
    const legendre::LagrangianJet jet = legendre::lagrangian_jet(limit, y);
    min_eig = std::min(min_eig, jet.d2vv.min_eigenvalue());
    double sq = 0.0;
    const double fd = 1e-5;
    for (int a = 0; a < dim; ++a) {
      Vec qp = x.q, qm = x.q;
      qp[a] += fd;
      qm[a] -= fd;
      const Vec dpdq =
          (1.0 / (2.0 * fd)) *
          (legendre::legendre_inverse(limit, TangentPoint::raw(qp, x.p)).p_star -
           legendre::legendre_inverse(limit, TangentPoint::raw(qm, x.p)).p_star);
      sq += dot(dpdq, dpdq);
    }
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) sq += jet.d2vv(a, b) * jet.d2vv(a, b);
    ell = std::max(ell, std::sqrt(sq));
  });
  if (!(min_eig > 0.0)) throw Error("l2_convergence_via_hj: Lagrangian fiber Hessian not positive");
  report.c_q = 0.5 * min_eig;
  report.ell = 1.1 * ell;

  const Vec q_start = orbit.phase.q_lift.front();
  const Vec q_end_base = orbit.phase.q_lift.back();
  const int mid = hj.level_of(0.0);

  auto row_for = [&](int k) {
    const expr::HamiltonianExpr member = seq.at(k);
    MemberSolve solved = solve_member(member, q_start, q_end_base, tau, N);
    L2HJRow row;
    row.k = k;
    const DiscretizedArc& gk = solved.best.arc;

    const double a_l_gk = action(limit, gk);
    const double u_end = hj.value(hj.levels() - 1, gk.q_lift.back());
    const double u_start = hj.value(mid, gk.q_lift.front());
    row.lhs = a_l_gk - (u_end - u_start);

    std::vector<double> gap_sq(static_cast<size_t>(N));
    std::vector<double> drift_sq(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j) {
      const Vec& qj = gk.q_lift[static_cast<size_t>(j)];
      const Vec du = hj.gradient(mid + j, qj);
      const Vec char_vel = limit.partials(PhasePoint::raw(qj, du)).dp;
      const Vec dv = gk.fiber[static_cast<size_t>(j)] - char_vel;
      gap_sq[static_cast<size_t>(j)] = dot(dv, dv);
      const Vec dg = char_vel - orbit.tangent.fiber[static_cast<size_t>(j)];
      drift_sq[static_cast<size_t>(j)] = dot(dg, dg);
    }
    row.rhs = report.c_q * trapezoid(gap_sq, h);
    row.inequality_ok = row.lhs >= row.rhs - report.slack;

    row.l2_vel_direct = arc_distance_l2(gk, orbit.tangent, ArcComponent::Fiber);
    row.l2_vel_bound = std::sqrt(std::max(row.lhs + report.slack, 0.0) / report.c_q) +
                       std::sqrt(trapezoid(drift_sq, h));
    row.bound_dominates = row.l2_vel_bound >= row.l2_vel_direct - 1e-9;

    for_each_phase_sample(q_range, v_range, small_scheme, [&](const PhasePoint& x) {
      const TangentPoint y = TangentPoint::raw(x.q, x.p);
      row.eps_k = std::max(row.eps_k, norm(legendre::legendre_inverse(member, y).p_star -
                                           legendre::legendre_inverse(limit, y).p_star));
    });
    const double sup_q = arc_distance_c0(gk, orbit.tangent, ArcComponent::Base);
    row.chain_lhs = arc_distance_l2(solved.momentum, orbit.phase, ArcComponent::Fiber);
    row.chain_rhs = std::sqrt(tau) * row.eps_k +
                    report.ell * (std::sqrt(tau) * sup_q + row.l2_vel_direct);
    row.chain_ok = row.chain_lhs <= row.chain_rhs + 1e-6;
    return row;
  };

  std::vector<std::future<L2HJRow>> jobs;
  jobs.reserve(ks.size());
  for (int k : ks) jobs.push_back(std::async(std::launch::async, row_for, k));
  for (auto& j : jobs) {
    report.rows.push_back(j.get());
    report.eps_k_sup = std::max(report.eps_k_sup, report.rows.back().eps_k);
  }

  if (!report.rows.empty()) {
    const double first = std::abs(report.rows.front().lhs);
    const double last = std::abs(report.rows.back().lhs);
    report.lhs_trend_ok = last <= std::max(first / 5.0, report.slack);
  }
  report.all_ok = report.lhs_trend_ok;
  for (const L2HJRow& r2 : report.rows)
    if (!(r2.inequality_ok && r2.bound_dominates && r2.chain_ok)) report.all_ok = false;
  return report;
}

}  // namespace riglab::variational

#include "riglab/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>

namespace riglab::legendre {

TangentPoint legendre_map(const expr::HamiltonianExpr& H, const PhasePoint& x,
                          std::optional<double> k) {
  return TangentPoint::raw(x.q, H.partials(x, k).dp);
}

LegendreResult legendre_inverse(const expr::HamiltonianExpr& H, const TangentPoint& y,
                                std::optional<double> k, double tol, int max_iters) {
  if (tol <= 0.0) throw Error("legendre_inverse: tol must be positive");
  Vec p = y.v;
  auto residual_of = [&](const Vec& pc) {
    return H.partials(PhasePoint::raw(y.q, pc), k).dp - y.v;
  };
  Vec r = residual_of(p);
  double rn = norm(r);
  int iters = 0;
  while (rn > tol) {
    if (iters >= max_iters) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "legendre_inverse: no convergence after %d iterations (residual %.3e)",
                    max_iters, rn);
      throw NewtonError(buf, p, rn);
    }
    const Mat hess = H.partials(PhasePoint::raw(y.q, p), k).d2pp;
    Vec step;
    try {
      step = hess.solve(r);
    } catch (const Error&) {
      throw NewtonError("legendre_inverse: singular fiber Hessian", p, rn);
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Vec trial = p - lambda * step;
      try {
        const Vec tr = residual_of(trial);
        const double trn = norm(tr);
        if (trn < rn) {
          p = trial;
          r = tr;
          rn = trn;
          accepted = true;
          break;
        }
      } catch (const expr::EvalDomainError&) {
      }
      lambda *= 0.5;
    }
    if (!accepted)
      throw NewtonError("legendre_inverse: damped step failed to reduce the residual", p, rn);
    ++iters;
  }
  LegendreResult out;
  out.p_star = p;
  out.L_value = dot(p, y.v) - H.eval(PhasePoint::raw(y.q, p), k);
  out.newton_iters = iters;
  out.residual = rn;
  return out;
}

double lagrangian(const expr::HamiltonianExpr& H, const TangentPoint& y, std::optional<double> k) {
  return legendre_inverse(H, y, k).L_value;
}

LagrangianJet lagrangian_jet(const expr::HamiltonianExpr& H, const TangentPoint& y,
                             std::optional<double> k) {
  const LegendreResult inv = legendre_inverse(H, y, k);
  const PhasePoint conj = PhasePoint::raw(y.q, inv.p_star);
  const expr::Partials parts = H.partials(conj, k);
  LagrangianJet jet;
  jet.L = inv.L_value;
  jet.p_star = inv.p_star;
  jet.dLdq = -1.0 * parts.dq;
  Mat inv_hess = Mat::zero(parts.d2pp.n);
  const Mat& m = parts.d2pp;
  if (m.n == 1) {
    if (m(0, 0) == 0.0) throw NewtonError("lagrangian_jet: singular fiber Hessian", inv.p_star, 0);
    inv_hess(0, 0) = 1.0 / m(0, 0);
  } else {
    const double d = m.det();
    if (d == 0.0) throw NewtonError("lagrangian_jet: singular fiber Hessian", inv.p_star, 0);
    inv_hess(0, 0) = m(1, 1) / d;
    inv_hess(1, 1) = m(0, 0) / d;
    inv_hess(0, 1) = -m(0, 1) / d;
    inv_hess(1, 0) = -m(1, 0) / d;
  }
  jet.d2vv = inv_hess;
  jet.newton_iters = inv.newton_iters;
  return jet;
}

std::string ConvergenceTable::to_csv() const {
  std::string out = "k,sup_F_dev,sup_dFp_dev,sup_Linv_dev,sup_L_dev\n";
  char buf[200];
  for (const ConvergenceRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.k, r.sup_F_dev,
                  r.sup_dFp_dev, r.sup_Linv_dev, r.sup_L_dev);
    out += buf;
  }
  return out;
}

ConvergenceTable roc_table(const expr::HamiltonianSequence& seq, const Box& q_range,
                           const Box& p_range, std::vector<int> ks, const SampleScheme& scheme) {
  std::sort(ks.begin(), ks.end());
  ConvergenceTable table;
  table.q_range = q_range;
  table.p_range = p_range;
  table.seed = scheme.seed;

  const expr::HamiltonianExpr& limit = seq.limit;
  auto row_for = [&](int k) {
    const expr::HamiltonianExpr member = seq.at(k);
    ConvergenceRow row;
    row.k = k;
    row.sup_F_dev = sup_phase(q_range, p_range, scheme, [&](const PhasePoint& x) {
      return member.eval(x) - limit.eval(x);
    });
    row.sup_dFp_dev = sup_phase(q_range, p_range, scheme, [&](const PhasePoint& x) {
      return norm(member.partials(x).dp - limit.partials(x).dp);
    });
    row.sup_Linv_dev = sup_phase(q_range, p_range, scheme, [&](const PhasePoint& x) {
      const TangentPoint y = TangentPoint::raw(x.q, x.p);  // fiber box reused as velocities
      try {
        return norm(legendre_inverse(member, y).p_star - legendre_inverse(limit, y).p_star);
      } catch (const NewtonError& e) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "roc_table: inverse failed at k=%d, q=%.6g, v=%.6g: %s",
                      k, y.q[0], y.v[0], e.what());
        throw Error(buf);
      }
    });
    row.sup_L_dev = sup_phase(q_range, p_range, scheme, [&](const PhasePoint& x) {
      const TangentPoint y = TangentPoint::raw(x.q, x.p);
      return lagrangian(member, y) - lagrangian(limit, y);
    });
    return row;
  };

  std::vector<std::future<ConvergenceRow>> jobs;
  jobs.reserve(ks.size());
  for (int k : ks)
    jobs.push_back(std::async(std::launch::async, row_for, k));
  for (auto& j : jobs) table.rows.push_back(j.get());
  return table;
}

}  // namespace riglab::legendre

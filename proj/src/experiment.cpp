#include "riglab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>

namespace riglab::experiment {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::HypothesisNotMet:
      return "hypothesis-not-met";
  }
  return "fail";
}

const char* mode_name(Mode m) {
  return m == Mode::TonelliTheorem ? "tonelli" : "c1";
}

namespace {

bool trend_met(double first, double last, const Tolerances& tol) {
  return last < tol.hyp_absolute && last <= tol.hyp_ratio * first + 1e-12;
}

std::string tonelli_detail(const variational::MinimizerConvergenceReport& r) {
  if (r.rows.empty()) return "no rows";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "supQ %.3e -> %.3e, L2P %.3e -> %.3e, gap %.3e -> %.3e, bound %.3g "
                "(q %d, p %d, bounded %d, chain %d, gaps %d)",
                r.rows.front().sup_Q_dev, r.rows.back().sup_Q_dev, r.rows.front().L2_P_dev,
                r.rows.back().L2_P_dev, r.rows.front().action_gap, r.rows.back().action_gap,
                r.uniform_bound_constant, int(r.q_trend_ok), int(r.p_trend_ok),
                int(r.bounded_ok), int(r.chain_all_ok), int(r.gaps_ok));
  return buf;
}

std::string c1_detail(const dynamics::C1LemmaReport& r) {
  if (r.rows.empty()) return "no rows";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "eps %.3e -> %.3e, worst margin %.3e, T %.3g, K %.3g (hyp %d, passed %d)",
                r.rows.front().eps_k, r.rows.back().eps_k, r.rows.back().max_margin, r.T, r.K,
                int(r.hypothesis_met), int(r.all_passed));
  return buf;
}

}  // namespace

ExperimentReport run_rigidity_experiment(const RigidityExperiment& exp) {
  if (exp.ks.size() < 2) throw Error("experiment: need at least two ks");
  if (exp.base_points.empty()) throw Error("experiment: need at least one base point");
  if (exp.q_range.size() != static_cast<size_t>(exp.F_seq.limit.manifold().dim) ||
      exp.q_range.size() != exp.p_range.size())
    throw Error("experiment: box does not match the manifold dimension");
  std::vector<int> ks = exp.ks;
  std::sort(ks.begin(), ks.end());

  ExperimentReport rep;
  rep.mode = exp.mode;
  rep.tol = exp.tol;
  rep.seed = exp.scheme.seed;

  const expr::HamiltonianExpr symbolic = bracket::bracket_expr(exp.F_seq.limit, exp.G_seq.limit);
  const expr::HamiltonianExpr& h_hat =
      exp.declared_bracket_limit ? *exp.declared_bracket_limit : symbolic;
  if (h_hat.has_parameter())
    throw Error("experiment: the declared bracket limit must be parameter-free");
  rep.bracket_limit_source = exp.declared_bracket_limit ? "declared" : "symbolic";
  rep.bracket_limit_text = h_hat.to_string();
  rep.symbolic_bracket_text = symbolic.to_string();

  if (exp.mode == Mode::TonelliTheorem) {
    const auto certify = [&](const expr::HamiltonianExpr& H, int k) {
      const expr::TonelliCertificate cert =
          H.tonelli_check(exp.q_range, exp.p_range, 400, std::nullopt, exp.scheme.seed);
      if (!cert.tonelli_on_box()) {
        char buf[128];
        if (k >= 0)
          std::snprintf(buf, sizeof(buf),
                        "experiment: member k=%d fails the Tonelli certificate "
                        "(min fiber-Hessian eigenvalue %.3e)",
                        k, cert.hessian_min_eig);
        else
          std::snprintf(buf, sizeof(buf),
                        "experiment: the limit fails the Tonelli certificate "
                        "(min fiber-Hessian eigenvalue %.3e)",
                        cert.hessian_min_eig);
        throw Error(buf);
      }
    };
    certify(exp.F_seq.limit, -1);
    for (int k : ks) certify(exp.F_seq.at(k), k);
  }

  auto hyp_row = [&](int k) {
    HypothesisRow row;
    row.k = k;
    try {
      const expr::HamiltonianExpr fk = exp.F_seq.at(k);
      const expr::HamiltonianExpr gk = exp.G_seq.at(k);
      row.sup_F_dev = sup_phase(exp.q_range, exp.p_range, exp.scheme, [&](const PhasePoint& x) {
        return fk.eval(x) - exp.F_seq.limit.eval(x);
      });
      row.sup_G_dev = sup_phase(exp.q_range, exp.p_range, exp.scheme, [&](const PhasePoint& x) {
        return gk.eval(x) - exp.G_seq.limit.eval(x);
      });
      const expr::HamiltonianExpr bk = bracket::bracket_expr(fk, gk);
      row.sup_bracket_dev =
          sup_phase(exp.q_range, exp.p_range, exp.scheme,
                    [&](const PhasePoint& x) { return bk.eval(x) - h_hat.eval(x); });
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  };
  {
    std::vector<std::future<HypothesisRow>> jobs;
    jobs.reserve(ks.size());
    for (int k : ks) jobs.push_back(std::async(std::launch::async, hyp_row, k));
    for (auto& j : jobs) rep.hyp_rows.push_back(j.get());
  }
  bool hyp_errors = false;
  for (const HypothesisRow& r : rep.hyp_rows)
    if (!r.error.empty()) hyp_errors = true;
  if (!hyp_errors) {
    const HypothesisRow& a = rep.hyp_rows.front();
    const HypothesisRow& b = rep.hyp_rows.back();
    rep.f_hyp_met = trend_met(a.sup_F_dev, b.sup_F_dev, exp.tol);
    rep.g_hyp_met = trend_met(a.sup_G_dev, b.sup_G_dev, exp.tol);
    rep.bracket_hyp_met = trend_met(a.sup_bracket_dev, b.sup_bracket_dev, exp.tol);
  }
  rep.hypotheses_met = rep.f_hyp_met && rep.g_hyp_met && rep.bracket_hyp_met;

  for (size_t b = 0; b < exp.base_points.size(); ++b) {
    OrbitAuditRow row;
    row.base_index = static_cast<int>(b);
    try {
      if (exp.mode == Mode::TonelliTheorem) {
        variational::MinimizerConvergenceReport r = variational::minimizer_convergence_experiment(
            exp.F_seq, exp.base_points[b], ks, exp.tau, exp.minimizer_nodes, exp.scheme);
        row.ok = r.all_ok();
        row.detail = tonelli_detail(r);
        rep.tonelli_reports.push_back(std::move(r));
      } else {
        dynamics::C1LemmaReport r = dynamics::verify_c1_convergence_lemma(
            exp.F_seq, exp.base_points[b], ks, exp.c1_radius, exp.dt, exp.scheme);
        row.ok = r.all_passed;
        row.detail = c1_detail(r);
        if (!r.hypothesis_met) rep.hypotheses_met = false;
        rep.c1_reports.push_back(std::move(r));
      }
    } catch (const Error& e) {
      row.error = e.what();
      row.ok = false;
    }
    rep.orbit_rows.push_back(std::move(row));
  }
  rep.orbit_ok = true;
  bool orbit_errors = false;
  for (const OrbitAuditRow& r : rep.orbit_rows) {
    if (!r.ok) rep.orbit_ok = false;
    if (!r.error.empty()) orbit_errors = true;
  }

  rep.conclusion_sup =
      sup_phase(exp.q_range, exp.p_range, exp.scheme,
                [&](const PhasePoint& x) { return symbolic.eval(x) - h_hat.eval(x); });
  rep.conclusion_ok = rep.conclusion_sup <= exp.tol.conclusion;

  auto replay_row = [&](int k, int b) {
    ReplayRow row;
    row.k = k;
    row.base_index = b;
    try {
      const expr::HamiltonianExpr fk = exp.F_seq.at(k);
      const expr::HamiltonianExpr gk = exp.G_seq.at(k);
      // the bracket along the flow can oscillate at frequency ~k, so the
      // trapezoid grid keeps k*dt small or the quadrature noise would drown
      // the identity being replayed
      const double dt_k = std::min(exp.dt, 1.0 / (40.0 * std::max(1, k)));
      dynamics::FlowSpec spec{fk, std::nullopt, 0.0,
                              exp.T, dt_k,      dynamics::Integrator::RK4,
                              1,     10.0};
      const DiscretizedArc arc =
          dynamics::integrate(spec, exp.base_points[static_cast<size_t>(b)]).arc;
      std::vector<double> vals(static_cast<size_t>(arc.nodes()));
      std::vector<double> devs(static_cast<size_t>(arc.nodes()));
      for (int i = 0; i < arc.nodes(); ++i) {
        const PhasePoint z = arc.phase_at(i);
        vals[static_cast<size_t>(i)] = bracket::bracket(gk, fk, z);
        devs[static_cast<size_t>(i)] = vals[static_cast<size_t>(i)] - h_hat.eval(z);
      }
      row.endpoint_diff = gk.eval(arc.phase_at(arc.nodes() - 1)) - gk.eval(arc.phase_at(0));
      row.telescoped_sum = trapezoid(vals, arc.dt());
      row.first_term = std::abs(row.endpoint_diff - row.telescoped_sum);
      row.second_term = std::abs(trapezoid(devs, arc.dt()));
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  };
  {
    std::vector<std::future<ReplayRow>> jobs;
    jobs.reserve(ks.size() * exp.base_points.size());
    for (int k : ks)
      for (size_t b = 0; b < exp.base_points.size(); ++b)
        jobs.push_back(std::async(std::launch::async, replay_row, k, static_cast<int>(b)));
    for (auto& j : jobs) rep.replay_rows.push_back(j.get());
  }
  rep.replay_ok = true;
  bool replay_errors = false;
  for (const ReplayRow& r : rep.replay_rows) {
    if (!r.error.empty()) {
      replay_errors = true;
      rep.replay_ok = false;
    } else if (r.first_term > exp.tol.replay_identity) {
      rep.replay_ok = false;
    }
  }

  const bool any_error = hyp_errors || orbit_errors || replay_errors;
  if (any_error || !rep.replay_ok)
    rep.verdict = Verdict::Fail;
  else if (!rep.hypotheses_met)
    rep.verdict = Verdict::HypothesisNotMet;
  else if (!rep.conclusion_ok || !rep.orbit_ok)
    rep.verdict = Verdict::Fail;
  else
    rep.verdict = Verdict::Pass;
  return rep;
}

}  // namespace riglab::experiment

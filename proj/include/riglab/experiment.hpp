#pragma once

// End-to-end rigidity experiments over configured Hamiltonian sequences:
// hypothesis audit (sup-deviation trends across k), orbit-approximation
// audit, conclusion identity on the limits, and the telescoping replay of
// the bracket-flow identity, reduced to a single verdict.

#include <optional>
#include <string>
#include <vector>

#include "riglab/bracket.hpp"
#include "riglab/dynamics.hpp"
#include "riglab/expr.hpp"
#include "riglab/sampling.hpp"
#include "riglab/variational.hpp"

namespace riglab::experiment {

enum class Verdict { Pass, Fail, HypothesisNotMet };
const char* verdict_name(Verdict v);

enum class Mode { TonelliTheorem, C1Theorem };
const char* mode_name(Mode m);

struct Tolerances {
  double conclusion = 1e-8;     // sup-box identity on the limit expressions
  double hyp_absolute = 1e-2;   // largest-k deviation must fall below this
  double hyp_ratio = 0.1;       // and below this fraction of the smallest-k one
  double replay_identity = 1e-5;
};

struct RigidityExperiment {
  expr::HamiltonianSequence F_seq;
  expr::HamiltonianSequence G_seq;
  std::optional<expr::HamiltonianExpr> declared_bracket_limit;  // defaults to {F,G}
  Box q_range;
  Box p_range;
  std::vector<int> ks;
  std::vector<PhasePoint> base_points;
  double tau = 0.2;  // minimizer window
  double T = 1.0;    // replay flow span
  Mode mode = Mode::TonelliTheorem;
  Tolerances tol;
  SampleScheme scheme;
  int minimizer_nodes = 201;
  double dt = 1e-3;
  double c1_radius = 0.5;
};

struct HypothesisRow {
  int k = 0;
  double sup_F_dev = 0.0;
  double sup_G_dev = 0.0;
  double sup_bracket_dev = 0.0;  // of {F_k,G_k} against the bracket limit
  std::string error;
};

struct OrbitAuditRow {
  int base_index = 0;
  bool ok = false;
  std::string detail;
  std::string error;
};

struct ReplayRow {
  int k = 0;
  int base_index = 0;
  double endpoint_diff = 0.0;    // G_k at the flow endpoints
  double telescoped_sum = 0.0;   // trapezoid of {G_k,F_k} along the arc
  double first_term = 0.0;       // |endpoint_diff - telescoped_sum|
  double second_term = 0.0;      // |integral of ({G_k,F_k} - bracket limit)|
  std::string error;
};

struct ExperimentReport {
  Mode mode = Mode::TonelliTheorem;
  Tolerances tol;
  uint64_t seed = 0;
  std::string bracket_limit_source;  // "declared" or "symbolic"
  std::string bracket_limit_text;
  std::string symbolic_bracket_text;  // {F,G} of the limits

  std::vector<HypothesisRow> hyp_rows;  // ks ascending
  bool f_hyp_met = false;
  bool g_hyp_met = false;
  bool bracket_hyp_met = false;
  bool hypotheses_met = false;

  std::vector<OrbitAuditRow> orbit_rows;  // one per base point
  bool orbit_ok = false;

  double conclusion_sup = 0.0;  // sup-box |{F,G} - bracket limit|
  bool conclusion_ok = false;

  std::vector<ReplayRow> replay_rows;  // k-major, base-minor
  bool replay_ok = false;

  Verdict verdict = Verdict::Fail;

  // Per base point, kept for arc emission and detailed reporting.
  std::vector<variational::MinimizerConvergenceReport> tonelli_reports;
  std::vector<dynamics::C1LemmaReport> c1_reports;
};

ExperimentReport run_rigidity_experiment(const RigidityExperiment& exp);

}  // namespace riglab::experiment

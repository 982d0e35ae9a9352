#include "riglab/report_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace riglab::report_io {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using nlohmann::json;

json hyp_rows_json(const experiment::ExperimentReport& rep) {
  json rows = json::array();
  for (const experiment::HypothesisRow& r : rep.hyp_rows) {
    json row{{"k", r.k},
             {"sup_F_dev", r.sup_F_dev},
             {"sup_G_dev", r.sup_G_dev},
             {"sup_bracket_dev", r.sup_bracket_dev}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return rows;
}

json orbit_rows_json(const experiment::ExperimentReport& rep) {
  json rows = json::array();
  for (const experiment::OrbitAuditRow& r : rep.orbit_rows) {
    json row{{"base_index", r.base_index}, {"ok", r.ok}, {"detail", r.detail}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return rows;
}

json replay_rows_json(const experiment::ExperimentReport& rep) {
  json rows = json::array();
  for (const experiment::ReplayRow& r : rep.replay_rows) {
    json row{{"k", r.k},
             {"base_index", r.base_index},
             {"endpoint_diff", r.endpoint_diff},
             {"telescoped_sum", r.telescoped_sum},
             {"first_term", r.first_term},
             {"second_term", r.second_term}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return rows;
}

json tonelli_json(const variational::MinimizerConvergenceReport& r) {
  json rows = json::array();
  for (const variational::MinimizerConvergenceRow& row : r.rows)
    rows.push_back(json{{"k", row.k},
                        {"sup_Q_dev", row.sup_Q_dev},
                        {"L2_P_dev", row.L2_P_dev},
                        {"C0_bound", row.C0_bound},
                        {"action_gap", row.action_gap},
                        {"action_limit_on_gk", row.A_L_gk},
                        {"action_k_on_gk", row.A_Lk_gk},
                        {"action_k_on_g", row.A_Lk_g},
                        {"eps_hat_k", row.eps_hat_k},
                        {"chain_ok", row.chain_ok},
                        {"confined", row.confined},
                        {"winding_shift", {row.winding_shift[0], row.winding_shift[1]}}});
  return json{{"rows", std::move(rows)},
              {"limit_action", r.limit_action},
              {"uniform_bound_constant", r.uniform_bound_constant},
              {"slack", r.slack},
              {"q_trend_ok", r.q_trend_ok},
              {"p_trend_ok", r.p_trend_ok},
              {"bounded_ok", r.bounded_ok},
              {"chain_all_ok", r.chain_all_ok},
              {"gaps_ok", r.gaps_ok}};
}

json c1_json(const dynamics::C1LemmaReport& r) {
  json rows = json::array();
  for (const dynamics::C1LemmaRow& row : r.rows)
    rows.push_back(json{{"k", row.k},
                        {"eps_k", row.eps_k},
                        {"sup_dist", row.sup_dist},
                        {"max_margin", row.max_margin},
                        {"passed", row.passed}});
  return json{{"rows", std::move(rows)}, {"r", r.r},
              {"T", r.T},                {"K", r.K},
              {"slack", r.slack},        {"hypothesis_met", r.hypothesis_met},
              {"all_passed", r.all_passed}};
}

}  // namespace

std::string arc_csv(const DiscretizedArc& arc) {
  const int dim = arc.manifold.dim;
  const char fiber_letter = arc.kind == ArcKind::Phase ? 'p' : 'v';
  std::string out = "t";
  for (int a = 0; a < dim; ++a) out += ",q" + std::to_string(a + 1);
  for (int a = 0; a < dim; ++a) out += "," + std::string(1, fiber_letter) + std::to_string(a + 1);
  out += "\n";
  for (int i = 0; i < arc.nodes(); ++i) {
    out += num(arc.time_at(i));
    for (int a = 0; a < dim; ++a) out += "," + num(arc.q_lift[static_cast<size_t>(i)][a]);
    for (int a = 0; a < dim; ++a) out += "," + num(arc.fiber[static_cast<size_t>(i)][a]);
    out += "\n";
  }
  return out;
}

std::string hypothesis_csv(const experiment::ExperimentReport& rep) {
  std::string out = "k,sup_F_dev,sup_G_dev,sup_bracket_dev,error\n";
  for (const experiment::HypothesisRow& r : rep.hyp_rows) {
    out += std::to_string(r.k) + "," + num(r.sup_F_dev) + "," + num(r.sup_G_dev) + "," +
           num(r.sup_bracket_dev) + ",";
    for (char c : r.error) out += (c == ',' || c == '\n') ? ';' : c;
    out += "\n";
  }
  return out;
}

std::string report_json_text(const experiment::ExperimentReport& rep) {
  json doc{
      {"mode", experiment::mode_name(rep.mode)},
      {"verdict", experiment::verdict_name(rep.verdict)},
      {"seed", rep.seed},
      {"tolerances",
       {{"conclusion", rep.tol.conclusion},
        {"hyp_absolute", rep.tol.hyp_absolute},
        {"hyp_ratio", rep.tol.hyp_ratio},
        {"replay_identity", rep.tol.replay_identity}}},
      {"bracket_limit",
       {{"source", rep.bracket_limit_source},
        {"text", rep.bracket_limit_text},
        {"symbolic", rep.symbolic_bracket_text}}},
      {"hypothesis",
       {{"met", rep.hypotheses_met},
        {"f_met", rep.f_hyp_met},
        {"g_met", rep.g_hyp_met},
        {"bracket_met", rep.bracket_hyp_met},
        {"rows", hyp_rows_json(rep)}}},
      {"orbit_audit", {{"ok", rep.orbit_ok}, {"rows", orbit_rows_json(rep)}}},
      {"conclusion", {{"sup_dev", rep.conclusion_sup}, {"ok", rep.conclusion_ok}}},
      {"replay", {{"ok", rep.replay_ok}, {"rows", replay_rows_json(rep)}}},
  };
  if (!rep.tonelli_reports.empty()) {
    json arr = json::array();
    for (const auto& r : rep.tonelli_reports) arr.push_back(tonelli_json(r));
    doc["orbit_audit"]["tonelli"] = std::move(arr);
  }
  if (!rep.c1_reports.empty()) {
    json arr = json::array();
    for (const auto& r : rep.c1_reports) arr.push_back(c1_json(r));
    doc["orbit_audit"]["c1"] = std::move(arr);
  }
  return doc.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

void write_experiment_outputs(const experiment::ExperimentReport& rep,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "arcs");
  write_text_file((fs::path(out_dir) / "report.csv").string(), hypothesis_csv(rep));
  write_text_file((fs::path(out_dir) / "report.json").string(), report_json_text(rep));
  for (size_t b = 0; b < rep.tonelli_reports.size(); ++b) {
    const variational::MinimizerConvergenceReport& r = rep.tonelli_reports[b];
    const std::string base = (fs::path(out_dir) / "arcs").string() + "/base" + std::to_string(b);
    write_text_file(base + "_limit.csv", arc_csv(r.limit_phase_arc));
    for (const variational::MinimizerConvergenceRow& row : r.rows)
      write_text_file(base + "_k" + std::to_string(row.k) + ".csv", arc_csv(row.momentum_arc));
  }
}

}  // namespace riglab::report_io

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "riglab/config.hpp"
#include "riglab/report_io.hpp"

using namespace riglab;

namespace {

const char* kFlagshipText = R"toml(
[manifold]
kind = "torus"
dim = 1

[sequences.F]
family = "0.5*p1^2 + (1/k)*sin(k*q1)"
limit = "0.5*p1^2"

[sequences.G]
family = "sin(q1)"

[experiment]
mode = "tonelli"
ks = [4, 256]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
bracket_limit = "-p1*cos(q1)"
minimizer_nodes = 101
random_samples = 200
)toml";

experiment::RigidityExperiment flagship() {
  return config::experiment_from(config::Toml::parse_text(kFlagshipText));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("toml subset: scalars, arrays, comments and multi-line arrays") {
  const config::Toml t = config::Toml::parse_text(R"(
# top comment
title = "an # inside a string"  # trailing comment
count = 12
ratio = 0.75
flag = true

[section.sub]
xs = [1, 2,
      3, 4,]   # multi-line with trailing comma
nested = [[1.0, 2.0], [3.0, 4.0]]
)");
  CHECK(t.get_string("title") == "an # inside a string");
  CHECK(t.get_integer("count") == 12);
  CHECK(t.get_number("ratio") == 0.75);
  CHECK(t.get_bool("flag"));
  CHECK(t.get_array("section.sub.xs").size() == 4);
  CHECK(t.get_array("section.sub.xs")[2].num == 3.0);
  CHECK(t.get_array("section.sub.nested")[1].items[0].num == 3.0);
  CHECK(t.has("section.sub.xs"));
  CHECK(!t.has("section.sub.missing"));
  CHECK(t.get_integer_or("absent", 7) == 7);
}

TEST_CASE("toml subset rejects malformed input") {
  CHECK_THROWS_AS(config::Toml::parse_text("a = 1\na = 2\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Toml::parse_text("b = 1.2.3\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Toml::parse_text("c = [1, 2\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Toml::parse_text("= 3\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Toml::parse_text("d = \"unterminated\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Toml::parse_text("[open\nx = 1\n"), config::ConfigError);
  try {
    config::Toml::parse_text("x = 1\ny = oops\n", "demo.toml");
    CHECK(false);
  } catch (const config::ConfigError& e) {
    CHECK(std::string(e.what()).find("demo.toml:2") != std::string::npos);
  }
}

TEST_CASE("config builders assemble a full experiment") {
  const experiment::RigidityExperiment exp = flagship();
  CHECK(exp.F_seq.family.has_parameter());
  CHECK(!exp.G_seq.family.has_parameter());
  CHECK(exp.G_seq.constant());
  CHECK(exp.ks == std::vector<int>{4, 256});
  CHECK(exp.q_range.size() == 1);
  CHECK(exp.p_range[0][1] == 3.0);
  REQUIRE(exp.base_points.size() == 1);
  CHECK(exp.base_points[0].q[0] == 0.5);
  CHECK(exp.base_points[0].p[0] == 1.0);
  CHECK(exp.mode == experiment::Mode::TonelliTheorem);
  CHECK(exp.minimizer_nodes == 101);
  CHECK(exp.declared_bracket_limit.has_value());
  CHECK(exp.scheme.random_samples == 200);
}

TEST_CASE("config rejects structural mistakes") {
  auto text_with = [&](const std::string& needle, const std::string& repl) {
    std::string t = kFlagshipText;
    const size_t at = t.find(needle);
    REQUIRE(at != std::string::npos);
    t.replace(at, needle.size(), repl);
    return t;
  };
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("ks = [4, 256]", "ks = [4]"))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("ks = [4, 256]", "ks = [4, -16]"))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("base_points = [[0.5, 1.0]]", "base_points = []"))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("base_points = [[0.5, 1.0]]", "base_points = [[0.5]]"))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("mode = \"tonelli\"", "mode = \"quantum\""))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("tau = 0.2", "tau = -0.2"))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(text_with(
                      "family = \"0.5*p1^2 + (1/k)*sin(k*q1)\"\nlimit = \"0.5*p1^2\"",
                      "family = \"0.5*p1^2 + (1/k)*sin(k*q1)\""))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("kind = \"torus\"", "kind = \"sphere\""))),
                  config::ConfigError);
  CHECK_THROWS_AS(config::experiment_from(config::Toml::parse_text(
                      text_with("family = \"sin(q1)\"", "family = \"sin(q3)\""))),
                  config::ConfigError);
}

TEST_CASE("flagship experiment passes end to end") {
  const experiment::ExperimentReport rep = experiment::run_rigidity_experiment(flagship());
  CHECK(rep.verdict == experiment::Verdict::Pass);
  CHECK(rep.hypotheses_met);
  CHECK(rep.f_hyp_met);
  CHECK(rep.g_hyp_met);
  CHECK(rep.bracket_hyp_met);
  CHECK(rep.conclusion_ok);
  CHECK(rep.conclusion_sup <= 1e-8);
  CHECK(rep.orbit_ok);
  CHECK(rep.replay_ok);
  CHECK(rep.bracket_limit_source == "declared");
  REQUIRE(rep.hyp_rows.size() == 2);
  CHECK(rep.hyp_rows[0].k == 4);
  CHECK(rep.hyp_rows[0].sup_F_dev == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(rep.hyp_rows[1].sup_F_dev == doctest::Approx(1.0 / 256.0).epsilon(1e-3));
  REQUIRE(rep.tonelli_reports.size() == 1);
  CHECK(rep.tonelli_reports[0].rows.size() == 2);
  REQUIRE(rep.replay_rows.size() == 2);
  for (const experiment::ReplayRow& row : rep.replay_rows) {
    CHECK(row.first_term <= 1e-5);
    CHECK(row.error.empty());
  }
  CHECK(std::string(experiment::verdict_name(rep.verdict)) == "pass");
}

TEST_CASE("a non convergent bracket sequence yields hypothesis-not-met") {
  experiment::RigidityExperiment exp = flagship();
  const config::Toml t = config::Toml::parse_text(R"toml(
[manifold]
kind = "torus"
dim = 1
[sequences.F]
family = "0.5*p1^2 + (1/k)*sin(k*q1)"
limit = "0.5*p1^2"
[sequences.G]
family = "p1"
[experiment]
mode = "tonelli"
ks = [4, 256]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
minimizer_nodes = 101
random_samples = 200
)toml");
  const experiment::ExperimentReport rep =
      experiment::run_rigidity_experiment(config::experiment_from(t));
  CHECK(rep.verdict == experiment::Verdict::HypothesisNotMet);
  CHECK(!rep.bracket_hyp_met);
  CHECK(rep.f_hyp_met);
  CHECK(rep.g_hyp_met);
  CHECK(rep.bracket_limit_source == "symbolic");
  CHECK(rep.hyp_rows.back().sup_bracket_dev > 0.5);
  CHECK(std::string(experiment::verdict_name(rep.verdict)) == "hypothesis-not-met");
}

TEST_CASE("a badly wrong declared limit surfaces as an unmet bracket hypothesis") {
  const config::Toml t = config::Toml::parse_text(R"toml(
[manifold]
kind = "torus"
dim = 1
[sequences.F]
family = "0.5*p1^2 + (1/k)*sin(k*q1)"
limit = "0.5*p1^2"
[sequences.G]
family = "sin(q1)"
[experiment]
mode = "tonelli"
ks = [4, 256]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
bracket_limit = "-0.9*p1*cos(q1)"
minimizer_nodes = 101
random_samples = 200
)toml");
  const experiment::ExperimentReport rep =
      experiment::run_rigidity_experiment(config::experiment_from(t));
  CHECK(rep.verdict == experiment::Verdict::HypothesisNotMet);
  CHECK(!rep.bracket_hyp_met);
  CHECK(rep.conclusion_sup > 0.01);
  CHECK(!rep.conclusion_ok);
}

TEST_CASE("a subtly wrong declared limit passes the hypotheses but fails the conclusion") {
  const config::Toml t = config::Toml::parse_text(R"toml(
[manifold]
kind = "torus"
dim = 1
[sequences.F]
family = "0.5*p1^2 + (1/k)*sin(q1)"
limit = "0.5*p1^2"
[sequences.G]
family = "sin(q1) + 0.1*p1^2"
[experiment]
mode = "tonelli"
ks = [4, 256]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
bracket_limit = "-p1*cos(q1) - 0.0001*sin(q1)"
minimizer_nodes = 101
random_samples = 200
)toml");
  const experiment::ExperimentReport rep =
      experiment::run_rigidity_experiment(config::experiment_from(t));
  CHECK(rep.hypotheses_met);  // the deviation floor of 1e-4 sits below the trend tolerance
  CHECK(!rep.conclusion_ok);
  CHECK(rep.conclusion_sup == doctest::Approx(1e-4).epsilon(0.01));
  CHECK(rep.verdict == experiment::Verdict::Fail);
}

TEST_CASE("c1 mode audits orbits by flows and passes for a derivative convergent family") {
  const config::Toml t = config::Toml::parse_text(R"toml(
[manifold]
kind = "torus"
dim = 1
[sequences.F]
family = "0.5*p1^2 + (1/k)*sin(q1)"
limit = "0.5*p1^2"
[sequences.G]
family = "sin(q1)"
[experiment]
mode = "c1"
ks = [4, 256]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
c1_radius = 0.5
bracket_limit = "-p1*cos(q1)"
random_samples = 200
)toml");
  const experiment::ExperimentReport rep =
      experiment::run_rigidity_experiment(config::experiment_from(t));
  CHECK(rep.mode == experiment::Mode::C1Theorem);
  CHECK(rep.verdict == experiment::Verdict::Pass);
  CHECK(rep.hypotheses_met);
  CHECK(rep.orbit_ok);
  CHECK(rep.conclusion_ok);
  REQUIRE(rep.c1_reports.size() == 1);
  CHECK(rep.c1_reports[0].all_passed);
  CHECK(rep.c1_reports[0].K >= 2.0);
  CHECK(rep.tonelli_reports.empty());
  REQUIRE(rep.c1_reports[0].rows.size() == 2);
  CHECK(rep.c1_reports[0].rows[1].eps_k < rep.c1_reports[0].rows[0].eps_k);
}

TEST_CASE("tonelli mode refuses a non convex member") {
  const config::Toml t = config::Toml::parse_text(R"toml(
[manifold]
kind = "torus"
dim = 1
[sequences.F]
family = "-0.5*p1^2 + (1/k)*sin(q1)"
limit = "-0.5*p1^2"
[sequences.G]
family = "sin(q1)"
[experiment]
mode = "tonelli"
ks = [4, 16]
box = [[0.0, 6.283185307179586], [-3.0, 3.0]]
base_points = [[0.5, 1.0]]
tau = 0.2
T = 1.0
minimizer_nodes = 101
random_samples = 200
)toml");
  CHECK_THROWS_WITH_AS(
      (void)experiment::run_rigidity_experiment(config::experiment_from(t)),
      doctest::Contains("Tonelli certificate"), Error);
}

TEST_CASE("experiment outputs are deterministic and byte identical across runs") {
  const std::filesystem::path dir1 = std::filesystem::temp_directory_path() / "riglab_det1";
  const std::filesystem::path dir2 = std::filesystem::temp_directory_path() / "riglab_det2";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  const experiment::ExperimentReport r1 = experiment::run_rigidity_experiment(flagship());
  const experiment::ExperimentReport r2 = experiment::run_rigidity_experiment(flagship());
  report_io::write_experiment_outputs(r1, dir1.string());
  report_io::write_experiment_outputs(r2, dir2.string());
  for (const char* name : {"report.json", "report.csv"}) {
    const std::string a = slurp(dir1 / name);
    const std::string b = slurp(dir2 / name);
    CHECK(!a.empty());
    CHECK(a == b);
  }
  const std::string arcs1 = slurp(dir1 / "arcs" / "base0_limit.csv");
  const std::string arcs2 = slurp(dir2 / "arcs" / "base0_limit.csv");
  CHECK(!arcs1.empty());
  CHECK(arcs1 == arcs2);
  CHECK(std::filesystem::exists(dir1 / "arcs" / "base0_k256.csv"));
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("csv writers quote problem characters out of the grid") {
  experiment::ExperimentReport rep;
  experiment::HypothesisRow row;
  row.k = 4;
  row.error = "bad, line\nbreak";
  rep.hyp_rows.push_back(row);
  const std::string csv = report_io::hypothesis_csv(rep);
  CHECK(csv.find("bad; line;break") != std::string::npos);
  CHECK(csv.rfind("k,sup_F_dev", 0) == 0);
}

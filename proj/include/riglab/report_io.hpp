#pragma once

// Deterministic CSV and JSON emission for experiment reports and arcs.

#include <string>

#include "riglab/experiment.hpp"
#include "riglab/geometry.hpp"

namespace riglab::report_io {

// "t,q1[,q2],p1[,p2]" for phase arcs, v columns for tangent arcs; lift
// coordinates so torus tracks stay continuous.
std::string arc_csv(const DiscretizedArc& arc);

// The flat per-k hypothesis table (report.csv).
std::string hypothesis_csv(const experiment::ExperimentReport& rep);

std::string report_json_text(const experiment::ExperimentReport& rep);

void write_text_file(const std::string& path, const std::string& text);

// report.csv, report.json and arcs/*.csv under out_dir.
void write_experiment_outputs(const experiment::ExperimentReport& rep,
                              const std::string& out_dir);

}  // namespace riglab::report_io

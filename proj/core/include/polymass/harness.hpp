#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polymass/evaluators.hpp"

namespace polymass {

//! Study description: metric source, evaluator, sequence, quadrature knobs,
//! and output paths. Maps one-to-one onto the study config file format and
//! the CLI flags.
struct StudyConfig {
  std::string metric = "euclidean";
  int n = 3;
  ParamMap params;
  ExprOptions options;
  std::string evaluator = "poly-mass";

  std::string sequence_kind = "box";  // box | prototype | prism | sphere
  double s0 = 16.0;
  int count = 4;
  double factor = 2.0;
  std::vector<double> explicit_scales;
  std::string prototype_source = "cube";  // name or file path
  std::string sigma = "exp(L/2)";
  int potential_index = 0;  // ah-mass component

  QuadConfig quad;

  std::string out_json;
  std::string out_csv;
  std::string out_svg;

  std::vector<double> scales() const;
  SequencePlan sequence_plan() const;

  static StudyConfig parse(const std::string& text,
                           const std::string& origin = "<string>");
  static StudyConfig from_file(const std::string& path);
  std::string serialize() const;
};

struct Extrapolation {
  double value = 0.0;
  double uncertainty = 0.0;
  double exponent = 0.0;     // fitted decay rate s in v + c * scale^{-s}
  double fit_residual = 0.0; // prediction error on the point before the fit
  bool from_fit = false;

  bool operator==(const Extrapolation&) const = default;
};

//! Power-law extrapolation v(L) = v_inf + c L^{-s} through the last three
//! points (s free); `errors` feeds the uncertainty floor.
Extrapolation extrapolate_power_law(std::span<const double> scales,
                                    std::span<const double> values,
                                    std::span<const double> errors);

struct Study {
  std::string evaluator;
  std::string metric_label;
  int n = 0;
  ParamMap params;
  std::vector<double> scales;
  std::vector<MassReport> reports;
  Extrapolation extrapolation;
  std::string sequence_notes;  // admissibility warnings, if any
  std::string abort_reason;    // nonempty when an element failed; the
                               // reports collected up to that point remain
  double wall_time_seconds = 0.0;

  bool aborted() const { return !abort_reason.empty(); }

  std::string to_json_string() const;
  static Study from_json_string(const std::string& text);
};

//! Equality modulo wall time (timings vary run to run).
bool equivalent(const Study& a, const Study& b);

Study run_study(const StudyConfig& cfg);

void emit_csv(const Study& study, const std::string& path);
void emit_json(const Study& study, const std::string& path);
void emit_svg(const Study& study, const std::string& path);
std::string study_csv(const Study& study);
std::string study_svg(const Study& study);

}  // namespace polymass

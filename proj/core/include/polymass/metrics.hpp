#pragma once

#include <map>
#include <string>
#include <vector>

#include "polymass/metric_field.hpp"

namespace polymass {

//! A catalog entry: named metric with component expressions kept as written
//! (bit-exact round trip), parameter defaults, and asymptotic metadata.
struct MetricSpec {
  std::string name;
  std::string chart;  // coordinate system label
  int n = 0;
  std::vector<std::string> comp_sources;  // packed i <= j
  std::vector<std::string> pert_sources;  // analytic h = g - gbar, optional
  ParamMap param_defaults;
  Background background = Background::Euclidean;
  AsymType type = AsymType::AF;
  double decay = 0.0;

  //! Build the evaluatable field with defaults merged under `overrides`.
  MetricField field(const ParamMap& overrides = {}) const;

  //! Text form in the metric file format.
  std::string serialize() const;
};

//! Options that are expressions rather than numbers (e.g. the conformal
//! factor of `conformal-custom`, or the entries of `perturbed-flat`).
using ExprOptions = std::map<std::string, std::string>;

//! Built-in metric catalog. Throws on unknown names and invalid parameters.
//! Names: euclidean, schwarzschild-isotropic, schwarzschild-areal-rect,
//! hyperbolic-hyperboloid, hyperbolic-uhs, ads-schwarzschild-hyperboloid,
//! conformal-custom, perturbed-flat.
MetricSpec builtin_metric(const std::string& name, int n,
                          const ParamMap& params = {},
                          const ExprOptions& options = {});

std::vector<std::string> builtin_metric_names();

//! Load a metric definition file; validates completeness, symmetry (only
//! i <= j entries), and the decay bound (p > (n-2)/2 for AF, q > n/2 for AH).
MetricSpec load_metric_file(const std::string& path);
MetricSpec parse_metric_text(const std::string& text,
                             const std::string& origin = "<string>");
void save_metric_file(const MetricSpec& spec, const std::string& path);

//! Resolve a metric source: a builtin name or a path to a metric file.
MetricSpec resolve_metric(const std::string& name_or_path, int n,
                          const ParamMap& params = {},
                          const ExprOptions& options = {});

//! Coordinate change from the upper-half-space chart {y_1 > 0} to the
//! hyperboloid chart: z_1 = (|y|^2 - 1)/(2 y_1), z_a = y_a / y_1.
std::vector<Expr> uhs_to_hyperboloid_map(int n);

//! Transport a hyperboloid-chart AH metric to upper-half-space coordinates
//! via the pullback along uhs_to_hyperboloid_map. The result carries the
//! upper-half-space hyperbolic background.
MetricField to_upper_half_space(const MetricSpec& spec,
                                const ParamMap& overrides = {});

}  // namespace polymass

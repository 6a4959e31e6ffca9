#pragma once

#include <string>
#include <vector>

#include "polymass/expr.hpp"

namespace polymass {

struct TermBreakdown {
  std::string tag;
  double value = 0.0;
  double quad_error = 0.0;
  bool operator==(const TermBreakdown&) const = default;
};

//! Term-by-term result of one evaluator run at a single scale. The total is
//! always the documented combination of the recorded terms, e.g. for the
//! polyhedral evaluator total = (-face + edge) / ((n-1) omega_{n-1}).
struct MassReport {
  std::string evaluator;
  int n = 0;
  ParamMap params;
  std::string geometry_kind;  // sphere | box | prototype | prism | slices
  std::string geometry_desc;
  double scale = 0.0;  // r or L

  double face_term = 0.0;
  double edge_term = 0.0;
  double flux_term = 0.0;
  std::vector<TermBreakdown> per_face;
  std::vector<TermBreakdown> per_edge;

  double quad_error = 0.0;
  bool converged = true;
  long long evaluations = 0;
  double total = 0.0;

  std::string to_json_string(int indent = 2) const;
  static MassReport from_json_string(const std::string& text);
  bool operator==(const MassReport&) const = default;
};

}  // namespace polymass

#include "polymass/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "polymass/error.hpp"

namespace polymass {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json params_to_json(const ParamMap& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

ParamMap params_from_json(const Json& j) {
  ParamMap p;
  for (auto it = j.begin(); it != j.end(); ++it) p[it.key()] = it.value();
  return p;
}

Json report_to_json(const MassReport& r) {
  Json j;
  j["evaluator"] = r.evaluator;
  j["n"] = r.n;
  j["params"] = params_to_json(r.params);
  j["geometry"] = Json{{"kind", r.geometry_kind},
                       {"descriptor", r.geometry_desc},
                       {"scale", r.scale}};
  Json per_face = Json::array();
  for (const auto& t : r.per_face)
    per_face.push_back(Json{{"tag", t.tag},
                            {"value", t.value},
                            {"quad_error", t.quad_error}});
  Json per_edge = Json::array();
  for (const auto& t : r.per_edge)
    per_edge.push_back(Json{{"tag", t.tag},
                            {"value", t.value},
                            {"quad_error", t.quad_error}});
  j["terms"] = Json{{"face", r.face_term},
                    {"edge", r.edge_term},
                    {"flux", r.flux_term},
                    {"per_face", per_face},
                    {"per_edge", per_edge}};
  j["errors"] = Json{{"quadrature", r.quad_error},
                     {"converged", r.converged},
                     {"evaluations", r.evaluations}};
  j["total"] = r.total;
  return j;
}

MassReport report_from_json(const Json& j) {
  MassReport r;
  r.evaluator = j.at("evaluator");
  r.n = j.at("n");
  r.params = params_from_json(j.at("params"));
  r.geometry_kind = j.at("geometry").at("kind");
  r.geometry_desc = j.at("geometry").at("descriptor");
  r.scale = j.at("geometry").at("scale");
  r.face_term = j.at("terms").at("face");
  r.edge_term = j.at("terms").at("edge");
  r.flux_term = j.at("terms").at("flux");
  for (const auto& t : j.at("terms").at("per_face"))
    r.per_face.push_back({t.at("tag"), t.at("value"), t.at("quad_error")});
  for (const auto& t : j.at("terms").at("per_edge"))
    r.per_edge.push_back({t.at("tag"), t.at("value"), t.at("quad_error")});
  r.quad_error = j.at("errors").at("quadrature");
  r.converged = j.at("errors").at("converged");
  r.evaluations = j.at("errors").at("evaluations");
  r.total = j.at("total");
  return r;
}

}  // namespace

std::string MassReport::to_json_string(int indent) const {
  return report_to_json(*this).dump(indent);
}

MassReport MassReport::from_json_string(const std::string& text) {
  return report_from_json(Json::parse(text));
}

// ---------------------------------------------------------------------------
// Extrapolation
// ---------------------------------------------------------------------------

Extrapolation extrapolate_power_law(std::span<const double> scales,
                                    std::span<const double> values,
                                    std::span<const double> errors) {
  Extrapolation ex;
  double max_err = 0.0;
  for (double e : errors) max_err = std::max(max_err, e);
  const std::size_t m = scales.size();
  if (m == 0) return ex;
  if (m < 3) {
    ex.value = values[m - 1];
    ex.uncertainty = std::max(max_err, m == 2
                                           ? std::fabs(values[1] - values[0])
                                           : 0.0);
    return ex;
  }
  const double L1 = scales[m - 3], L2 = scales[m - 2], L3 = scales[m - 1];
  const double v1 = values[m - 3], v2 = values[m - 2], v3 = values[m - 1];
  const double d1 = v1 - v2, d2 = v2 - v3;

  if (d1 == 0.0 || d2 == 0.0 || d1 * d2 < 0.0 ||
      std::fabs(d2) >= std::fabs(d1)) {
    // Already flat (or not monotone): take the last value; the remaining
    // spread bounds the uncertainty.
    ex.value = v3;
    ex.uncertainty = std::max(max_err, std::fabs(d2));
    return ex;
  }

  auto ratio = [&](double s) {
    return (std::pow(L1, -s) - std::pow(L2, -s)) /
           (std::pow(L2, -s) - std::pow(L3, -s));
  };
  const double target = d1 / d2;
  double lo = 1e-3, hi = 16.0;
  double flo = ratio(lo) - target, fhi = ratio(hi) - target;
  double s;
  if (flo * fhi > 0.0) {
    // No bracket (irregular data): geometric-spacing estimate.
    s = std::log(target) / std::log(L2 / L1);
    if (!(s > 0.0) || !std::isfinite(s)) {
      ex.value = v3;
      ex.uncertainty = std::max(max_err, std::fabs(d2));
      return ex;
    }
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = ratio(mid) - target;
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if (fm * flo > 0.0) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    s = 0.5 * (lo + hi);
  }
  const double c = d2 / (std::pow(L2, -s) - std::pow(L3, -s));
  ex.value = v3 - c * std::pow(L3, -s);
  ex.exponent = s;
  ex.from_fit = true;
  if (m >= 4)
    ex.fit_residual =
        std::fabs(ex.value + c * std::pow(scales[m - 4], -s) - values[m - 4]);
  ex.uncertainty = std::max({max_err, 0.5 * std::fabs(v3 - ex.value),
                             ex.fit_residual});
  return ex;
}

// ---------------------------------------------------------------------------
// Study config
// ---------------------------------------------------------------------------

namespace {

void trim(std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_kv_args(std::istringstream& in) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw Error("expected key=value in sequence spec, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

std::vector<double> StudyConfig::scales() const {
  if (!explicit_scales.empty()) return explicit_scales;
  std::vector<double> out;
  double v = s0;
  for (int i = 0; i < count; ++i, v *= factor) out.push_back(v);
  return out;
}

SequencePlan StudyConfig::sequence_plan() const {
  if (sequence_kind == "box")
    return SequencePlan::boxes(n, s0, count, factor);
  if (sequence_kind == "prototype") {
    Polytope proto;
    if (prototype_source.find('.') != std::string::npos ||
        prototype_source.find('/') != std::string::npos)
      proto = Polytope::from_file(prototype_source);
    else
      proto = Polytope::prototype(prototype_source);
    SequencePlan plan = SequencePlan::prototypes(proto, s0, count, factor);
    if (!explicit_scales.empty()) plan.scales = explicit_scales;
    return plan;
  }
  if (sequence_kind == "prism")
    return SequencePlan::prisms(n, scales(), sigma);
  if (sequence_kind == "sphere") {
    SequencePlan plan = SequencePlan::spheres(n, s0, count, factor);
    if (!explicit_scales.empty()) plan.scales = explicit_scales;
    return plan;
  }
  throw Error("unknown sequence kind '" + sequence_kind + "'");
}

StudyConfig StudyConfig::parse(const std::string& text,
                               const std::string& origin) {
  StudyConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    trim(t);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(lineno) +
                           ": expected 'key = value'",
                       0, lineno, 1);
    std::string key = t.substr(0, eq), value = t.substr(eq + 1);
    trim(key);
    trim(value);
    try {
      if (key == "metric") cfg.metric = value;
      else if (key == "n") cfg.n = std::stoi(value);
      else if (key == "evaluator") cfg.evaluator = value;
      else if (key == "potential") cfg.potential_index = std::stoi(value);
      else if (key.rfind("param ", 0) == 0) {
        std::string name = key.substr(6);
        trim(name);
        cfg.params[name] = std::stod(value);
      } else if (key.rfind("option ", 0) == 0) {
        std::string name = key.substr(7);
        trim(name);
        cfg.options[name] = value;
      } else if (key == "sequence") {
        std::istringstream seq(value);
        std::string kind;
        seq >> kind;
        cfg.sequence_kind = kind;
        auto kv = parse_kv_args(seq);
        if (kv.count("L0")) cfg.s0 = std::stod(kv["L0"]);
        if (kv.count("r0")) cfg.s0 = std::stod(kv["r0"]);
        if (kv.count("count")) cfg.count = std::stoi(kv["count"]);
        if (kv.count("factor")) cfg.factor = std::stod(kv["factor"]);
        if (kv.count("L")) cfg.explicit_scales = parse_list(kv["L"]);
        if (kv.count("r")) cfg.explicit_scales = parse_list(kv["r"]);
        if (kv.count("sigma")) cfg.sigma = kv["sigma"];
        if (kv.count("name")) cfg.prototype_source = kv["name"];
        if (kv.count("file")) cfg.prototype_source = kv["file"];
      } else if (key == "quad.order") cfg.quad.order = std::stoi(value);
      else if (key == "quad.rtol") cfg.quad.rtol = std::stod(value);
      else if (key == "quad.atol") cfg.quad.atol = std::stod(value);
      else if (key == "quad.max_levels") cfg.quad.max_levels = std::stoi(value);
      else if (key == "quad.workers") cfg.quad.workers = std::stoi(value);
      else if (key == "output.json") cfg.out_json = value;
      else if (key == "output.csv") cfg.out_csv = value;
      else if (key == "output.svg") cfg.out_svg = value;
      else
        throw Error("unknown config key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": " +
                           e.what(),
                       0, lineno, 1);
    }
  }
  return cfg;
}

StudyConfig StudyConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open study config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string StudyConfig::serialize() const {
  std::ostringstream os;
  os << "metric = " << metric << "\n";
  os << "n = " << n << "\n";
  for (const auto& [k, v] : params) os << "param " << k << " = " << fmt(v) << "\n";
  for (const auto& [k, v] : options) os << "option " << k << " = " << v << "\n";
  os << "evaluator = " << evaluator << "\n";
  os << "sequence = " << sequence_kind;
  if (!explicit_scales.empty()) {
    os << (sequence_kind == "sphere" || sequence_kind == "prism" ? " L=" : " L=");
    for (std::size_t i = 0; i < explicit_scales.size(); ++i)
      os << (i ? "," : "") << fmt(explicit_scales[i]);
  } else {
    os << (sequence_kind == "sphere" ? " r0=" : " L0=") << fmt(s0)
       << " count=" << count << " factor=" << fmt(factor);
  }
  if (sequence_kind == "prototype") os << " name=" << prototype_source;
  if (sequence_kind == "prism") os << " sigma=" << sigma;
  os << "\n";
  if (evaluator == "ah-mass") os << "potential = " << potential_index << "\n";
  os << "quad.order = " << quad.order << "\n";
  os << "quad.rtol = " << fmt(quad.rtol) << "\n";
  os << "quad.atol = " << fmt(quad.atol) << "\n";
  os << "quad.max_levels = " << quad.max_levels << "\n";
  os << "quad.workers = " << quad.workers << "\n";
  if (!out_json.empty()) os << "output.json = " << out_json << "\n";
  if (!out_csv.empty()) os << "output.csv = " << out_csv << "\n";
  if (!out_svg.empty()) os << "output.svg = " << out_svg << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Study runner
// ---------------------------------------------------------------------------

Study run_study(const StudyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Study study;
  study.evaluator = cfg.evaluator;
  study.metric_label = cfg.metric;
  study.n = cfg.n;
  study.params = cfg.params;
  study.scales = cfg.scales();

  const MetricSpec spec = resolve_metric(cfg.metric, cfg.n, cfg.params,
                                         cfg.options);
  const MetricField g = spec.field(cfg.params);

  // Admissibility report (warnings only; evaluation proceeds regardless).
  if (cfg.sequence_kind == "box" || cfg.sequence_kind == "prototype") {
    const SequenceConditionReport rep =
        check_sequence_conditions(cfg.sequence_plan(), 0.01);
    if (!rep.all_ok()) study.sequence_notes = rep.notes;
  }

  // An element failure aborts the sequence but keeps what was computed so
  // far; the abort reason travels with the study.
  try {
    if (cfg.evaluator == "adm") {
      for (double r : study.scales)
        study.reports.push_back(adm_mass(g, r, cfg.quad));
    } else if (cfg.evaluator == "poly-mass") {
      const SequencePlan plan = cfg.sequence_plan();
      for (std::size_t i = 0; i < plan.size(); ++i) {
        MassReport r = poly_mass(g, plan.element(i), cfg.quad);
        r.scale = plan.scales[i];
        study.reports.push_back(std::move(r));
      }
    } else if (cfg.evaluator == "slice-mass") {
      for (double L : study.scales)
        study.reports.push_back(cfg.n == 3 ? slice_mass_3d(g, L, cfg.quad)
                                           : slice_mass_nd(g, L, cfg.quad));
    } else if (cfg.evaluator == "ah-mass") {
      for (double r : study.scales)
        study.reports.push_back(ah_mass(
            g, StaticPotential::basis(cfg.n, cfg.potential_index), r,
            cfg.quad));
    } else if (cfg.evaluator == "prism") {
      MetricField gy = g.asym_type() == AsymType::AHUpperHalfSpace
                           ? g
                           : to_upper_half_space(spec, cfg.params);
      const SequencePlan plan = cfg.sequence_plan();
      for (std::size_t i = 0; i < plan.size(); ++i) {
        MassReport r = ah_prism_mass(gy, plan.element(i), cfg.quad);
        r.scale = plan.scales[i];
        study.reports.push_back(std::move(r));
      }
    } else {
      throw Error("unknown evaluator '" + cfg.evaluator + "'");
    }
  } catch (const Error& e) {
    if (study.reports.empty()) throw;  // nothing partial to save
    study.abort_reason = e.what();
    study.scales.resize(study.reports.size());
  }

  std::vector<double> totals, errs;
  for (const MassReport& r : study.reports) {
    totals.push_back(r.total);
    errs.push_back(r.quad_error);
  }
  study.extrapolation = extrapolate_power_law(study.scales, totals, errs);
  study.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return study;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string Study::to_json_string() const {
  Json j;
  j["evaluator"] = evaluator;
  j["metric"] = metric_label;
  j["n"] = n;
  j["params"] = params_to_json(params);
  j["scales"] = scales;
  Json reps = Json::array();
  for (const MassReport& r : reports) reps.push_back(report_to_json(r));
  j["reports"] = reps;
  j["extrapolation"] = Json{{"value", extrapolation.value},
                            {"uncertainty", extrapolation.uncertainty},
                            {"exponent", extrapolation.exponent},
                            {"fit_residual", extrapolation.fit_residual},
                            {"from_fit", extrapolation.from_fit}};
  j["sequence_notes"] = sequence_notes;
  j["abort_reason"] = abort_reason;
  // Wall time stays out of the serialized form so identical runs emit
  // byte-identical files regardless of machine load or worker count.
  return j.dump(2);
}

Study Study::from_json_string(const std::string& text) {
  const Json j = Json::parse(text);
  Study s;
  s.evaluator = j.at("evaluator");
  s.metric_label = j.at("metric");
  s.n = j.at("n");
  s.params = params_from_json(j.at("params"));
  s.scales = j.at("scales").get<std::vector<double>>();
  for (const auto& r : j.at("reports"))
    s.reports.push_back(report_from_json(r));
  const auto& e = j.at("extrapolation");
  s.extrapolation.value = e.at("value");
  s.extrapolation.uncertainty = e.at("uncertainty");
  s.extrapolation.exponent = e.at("exponent");
  s.extrapolation.fit_residual = e.at("fit_residual");
  s.extrapolation.from_fit = e.at("from_fit");
  s.sequence_notes = j.at("sequence_notes");
  s.abort_reason = j.value("abort_reason", std::string{});
  return s;
}

bool equivalent(const Study& a, const Study& b) {
  return Json::parse(a.to_json_string()) == Json::parse(b.to_json_string());
}

std::string study_csv(const Study& study) {
  std::ostringstream os;
  os << "index,scale,face_term,edge_term,total,quad_err\n";
  for (std::size_t i = 0; i < study.reports.size(); ++i) {
    const MassReport& r = study.reports[i];
    os << i << "," << fmt(study.scales[i]) << "," << fmt(r.face_term) << ","
       << fmt(r.edge_term) << "," << fmt(r.total) << "," << fmt(r.quad_error)
       << "\n";
  }
  return os.str();
}

namespace {

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> pts;  // (scale, value), value > 0
};

std::string svg_plot(const std::vector<SvgSeries>& series,
                     const std::string& title) {
  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmax > 0) || !(ymax > 0)) {
    xmin = ymin = 0.1;
    xmax = ymax = 1.0;
  }
  ymin = std::max(ymin, ymax * 1e-17);
  const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
  const double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
  const double dx = (lx1 > lx0) ? lx1 - lx0 : 1.0;
  const double dy = (ly1 > ly0) ? ly1 - ly0 : 1.0;
  auto X = [&](double x) {
    return ml + (std::log10(x) - lx0) / dx * (width - ml - mr);
  };
  auto Y = [&](double y) {
    return height - mb - (std::log10(y) - ly0) / dy * (height - mt - mb);
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"monospace\" font-size=\"14\">"
     << title << "</text>\n";
  // Axes.
  os << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
     << width - mr << "\" y2=\"" << height - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  // Decade ticks.
  for (int d = static_cast<int>(std::floor(lx0));
       d <= static_cast<int>(std::ceil(lx1)); ++d) {
    const double x = std::pow(10.0, d);
    if (x < xmin * 0.999 || x > xmax * 1.001) continue;
    os << "<line x1=\"" << num(X(x)) << "\" y1=\"" << height - mb
       << "\" x2=\"" << num(X(x)) << "\" y2=\"" << height - mb + 6
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(X(x)) << "\" y=\"" << height - mb + 20
       << "\" text-anchor=\"middle\" font-family=\"monospace\" "
          "font-size=\"11\">1e"
       << d << "</text>\n";
  }
  for (int d = static_cast<int>(std::floor(ly0));
       d <= static_cast<int>(std::ceil(ly1)); ++d) {
    const double y = std::pow(10.0, d);
    if (y < ymin * 0.999 || y > ymax * 1.001) continue;
    os << "<line x1=\"" << ml - 6 << "\" y1=\"" << num(Y(y)) << "\" x2=\""
       << ml << "\" y2=\"" << num(Y(y)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 10 << "\" y=\"" << num(Y(y) + 4)
       << "\" text-anchor=\"end\" font-family=\"monospace\" "
          "font-size=\"11\">1e"
       << d << "</text>\n";
  }
  int legend_y = static_cast<int>(mt) + 10;
  for (const auto& s : series) {
    if (s.pts.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.pts)
      os << num(X(x)) << "," << num(Y(y)) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : s.pts)
      os << "<circle cx=\"" << num(X(x)) << "\" cy=\"" << num(Y(y))
         << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
    os << "<text x=\"" << width - mr - 8 << "\" y=\"" << legend_y
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\" "
          "fill=\""
       << s.color << "\">" << s.label << "</text>\n";
    legend_y += 16;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string study_svg(const Study& study) {
  SvgSeries conv{"|total - v_inf|", "#1f77b4", {}};
  SvgSeries err{"quad error", "#d62728", {}};
  const double vinf = study.extrapolation.value;
  for (std::size_t i = 0; i < study.reports.size(); ++i) {
    const double dev = std::fabs(study.reports[i].total - vinf);
    if (dev > 0.0) conv.pts.push_back({study.scales[i], dev});
    if (study.reports[i].quad_error > 0.0)
      err.pts.push_back({study.scales[i], study.reports[i].quad_error});
  }
  return svg_plot({conv, err},
                  study.evaluator + " convergence: " + study.metric_label);
}

void emit_csv(const Study& study, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << study_csv(study);
}

void emit_json(const Study& study, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << study.to_json_string() << "\n";
}

void emit_svg(const Study& study, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << study_svg(study);
}

}  // namespace polymass

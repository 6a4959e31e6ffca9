// Command-line front end: every evaluator plus the study runner.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "polymass/error.hpp"
#include "polymass/harness.hpp"

using namespace polymass;

namespace {

struct CommonOpts {
  std::string metric = "euclidean";
  int n = 3;
  std::vector<std::string> params;   // name=value
  std::vector<std::string> options;  // name=expression
  QuadConfig quad;
  bool json = false;
  bool dump_config = false;
  std::string out;
};

int default_workers() {
  if (const char* env = std::getenv("POLYMASS_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--metric", o.metric, "builtin metric name or metric file");
  cmd->add_option("--n", o.n, "ambient dimension");
  cmd->add_option("--param", o.params, "parameter override name=value")
      ->take_all();
  cmd->add_option("--expr-option", o.options,
                  "expression option name=expr (e.g. phi=c/r)")
      ->take_all();
  cmd->add_option("--quad-order", o.quad.order, "Gauss order per axis");
  cmd->add_option("--quad-rtol", o.quad.rtol, "relative tolerance");
  cmd->add_option("--quad-atol", o.quad.atol, "absolute tolerance floor");
  cmd->add_option("--quad-max-levels", o.quad.max_levels,
                  "panel doubling levels");
  cmd->add_option("--workers", o.quad.workers,
                  "quadrature worker threads (env POLYMASS_WORKERS)");
  cmd->add_flag("--json", o.json, "print the report as JSON");
  cmd->add_flag("--dump-config", o.dump_config,
                "print the equivalent study config and exit");
  cmd->add_option("--out", o.out, "directory for emitted files");
}

ParamMap parse_params(const std::vector<std::string>& kvs) {
  ParamMap p;
  for (const std::string& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error("expected name=value, got '" + kv + "'");
    p[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  return p;
}

ExprOptions parse_options(const std::vector<std::string>& kvs) {
  ExprOptions o;
  for (const std::string& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error("expected name=expression, got '" + kv + "'");
    o[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return o;
}

MetricField load_field(const CommonOpts& o) {
  const ParamMap params = parse_params(o.params);
  return resolve_metric(o.metric, o.n, params, parse_options(o.options))
      .field(params);
}

void write_report_files(const MassReport& rep, const std::string& out) {
  if (out.empty()) return;
  std::filesystem::create_directories(out);
  std::ofstream f(out + "/report.json", std::ios::binary);
  if (!f) throw Error("cannot write '" + out + "/report.json'");
  f << rep.to_json_string() << "\n";
}

void print_report(const MassReport& rep, bool json) {
  if (json) {
    std::cout << rep.to_json_string() << "\n";
    return;
  }
  std::printf("evaluator   %s\n", rep.evaluator.c_str());
  std::printf("geometry    %s\n", rep.geometry_desc.c_str());
  std::printf("n           %d\n", rep.n);
  for (const auto& [k, v] : rep.params)
    std::printf("param       %s = %.17g\n", k.c_str(), v);
  if (rep.face_term != 0.0 || rep.edge_term != 0.0) {
    std::printf("face term   %.12g\n", rep.face_term);
    std::printf("edge term   %.12g\n", rep.edge_term);
  }
  if (rep.flux_term != 0.0) std::printf("flux term   %.12g\n", rep.flux_term);
  std::printf("quad error  %.3g%s\n", rep.quad_error,
              rep.converged ? "" : "  (NOT CONVERGED)");
  std::printf("total       %.12g\n", rep.total);
}

void maybe_dump_config(const CommonOpts& o, const std::string& evaluator,
                       const std::string& sequence_kind, double s0,
                       const std::string& extra = "") {
  StudyConfig cfg;
  cfg.metric = o.metric;
  cfg.n = o.n;
  cfg.params = parse_params(o.params);
  cfg.options = parse_options(o.options);
  cfg.evaluator = evaluator;
  cfg.sequence_kind = sequence_kind;
  cfg.s0 = s0;
  cfg.count = 1;
  cfg.quad = o.quad;
  std::cout << cfg.serialize();
  if (!extra.empty()) std::cout << extra;
}

int run_linearization(const CommonOpts& o, bool weighted, int instances,
                      const std::vector<double>& ladder) {
  std::mt19937 rng(20230901u);
  std::uniform_real_distribution<double> coef(-0.5, 0.5);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const int n = o.n;
  const MetricField gbar =
      weighted ? upper_half_space_metric(n) : euclidean_metric(n);
  const Expr V = Expr::parse("1/x1", n);

  bool all_ok = true;
  for (int inst = 0; inst < instances; ++inst) {
    // Random polynomial direction.
    std::vector<Expr> hp;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.3f + %.3f*x1 + %.3f*x2 + %.3f*x%d",
                      coef(rng), coef(rng), coef(rng), coef(rng), n);
        hp.push_back(Expr::parse(buf, n));
      }
    // Pack in the right order (the loop above already emits packed order).
    SymTensorField h(n, hp);

    HypersurfacePatch sigma;
    sigma.n = n;
    for (int i = 0; i < n; ++i) sigma.base[i] = coord(rng);
    if (weighted) sigma.base[0] = 1.5 + 0.5 * std::fabs(sigma.base[0]);
    // Tilted tangent frame around a random coordinate hyperplane.
    const int axis = inst % n;
    for (int i = 0; i < n; ++i) {
      if (i == axis) continue;
      VecN d{};
      d[i] = 1.0;
      d[axis] = 0.3 * coord(rng);
      sigma.dirs.push_back(d);
    }
    std::vector<double> zeros(static_cast<std::size_t>(n - 1), 0.0);
    std::vector<double> ones(static_cast<std::size_t>(n - 1), 1.0);
    sigma.domain = PatchDomain::box(zeros, ones);
    // For the frame {e_i + t_i e_axis}, the annihilating covector is
    // e_axis - sum t_i e_i.
    VecN w{};
    w[axis] = 1.0;
    int slot = 0;
    for (int i = 0; i < n; ++i) {
      if (i == axis) continue;
      w[i] = -sigma.dirs[static_cast<std::size_t>(slot)][axis];
      ++slot;
    }
    sigma.outward = w;

    const LinearizationReport rep = check_linearization(
        gbar, h, sigma, ladder, o.quad, weighted ? &V : nullptr);
    const bool ok = rep.slope >= 1.8 && rep.slope <= 2.2;
    all_ok = all_ok && ok;
    std::printf("instance %d: slope %.4f  residuals", inst + 1, rep.slope);
    for (double r : rep.residual) std::printf(" %.3e", r);
    std::printf("  [%s]\n", ok ? "ok" : "OUT OF BAND");
  }
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "polymass: mass of asymptotically flat and hyperbolic metrics from "
      "polyhedral geometry"};
  app.require_subcommand(1);

  CommonOpts common;
  common.quad.workers = default_workers();

  double radius = 1000.0, boxL = 16.0, scale = 0.0, prismL = 2.0;
  std::string prototype, sigma = "exp(L/2)", config_path, surface = "horosphere";
  std::string coeffs;
  int potential = 0, instances = 5, samples = 4, count = 4;
  double offset = 1.0, L0 = 16.0, factor = 2.0, cparam = 0.01;
  bool weighted = false;
  std::string eps_list = "1e-1,1e-2,1e-3,1e-4";

  CLI::App* adm = app.add_subcommand("adm", "ADM flux at one radius");
  add_common(adm, common);
  adm->add_option("--r", radius, "coordinate sphere radius");

  CLI::App* poly = app.add_subcommand(
      "poly-mass", "polyhedral mass: faces + dihedral angle deficit");
  add_common(poly, common);
  poly->add_option("--box-L", boxL, "half-width of the coordinate box");
  poly->add_option("--prototype", prototype,
                   "prototype name or file (scaled by --scale)");
  poly->add_option("--scale", scale, "prototype scale factor");

  CLI::App* slice = app.add_subcommand(
      "slice-mass", "slicing mass (angle deficits for n=3, box slices n>=4)");
  add_common(slice, common);
  slice->add_option("--L", boxL, "cube half-width");

  CLI::App* ah = app.add_subcommand("ah-mass",
                                    "asymptotically hyperbolic mass flux");
  add_common(ah, common);
  ah->add_option("--r", radius, "coordinate sphere radius in the z-chart");
  ah->add_option("--potential", potential,
                 "basis potential index (0 = t, i = z_i)");
  ah->add_option("--coeffs", coeffs,
                 "potential coefficients a0,a1,... (overrides --potential)");

  CLI::App* prism = app.add_subcommand(
      "prism", "upper-half-space prism evaluator for p0 - p1");
  add_common(prism, common);
  prism->add_option("--L", prismL, "prism extent parameter");
  prism->add_option("--sigma", sigma, "side half-width as expression in L");

  CLI::App* lin = app.add_subcommand("check-linearization",
                                     "mean-curvature expansion slope check");
  add_common(lin, common);
  lin->add_flag("--weighted", weighted, "check the weighted (mass form) version");
  lin->add_option("--instances", instances, "number of random instances");
  lin->add_option("--eps", eps_list, "epsilon ladder, comma separated");

  CLI::App* afn = app.add_subcommand(
      "check-a-functional", "A(V, Sigma) on upper-half-space hyperplanes");
  add_common(afn, common);
  afn->add_option("--surface", surface, "horosphere | vertical");
  afn->add_option("--offset", offset, "hyperplane offset (y1 = c or y2 = d)");
  afn->add_option("--samples", samples, "sample grid per axis");

  CLI::App* audit = app.add_subcommand(
      "audit", "positivity audit of the polyhedral combination");
  add_common(audit, common);
  audit->add_option("--L0", L0, "first box half-width");
  audit->add_option("--count", count, "number of boxes");
  audit->add_option("--factor", factor, "growth factor");
  audit->add_option("--c", cparam, "angle condition constant");

  CLI::App* study = app.add_subcommand("study", "run a study config file");
  study->add_option("--config", config_path, "study config path")->required();
  std::string study_out;
  study->add_option("--out", study_out, "output directory (overrides config)");
  bool study_json = false;
  study->add_flag("--json", study_json, "print the study JSON to stdout");

  CLI::App* list = app.add_subcommand("list-metrics", "list builtin metrics");

  // Usage errors exit with code 1; --help is a success.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (adm->parsed()) {
      if (common.dump_config) {
        maybe_dump_config(common, "adm", "sphere", radius);
        return 0;
      }
      const MassReport rep = adm_mass(load_field(common), radius, common.quad);
      print_report(rep, common.json);
      write_report_files(rep, common.out);
      return rep.converged ? 0 : 2;
    }
    if (poly->parsed()) {
      if (common.dump_config) {
        maybe_dump_config(common, "poly-mass",
                          prototype.empty() ? "box" : "prototype",
                          prototype.empty() ? boxL : scale);
        return 0;
      }
      Polytope P;
      if (!prototype.empty()) {
        Polytope proto = (prototype.find('/') != std::string::npos ||
                          prototype.find('.') != std::string::npos)
                             ? Polytope::from_file(prototype)
                             : Polytope::prototype(prototype);
        P = scale > 0.0 ? scaled_prototype(proto, scale) : proto;
      } else {
        P = Polytope::box(common.n, boxL);
      }
      MassReport rep = poly_mass(load_field(common), P, common.quad);
      rep.scale = prototype.empty() ? boxL : scale;
      print_report(rep, common.json);
      write_report_files(rep, common.out);
      return rep.converged ? 0 : 2;
    }
    if (slice->parsed()) {
      const MetricField g = load_field(common);
      const MassReport rep = common.n == 3
                                 ? slice_mass_3d(g, boxL, common.quad)
                                 : slice_mass_nd(g, boxL, common.quad);
      print_report(rep, common.json);
      write_report_files(rep, common.out);
      return rep.converged ? 0 : 2;
    }
    if (ah->parsed()) {
      StaticPotential V;
      if (!coeffs.empty()) {
        std::istringstream in(coeffs);
        std::string item;
        while (std::getline(in, item, ',')) V.coeffs.push_back(std::stod(item));
      } else {
        V = StaticPotential::basis(common.n, potential);
      }
      const MassReport rep =
          ah_mass(load_field(common), V, radius, common.quad);
      print_report(rep, common.json);
      write_report_files(rep, common.out);
      return rep.converged ? 0 : 2;
    }
    if (prism->parsed()) {
      const MetricSpec spec = resolve_metric(
          common.metric, common.n, parse_params(common.params),
          parse_options(common.options));
      MetricField gy = spec.type == AsymType::AHUpperHalfSpace
                           ? spec.field(parse_params(common.params))
                           : to_upper_half_space(spec, parse_params(common.params));
      SequencePlan plan = SequencePlan::prisms(common.n, {prismL}, sigma);
      MassReport rep =
          ah_prism_mass(gy, plan.element(0), common.quad);
      rep.scale = prismL;
      print_report(rep, common.json);
      write_report_files(rep, common.out);
      std::string detail;
      const bool cond = prism_condition_holds(plan, spec.decay, &detail);
      std::printf("sigma decay condition: %s\n", cond ? "satisfied" : "VIOLATED");
      return rep.converged ? 0 : 2;
    }
    if (lin->parsed()) {
      std::vector<double> ladder;
      std::istringstream in(eps_list);
      std::string item;
      while (std::getline(in, item, ',')) ladder.push_back(std::stod(item));
      return run_linearization(common, weighted, instances, ladder);
    }
    if (afn->parsed()) {
      const int n = common.n;
      HypersurfacePatch patch;
      patch.n = n;
      std::mt19937 rng(7u);
      std::uniform_real_distribution<double> coord(-1.0, 1.0);
      if (surface == "horosphere") {
        patch.base[0] = offset;
        for (int i = 1; i < n; ++i) patch.base[i] = coord(rng);
        for (int i = 1; i < n; ++i) {
          VecN d{};
          d[i] = 1.0;
          patch.dirs.push_back(d);
        }
        patch.outward[0] = 1.0;
      } else if (surface == "vertical") {
        patch.base[0] = 1.0 + std::fabs(coord(rng));
        patch.base[1] = offset;
        for (int i = 0; i < n; ++i) {
          if (i == 1) continue;
          VecN d{};
          d[i] = 1.0;
          patch.dirs.push_back(d);
        }
        patch.outward[1] = 1.0;
      } else {
        std::fprintf(stderr, "unknown surface '%s'\n", surface.c_str());
        return 1;
      }
      std::vector<double> zeros(static_cast<std::size_t>(n - 1), 0.0);
      std::vector<double> ones(static_cast<std::size_t>(n - 1), 1.0);
      patch.domain = PatchDomain::box(zeros, ones);

      // Deterministic random test tensor.
      std::vector<Expr> hp;
      std::uniform_real_distribution<double> coef(-0.5, 0.5);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "%.3f + %.3f*x1 + %.3f*sin(x2)",
                        coef(rng), coef(rng), coef(rng));
          hp.push_back(Expr::parse(buf, n));
        }
      const AFunctionalReport rep =
          check_A_functional(patch, SymTensorField(n, hp), samples);
      std::printf("samples                 %d\n", rep.samples);
      std::printf("max |A(V, Sigma)|       %.3e\n", rep.max_abs_A);
      std::printf("umbilicity residual     %.3e\n", rep.max_umbilic_residual);
      std::printf("reduction residual      %.3e\n", rep.max_reduction_residual);
      std::printf("conformal residual      %.3e\n", rep.max_conformal_residual);
      return rep.max_abs_A <= 1e-8 ? 0 : 2;
    }
    if (audit->parsed()) {
      const SequencePlan seq = SequencePlan::boxes(common.n, L0, count, factor);
      const SequenceConditionReport cond = check_sequence_conditions(seq, cparam);
      if (!cond.all_ok())
        std::printf("sequence conditions: %s\n", cond.notes.c_str());
      const PositivityReport rep =
          positivity_audit(load_field(common), seq, common.quad);
      std::printf("%-10s %-18s %-12s %s\n", "scale", "combination",
                  "quad_error", "pass");
      for (const auto& el : rep.elements)
        std::printf("%-10g %-18.10g %-12.3g %s\n", el.scale, el.combination,
                    el.quad_error, el.pass ? "yes" : "NO");
      if (rep.scalar_curvature_violations > 0)
        std::printf("scalar curvature spot check: %d violations (min %.3e)\n",
                    rep.scalar_curvature_violations,
                    rep.min_scalar_curvature);
      return rep.all_pass ? 0 : 2;
    }
    if (study->parsed()) {
      StudyConfig cfg = StudyConfig::from_file(config_path);
      if (!study_out.empty()) {
        std::filesystem::create_directories(study_out);
        cfg.out_json = study_out + "/study.json";
        cfg.out_csv = study_out + "/study.csv";
        cfg.out_svg = study_out + "/convergence.svg";
      }
      const Study result = run_study(cfg);
      if (!cfg.out_json.empty()) emit_json(result, cfg.out_json);
      if (!cfg.out_csv.empty()) emit_csv(result, cfg.out_csv);
      if (!cfg.out_svg.empty()) emit_svg(result, cfg.out_svg);
      if (study_json) {
        std::cout << result.to_json_string() << "\n";
      } else {
        std::printf("%-8s %-12s %-18s %-12s\n", "index", "scale", "total",
                    "quad_err");
        for (std::size_t i = 0; i < result.reports.size(); ++i)
          std::printf("%-8zu %-12g %-18.10g %-12.3g\n", i, result.scales[i],
                      result.reports[i].total, result.reports[i].quad_error);
        std::printf("extrapolated  %.10g +/- %.3g (exponent %.3g)\n",
                    result.extrapolation.value,
                    result.extrapolation.uncertainty,
                    result.extrapolation.exponent);
        if (!result.sequence_notes.empty())
          std::printf("sequence warnings: %s\n", result.sequence_notes.c_str());
      }
      if (result.aborted()) {
        std::fprintf(stderr, "study aborted (partial results saved): %s\n",
                     result.abort_reason.c_str());
        return 2;
      }
      return 0;
    }
    if (list->parsed()) {
      for (const std::string& name : builtin_metric_names())
        std::printf("%s\n", name.c_str());
      return 0;
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

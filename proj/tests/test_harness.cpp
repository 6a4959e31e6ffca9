#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "polymass/error.hpp"
#include "polymass/harness.hpp"

using namespace polymass;

TEST_CASE("power-law extrapolation recovers synthetic limits") {
  // v(L) = 1 + 3/L
  {
    std::vector<double> L{8, 16, 32, 64};
    std::vector<double> v, e;
    for (double l : L) {
      v.push_back(1.0 + 3.0 / l);
      e.push_back(1e-12);
    }
    const Extrapolation ex = extrapolate_power_law(L, v, e);
    CHECK(ex.from_fit);
    CHECK(std::fabs(ex.value - 1.0) <= 1e-6);
    CHECK(std::fabs(ex.exponent - 1.0) <= 1e-6);
    CHECK(ex.fit_residual <= 1e-9);
  }
  // quadratic decay, non-dyadic scales
  {
    std::vector<double> L{10, 30, 90};
    std::vector<double> v;
    for (double l : L) v.push_back(-2.0 + 5.0 / (l * l));
    const Extrapolation ex = extrapolate_power_law(L, v, {});
    CHECK(std::fabs(ex.value - (-2.0)) <= 1e-8);
    CHECK(std::fabs(ex.exponent - 2.0) <= 1e-6);
  }
  // flat data: no fit, last value with spread-bounded uncertainty
  {
    std::vector<double> L{1, 2, 4};
    std::vector<double> v{5.0, 5.0, 5.0};
    const Extrapolation ex = extrapolate_power_law(L, v, {});
    CHECK_FALSE(ex.from_fit);
    CHECK(ex.value == 5.0);
  }
  // uncertainty floor: never below the worst quadrature error
  {
    std::vector<double> L{8, 16, 32};
    std::vector<double> v{1.375, 1.1875, 1.09375};
    std::vector<double> e{1e-3, 1e-3, 2e-3};
    const Extrapolation ex = extrapolate_power_law(L, v, e);
    CHECK(ex.uncertainty >= 2e-3);
  }
}

TEST_CASE("study config round trip") {
  const std::string text =
      "# study\n"
      "metric = schwarzschild-isotropic\n"
      "n = 3\n"
      "param m = 1\n"
      "evaluator = poly-mass\n"
      "sequence = box L0=16 count=4 factor=2\n"
      "quad.order = 8\n"
      "quad.rtol = 1e-8\n"
      "quad.max_levels = 6\n"
      "quad.workers = 1\n"
      "output.csv = out.csv\n";
  const StudyConfig cfg = StudyConfig::parse(text, "study.cfg");
  CHECK(cfg.metric == "schwarzschild-isotropic");
  CHECK(cfg.params.at("m") == 1.0);
  CHECK(cfg.sequence_kind == "box");
  CHECK(cfg.scales() == std::vector<double>{16, 32, 64, 128});
  CHECK(cfg.out_csv == "out.csv");

  // serialize -> parse preserves the configuration
  const StudyConfig cfg2 = StudyConfig::parse(cfg.serialize(), "rt.cfg");
  CHECK(cfg2.metric == cfg.metric);
  CHECK(cfg2.scales() == cfg.scales());
  CHECK(cfg2.quad.order == cfg.quad.order);
  CHECK(cfg2.quad.rtol == cfg.quad.rtol);

  CHECK_THROWS_AS(StudyConfig::parse("bogus = 1\n", "bad.cfg"), ParseError);
}

TEST_CASE("study run, emission, and byte determinism") {
  StudyConfig cfg;
  cfg.metric = "schwarzschild-isotropic";
  cfg.n = 3;
  cfg.params["m"] = 1.0;
  cfg.evaluator = "poly-mass";
  cfg.sequence_kind = "box";
  cfg.s0 = 8.0;
  cfg.count = 3;
  cfg.factor = 2.0;

  const Study study = run_study(cfg);
  REQUIRE(study.reports.size() == 3);
  CHECK(study.extrapolation.value == doctest::Approx(1.0).epsilon(0.02));

  // CSV layout: header + one row per element.
  const std::string csv = study_csv(study);
  CHECK(csv.rfind("index,scale,face_term,edge_term,total,quad_err\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  // JSON round trip reproduces the study byte-for-byte.
  const std::string json = study.to_json_string();
  const Study back = Study::from_json_string(json);
  CHECK(equivalent(study, back));
  CHECK(back.to_json_string() == json);

  // Determinism across worker counts: byte-identical CSV and JSON
  // (wall time excluded from the JSON comparison via `equivalent`).
  for (int workers : {4, 8}) {
    StudyConfig c2 = cfg;
    c2.quad.workers = workers;
    const Study s2 = run_study(c2);
    CHECK(study_csv(s2) == csv);
    CHECK(equivalent(s2, study));
  }

  // SVG: one polyline per plotted series, static content.
  const std::string svg = study_svg(study);
  const auto count_occurrences = [&](const std::string& needle) {
    std::size_t cnt = 0, pos = 0;
    while ((pos = svg.find(needle, pos)) != std::string::npos) {
      ++cnt;
      pos += needle.size();
    }
    return cnt;
  };
  CHECK(count_occurrences("<polyline") == 2);  // deviation + quad error
  CHECK(svg.find("<svg") == 0);

  // File emission.
  const std::string dir = "/tmp/polymass_harness_test";
  std::filesystem::create_directories(dir);
  emit_csv(study, dir + "/study.csv");
  emit_json(study, dir + "/study.json");
  emit_svg(study, dir + "/convergence.svg");
  std::ifstream csv_in(dir + "/study.csv");
  std::string first_line;
  std::getline(csv_in, first_line);
  CHECK(first_line == "index,scale,face_term,edge_term,total,quad_err");
  std::filesystem::remove_all(dir);
}

TEST_CASE("adm study over sphere radii") {
  StudyConfig cfg;
  cfg.metric = "schwarzschild-isotropic";
  cfg.n = 3;
  cfg.params["m"] = 1.0;
  cfg.evaluator = "adm";
  cfg.sequence_kind = "sphere";
  cfg.s0 = 100.0;
  cfg.count = 3;
  cfg.factor = 2.0;
  const Study study = run_study(cfg);
  // flux values decrease toward m and extrapolate to it
  CHECK(std::fabs(study.extrapolation.value - 1.0) <= 1e-4);
}

TEST_CASE("euclidean studies sit at zero") {
  StudyConfig cfg;
  cfg.metric = "euclidean";
  cfg.n = 3;
  cfg.evaluator = "poly-mass";
  cfg.sequence_kind = "box";
  cfg.s0 = 2.0;
  cfg.count = 3;
  const Study study = run_study(cfg);
  CHECK(std::fabs(study.extrapolation.value) <= study.extrapolation.uncertainty + 1e-15);
  for (const MassReport& r : study.reports) CHECK(r.total == 0.0);
}

TEST_CASE("an element failure aborts the study with partial results") {
  StudyConfig cfg;
  cfg.metric = "schwarzschild-areal-rect";  // singular inside r^{n-2} = 2m
  cfg.n = 3;
  cfg.params["m"] = 1.0;
  cfg.evaluator = "adm";
  cfg.sequence_kind = "sphere";
  // The first radius is fine; the second sits inside the horizon and the
  // positive definiteness check fails there.
  cfg.explicit_scales = {100.0, 1.0};
  const Study study = run_study(cfg);
  CHECK(study.aborted());
  REQUIRE(study.reports.size() == 1);
  CHECK(study.scales.size() == 1);
  CHECK(study.abort_reason.find("positive definite") != std::string::npos);
  // The partial study still serializes and round-trips.
  const Study back = Study::from_json_string(study.to_json_string());
  CHECK(equivalent(study, back));
}

TEST_CASE("report totals are the documented combination of their terms") {
  QuadConfig cfg;
  const MetricField g =
      builtin_metric("schwarzschild-isotropic", 3, {{"m", 1.0}}).field();
  const MassReport pm = poly_mass(g, Polytope::box(3, 16.0), cfg);
  CHECK(pm.total ==
        (-pm.face_term + pm.edge_term) / (2.0 * unit_sphere_area(3)));
  const MassReport ad = adm_mass(g, 100.0, cfg);
  CHECK(ad.total == ad.flux_term / (2.0 * 2.0 * unit_sphere_area(3)));
}

TEST_CASE("prism study records decaying edge terms") {
  StudyConfig cfg;
  cfg.metric = "ads-schwarzschild-hyperboloid";
  cfg.n = 3;
  cfg.params["m"] = 1.0;
  cfg.evaluator = "prism";
  cfg.sequence_kind = "prism";
  cfg.explicit_scales = {1.5, 2.5};
  cfg.sigma = "exp(L/2)";
  cfg.quad.rtol = 1e-6;
  const Study study = run_study(cfg);
  REQUIRE(study.reports.size() == 2);
  CHECK(std::fabs(study.reports[1].edge_term) <
        std::fabs(study.reports[0].edge_term));
}

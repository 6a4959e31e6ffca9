#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "polymass/error.hpp"
#include "polymass/geometry.hpp"
#include "polymass/metrics.hpp"
#include "test_oracles.hpp"

using namespace polymass;

namespace {

std::span<const double> sp(const VecN& v, int n) {
  return std::span<const double>(v.data(), static_cast<std::size_t>(n));
}

//! Log-log decay slope of |h| (Frobenius, flat norm) sampled along a ray.
double decay_slope(const MetricField& g, const VecN& ray_dir, double r_min,
                   double r_max, int samples) {
  const int n = g.dimension();
  const SymTensorField h = g.perturbation();
  std::vector<double> lr, lh;
  for (int s = 0; s < samples; ++s) {
    const double t = static_cast<double>(s) / (samples - 1);
    const double r = r_min * std::pow(r_max / r_min, t);
    VecN x{};
    for (int i = 0; i < n; ++i) x[i] = r * ray_dir[i];
    const SymTensorField::At hat = h.at(sp(x, n));
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        norm2 += hat.val(i, j) * hat.val(i, j);
    lr.push_back(r);
    lh.push_back(std::sqrt(norm2));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < lr.size(); ++i) {
    if (!(lh[i] > 0.0)) continue;
    sx += std::log(lr[i]);
    sy += std::log(lh[i]);
    sxx += std::log(lr[i]) * std::log(lr[i]);
    sxy += std::log(lr[i]) * std::log(lh[i]);
    ++m;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

//! |h|_gbar decay slope for AH metrics (norm taken with the background).
double decay_slope_ah(const MetricField& g, const VecN& ray_dir, double r_min,
                      double r_max, int samples) {
  const int n = g.dimension();
  const SymTensorField h = g.perturbation();
  const MetricField gbar = g.background_field();
  std::vector<double> lr, lh;
  for (int s = 0; s < samples; ++s) {
    const double t = static_cast<double>(s) / (samples - 1);
    const double r = r_min * std::pow(r_max / r_min, t);
    VecN x{};
    for (int i = 0; i < n; ++i) x[i] = r * ray_dir[i];
    const SymTensorField::At hat = h.at(sp(x, n));
    const MetricAt mbar = gbar.at(sp(x, n));
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            norm2 += mbar.inv(i, k) * mbar.inv(j, l) * hat.val(i, j) *
                     hat.val(k, l);
    lr.push_back(r);
    lh.push_back(std::sqrt(std::fabs(norm2)));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < lr.size(); ++i) {
    if (!(lh[i] > 0.0)) continue;
    sx += std::log(lr[i]);
    sy += std::log(lh[i]);
    sxx += std::log(lr[i]) * std::log(lr[i]);
    sxy += std::log(lr[i]) * std::log(lh[i]);
    ++m;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("builtin component values") {
  // schwarzschild-isotropic at |x| = 10: g11 = (1 + 1/20)^4 = 1.21550625.
  {
    const MetricField g =
        builtin_metric("schwarzschild-isotropic", 3, {{"m", 1.0}}).field();
    const VecN x{10.0, 0.0, 0.0};
    const MetricAt m = g.at(sp(x, 3));
    CHECK(m.met(0, 0) == doctest::Approx(1.21550625).epsilon(1e-15));
    CHECK(m.met(0, 1) == 0.0);
  }
  // euclidean is the identity everywhere.
  {
    const MetricField g = builtin_metric("euclidean", 4).field();
    const VecN x{3.0, -2.0, 0.5, 9.0};
    const MetricAt m = g.at(sp(x, 4));
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j)
        CHECK(m.met(i, j) == (i == j ? 1.0 : 0.0));
  }
  // ads-schwarzschild with m = 0 degenerates to the hyperbolic background.
  {
    const MetricField ads =
        builtin_metric("ads-schwarzschild-hyperboloid", 3, {{"m", 0.0}})
            .field();
    const MetricField hyp = builtin_metric("hyperbolic-hyperboloid", 3).field();
    const VecN z{1.5, -0.5, 2.0};
    const MetricAt a = ads.at(sp(z, 3)), b = hyp.at(sp(z, 3));
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j)
        CHECK(a.met(i, j) == doctest::Approx(b.met(i, j)).epsilon(1e-14));
  }
  // areal-rect diverges at the horizon r^{n-2} = 2m.
  {
    const MetricField g =
        builtin_metric("schwarzschild-areal-rect", 3, {{"m", 1.0}}).field();
    const VecN inside{1.5, 0.0, 0.0};  // r < 2m
    CHECK_THROWS_AS(g.at(sp(inside, 3)), Error);
  }
}

TEST_CASE("unknown builtin and decay validation") {
  CHECK_THROWS_AS(builtin_metric("nope", 3), Error);
  // perturbed-flat with p = 0.4 violates p > (n-2)/2 = 0.5 for n = 3.
  CHECK_THROWS_AS(builtin_metric("perturbed-flat", 3, {{"p", 0.4}}), Error);
  CHECK_NOTHROW(builtin_metric("perturbed-flat", 3, {{"p", 0.6}}));
}

TEST_CASE("metric file loader") {
  const std::string good =
      "# test metric\n"
      "dim = 3\n"
      "type = AF\n"
      "decay = 1\n"
      "param m = 1\n"
      "g[1][1] = (1 + m/(2*r))^4\n"
      "g[1][2] = 0\n"
      "g[1][3] = 0\n"
      "g[2][2] = (1 + m/(2*r))^4\n"
      "g[2][3] = 0\n"
      "g[3][3] = (1 + m/(2*r))^4\n";
  const MetricSpec spec = parse_metric_text(good, "good.metric");
  CHECK(spec.n == 3);
  CHECK(spec.decay == 1.0);
  CHECK(spec.param_defaults.at("m") == 1.0);
  CHECK(spec.comp_sources[0] == "(1 + m/(2*r))^4");  // bit-exact as written

  // Round trip through serialize/parse preserves everything.
  const MetricSpec again = parse_metric_text(spec.serialize(), "rt.metric");
  CHECK(again.n == spec.n);
  CHECK(again.decay == spec.decay);
  CHECK(again.comp_sources == spec.comp_sources);
  CHECK(again.param_defaults == spec.param_defaults);

  // File round trip.
  const std::string path = "/tmp/polymass_rt.metric";
  save_metric_file(spec, path);
  const MetricSpec loaded = load_metric_file(path);
  CHECK(loaded.comp_sources == spec.comp_sources);
  std::filesystem::remove(path);
}

TEST_CASE("metric file error paths") {
  // Decay violation: p = 0.4 with n = 3.
  const std::string bad_decay =
      "dim = 3\ntype = AF\ndecay = 0.4\n"
      "g[1][1] = 1\ng[1][2] = 0\ng[1][3] = 0\n"
      "g[2][2] = 1\ng[2][3] = 0\ng[3][3] = 1\n";
  try {
    parse_metric_text(bad_decay, "bad.metric");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("p > (n-2)/2") != std::string::npos);
  }

  // Missing component listed by name.
  const std::string missing =
      "dim = 3\ntype = AF\ndecay = 1\n"
      "g[1][1] = 1\ng[1][2] = 0\ng[1][3] = 0\n"
      "g[2][2] = 1\ng[3][3] = 1\n";
  try {
    parse_metric_text(missing, "missing.metric");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("g[2][3]") != std::string::npos);
  }

  // Asymmetric specification (i > j) is rejected.
  const std::string asym =
      "dim = 3\ntype = AF\ndecay = 1\n"
      "g[2][1] = 0\n";
  CHECK_THROWS_AS(parse_metric_text(asym, "asym.metric"), ParseError);

  // Expression errors carry the line number.
  const std::string badexpr =
      "dim = 3\ntype = AF\ndecay = 1\n"
      "g[1][1] = foo(x1)\ng[1][2] = 0\ng[1][3] = 0\n"
      "g[2][2] = 1\ng[2][3] = 0\ng[3][3] = 1\n";
  try {
    parse_metric_text(badexpr, "expr.metric");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
  }
}

TEST_CASE("AF decay slopes match the declared rate") {
  VecN ray{};
  ray[0] = 0.48;
  ray[1] = 0.6;
  ray[2] = 0.64;  // unit vector
  for (const char* name :
       {"schwarzschild-isotropic", "schwarzschild-areal-rect"}) {
    const MetricSpec spec = builtin_metric(name, 3, {{"m", 1.0}});
    const double slope = decay_slope(spec.field(), ray, 1e2, 1e4, 12);
    CHECK_MESSAGE(std::fabs(slope - (-spec.decay)) <= 0.1, name,
                  " slope: ", slope);
  }
  {
    const MetricSpec spec =
        builtin_metric("perturbed-flat", 3, {{"p", 1.5}, {"eps", 0.01}});
    const double slope = decay_slope(spec.field(), ray, 1e2, 1e4, 12);
    CHECK(std::fabs(slope - (-1.5)) <= 0.1);
  }
  {
    const MetricSpec spec = builtin_metric("conformal-custom", 3);
    const double slope = decay_slope(spec.field(), ray, 1e2, 1e4, 12);
    CHECK(std::fabs(slope - (-1.0)) <= 0.1);
  }
}

TEST_CASE("AdS-Schwarzschild |h|_gbar decays like r^{-n}") {
  VecN ray{};
  ray[0] = 0.48;
  ray[1] = 0.6;
  ray[2] = 0.64;
  const MetricField g =
      builtin_metric("ads-schwarzschild-hyperboloid", 3, {{"m", 1.0}}).field();
  const double slope = decay_slope_ah(g, ray, 1e2, 1e4, 12);
  CHECK(std::fabs(slope - (-3.0)) <= 0.1);
}

TEST_CASE("resolve_metric dispatches between builtins and files") {
  CHECK_NOTHROW(resolve_metric("euclidean", 3));
  CHECK_THROWS_AS(resolve_metric("/nonexistent/file.metric", 3), Error);
}

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polymass/evaluators.hpp"
#include "polymass/metrics.hpp"

using namespace polymass;

namespace {
constexpr double kPi = std::numbers::pi;

MetricField schwarzschild3(double m = 1.0) {
  return builtin_metric("schwarzschild-isotropic", 3, {{"m", m}}).field();
}

}  // namespace

TEST_CASE("ADM flux evaluator") {
  QuadConfig cfg;

  // Euclidean: exactly zero.
  {
    const MassReport rep = adm_mass(euclidean_metric(3), 5.0, cfg);
    CHECK(rep.total == 0.0);
  }

  // Schwarzschild isotropic: the flux at radius r has the closed form
  // m (1 + m/(2r))^3, obtained by integrating the analytic radial
  // derivative of the conformal factor over the round sphere.
  {
    const MetricField g = schwarzschild3();
    for (double r : {1e2, 1e3}) {
      const MassReport rep = adm_mass(g, r, cfg);
      const double oracle = std::pow(1.0 + 0.5 / r, 3);
      CHECK(std::fabs(rep.total - oracle) <= 1e-8 * oracle);
      CHECK(rep.converged);
    }
    // approaches m = 1 like 3/(2r)
    CHECK(std::fabs(adm_mass(g, 1e3, cfg).total - 1.0) <= 2e-3);
  }

  // Areal rectangular coordinates give the same mass in the limit
  // (coordinate invariance); at finite radius the flux is within O(1/r).
  {
    const MetricField g =
        builtin_metric("schwarzschild-areal-rect", 3, {{"m", 1.0}}).field();
    const MassReport rep = adm_mass(g, 1e3, cfg);
    CHECK(std::fabs(rep.total - 1.0) <= 1e-2);
  }
}

TEST_CASE("polyhedral mass on boxes") {
  QuadConfig cfg;

  // Flat metric: every term vanishes identically.
  {
    const MassReport rep = poly_mass(euclidean_metric(3), Polytope::box(3, 2.0), cfg);
    CHECK(rep.face_term == 0.0);
    CHECK(rep.edge_term == 0.0);
    CHECK(rep.total == 0.0);
    const MassReport rep4 =
        poly_mass(euclidean_metric(4), Polytope::box(4, 1.0), cfg);
    CHECK(rep4.total == 0.0);
  }

  // Isotropic coordinates are conformal to the background: the edge term
  // vanishes to quadrature precision and the total approaches the mass.
  {
    const MetricField g = schwarzschild3();
    const MassReport rep = poly_mass(g, Polytope::box(3, 128.0), cfg);
    CHECK(std::fabs(rep.edge_term) <= 1e-8);
    CHECK(std::fabs(rep.total - 1.0) <= 0.02);
    // cross-check against the flux evaluator
    const double adm = adm_mass(g, 1e3, cfg).total;
    CHECK(std::fabs(rep.total - adm) <= 0.02);
  }

  // Areal rectangular coordinates: the angle deficit carries a genuine
  // share of the mass.
  {
    const MetricField g =
        builtin_metric("schwarzschild-areal-rect", 3, {{"m", 1.0}}).field();
    const MassReport rep = poly_mass(g, Polytope::box(3, 128.0), cfg);
    CHECK(std::fabs(rep.edge_term) > 1e-4);
    CHECK(std::fabs(rep.total - 1.0) <= 0.02);
    // face term alone misses the mass
    const double face_only = -rep.face_term / (2.0 * unit_sphere_area(3));
    CHECK(std::fabs(face_only - 1.0) > 0.05);
  }
}

TEST_CASE("polyhedral mass convergence along doubling boxes") {
  QuadConfig cfg;
  const MetricField g = schwarzschild3();
  std::vector<double> scales, totals, errs;
  for (double L : {16.0, 32.0, 64.0, 128.0}) {
    const MassReport rep = poly_mass(g, Polytope::box(3, L), cfg);
    scales.push_back(L);
    totals.push_back(rep.total);
    errs.push_back(rep.quad_error);
  }
  // deviation |total - 1| shrinks roughly like 1/L
  for (std::size_t i = 1; i < totals.size(); ++i)
    CHECK(std::fabs(totals[i] - 1.0) < std::fabs(totals[i - 1] - 1.0));
  const double ratio =
      std::fabs(totals[1] - 1.0) / std::fabs(totals[3] - 1.0);
  CHECK(ratio > 3.0);  // two doublings of L shrink the defect ~4x
}

TEST_CASE("general polyhedra: triangular prism and tetrahedron") {
  QuadConfig cfg;
  const MetricField g = schwarzschild3();
  // Scaled prototypes approach the same mass; moderate scale keeps the
  // test quick, so only consistency at the few-percent level is asserted.
  {
    const Polytope prism =
        scaled_prototype(Polytope::prototype("triangular-prism"), 128.0);
    const MassReport rep = poly_mass(g, prism, cfg);
    CHECK(std::fabs(rep.edge_term) <= 1e-8);  // conformal: no angle deficit
    CHECK(std::fabs(rep.total - 1.0) <= 0.05);
  }
  {
    const Polytope tet =
        scaled_prototype(Polytope::prototype("tetrahedron"), 192.0);
    const MassReport rep = poly_mass(g, tet, cfg);
    CHECK(std::fabs(rep.total - 1.0) <= 0.05);
  }
}

TEST_CASE("3-d slicing evaluator") {
  QuadConfig cfg;
  cfg.rtol = 1e-7;

  // Euclidean: every slice deficit is zero (2 pi - 0 - 4 * pi/2).
  {
    const MassReport rep = slice_mass_3d(euclidean_metric(3), 4.0, cfg);
    CHECK(std::fabs(rep.total) <= 1e-12);
  }

  // Schwarzschild: approaches the mass; L = 64 keeps runtime modest.
  {
    const MassReport rep = slice_mass_3d(schwarzschild3(), 64.0, cfg);
    CHECK(std::fabs(rep.total - 1.0) <= 0.03);
  }
}

TEST_CASE("n = 4 slicing evaluator") {
  QuadConfig cfg;
  cfg.rtol = 1e-6;  // inner polyhedral evaluations dominate the runtime

  {
    const MassReport rep = slice_mass_nd(euclidean_metric(4), 4.0, cfg);
    CHECK(std::fabs(rep.total) <= 1e-12);
  }
  {
    const MetricField g =
        builtin_metric("schwarzschild-isotropic", 4, {{"m", 1.0}}).field();
    const MassReport rep = slice_mass_nd(g, 24.0, cfg);
    const double adm = adm_mass(g, 1e3, cfg).total;
    // at L = 24 the slicing sum sits within ~10% of the flux value
    CHECK(std::fabs(rep.total - adm) <= 0.1 * std::fabs(adm));
  }
}

TEST_CASE("per-slice quantity matches the induced-metric polyhedral mass") {
  QuadConfig cfg;
  cfg.rtol = 1e-6;
  const MetricField g =
      builtin_metric("schwarzschild-isotropic", 4, {{"m", 1.0}}).field();
  // m_4^{(3)}(0, L) is the 3-d polyhedral mass of the induced metric on
  // {x4 = 0} evaluated on the concentric 3-box, by construction.
  const MetricField induced = g.restrict_to_hyperplane(4, 0.0);
  const double direct = poly_mass(induced, Polytope::box(3, 32.0), cfg).total;
  const double via_slice = slice_quantity(g, 4, 0.0, 32.0, cfg);
  CHECK(std::fabs(direct - via_slice) <= 1e-10);
  // The induced 3-metric decays fast enough (p = 2 > n - 3) that its mass
  // vanishes in the limit; at finite L the value is already small.
  CHECK(std::fabs(via_slice) <= 0.05);
}

TEST_CASE("positivity audit") {
  QuadConfig cfg;
  // Positive mass: the unnormalized combination stays nonnegative.
  {
    const SequencePlan seq = SequencePlan::boxes(3, 16.0, 3);
    const PositivityReport rep = positivity_audit(schwarzschild3(1.0), seq, cfg);
    CHECK(rep.all_pass);
    CHECK(rep.scalar_curvature_violations == 0);
    for (const auto& el : rep.elements) CHECK(el.combination >= -el.quad_error);
  }
  // Negative mass parameter: flagged negative for large boxes.
  {
    const SequencePlan seq = SequencePlan::boxes(3, 16.0, 3);
    const PositivityReport rep =
        positivity_audit(schwarzschild3(-1.0), seq, cfg);
    CHECK_FALSE(rep.all_pass);
    // combination tends to (n-1) omega_{n-1} * mass < 0
    CHECK(rep.elements.back().combination < 0.0);
  }
  // Euclidean: identically zero.
  {
    const SequencePlan seq = SequencePlan::boxes(3, 4.0, 3);
    const PositivityReport rep =
        positivity_audit(euclidean_metric(3), seq, cfg);
    CHECK(rep.all_pass);
    for (const auto& el : rep.elements) CHECK(el.combination == 0.0);
  }
}

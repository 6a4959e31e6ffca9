#pragma once

#include <functional>
#include <span>
#include <vector>

#include "polymass/linalg.hpp"
#include "polymass/surface.hpp"

namespace polymass {

//! Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_rule(int order);

//! Quadrature configuration; config keys quad.order, quad.rtol,
//! quad.max_levels, quad.workers map onto these fields one-to-one.
//! Refinement stops when the step-to-step change is below
//! max(rtol * |estimate|, atol); the absolute floor keeps integrals whose
//! true value is near zero from refining forever.
struct QuadConfig {
  int order = 8;
  double rtol = 1e-8;
  double atol = 1e-12;
  int max_levels = 6;
  int workers = 1;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // |I_fine - I_coarse| of the last refinement step
  bool converged = false;
  int levels = 0;
  long long evaluations = 0;

  QuadResult& operator+=(const QuadResult& o) {
    value += o.value;
    error += o.error;
    converged = converged && o.converged;
    levels = std::max(levels, o.levels);
    evaluations += o.evaluations;
    return *this;
  }
};

using Integrand = std::function<double(std::span<const double>)>;

//! Adaptive tensor-product integration over a box: panels per axis double
//! each level until successive estimates agree to rtol. Panels are summed
//! compensated in lexicographic order, so results are bit-identical for any
//! worker count.
QuadResult integrate_box(std::span<const double> lo,
                         std::span<const double> hi, const Integrand& f,
                         const QuadConfig& cfg);

//! Integration over a patch parameter domain; simplex domains are mapped
//! from the unit box by the collapsed transform u = (s(1-t), st) whose
//! Jacobian s keeps nodes off the collapsed vertex.
QuadResult integrate_domain(const PatchDomain& domain, const Integrand& f,
                            const QuadConfig& cfg);

//! One face of the cube-to-sphere decomposition of the coordinate sphere
//! {|x| = radius}: the central projection of the cube face {w_axis = sign}.
//! The 2n charts cover the sphere with overlaps of measure zero and carry
//! no pole singularities.
struct SphereChart {
  int n = 0;
  int axis = 0;
  int sign = 1;
  double radius = 0.0;

  VecN cube_point(std::span<const double> u) const {
    VecN w{};
    w[axis] = static_cast<double>(sign);
    int a = 0;
    for (int i = 0; i < n; ++i)
      if (i != axis) w[i] = u[a++];
    return w;
  }
  VecN point(std::span<const double> u) const;
  //! Tangent vectors dx/du_a (ambient components).
  std::vector<VecN> tangents(std::span<const double> u) const;
  //! Second derivatives d2x/du_a du_b packed by sym_index(a, b).
  std::vector<VecN> second_derivs(std::span<const double> u) const;
  //! Euclidean area element: r^{n-1} |w|^{-n}.
  double euclidean_jacobian(std::span<const double> u) const;
};

std::vector<SphereChart> sphere_charts(int n, double radius);

//! Integral over the coordinate sphere {|x| = r} with the Euclidean measure;
//! the integrand receives the point and the Euclidean outward unit normal.
using SphereIntegrand =
    std::function<double(std::span<const double>, std::span<const double>)>;
QuadResult integrate_sphere(int n, double radius, const SphereIntegrand& f,
                            const QuadConfig& cfg);

}  // namespace polymass

#pragma once

#include <span>

#include "polymass/metric_field.hpp"
#include "polymass/surface.hpp"

namespace polymass {

//! Unit normal of a hypersurface with respect to a metric, obtained from the
//! (constant along affine patches) Euclidean outward conormal w: the metric
//! unit conormal is omega = w/|w|_g and the normal vector is nu = g^{-1}omega.
struct UnitNormal {
  VecN nu{};       // vector components nu^i
  VecN conormal{}; // covector components omega_i = g(nu, .)
  double w_norm = 0.0;  // |w|_g
};
UnitNormal unit_normal(const MetricAt& m, std::span<const double> w_outward);

//! Second fundamental form data of a parametrized hypersurface at one point.
//! Conventions: A_ab = -omega_k (d2x^k_ab + Gamma^k_ij T_a^i T_b^j) and
//! H = gamma^{ab} A_ab, which makes the outward-oriented Euclidean sphere
//! have H = (n-1)/rho > 0.
struct SurfaceGeometry {
  int k = 0;          // tangent count (n-1)
  SymMat induced;     // gamma_ab = g(T_a, T_b)
  SymMat induced_inv;
  double area_element = 0.0;  // sqrt(det gamma)
  SymMat second_form; // A_ab
  double mean_curvature = 0.0;
  UnitNormal normal;
};

//! `second_derivs`, when present, holds d^2 x / du_a du_b packed by
//! sym_index(a, b); pass an empty span for affine patches.
SurfaceGeometry hypersurface_geometry(const MetricAt& m,
                                      std::span<const VecN> tangents,
                                      std::span<const VecN> second_derivs,
                                      std::span<const double> w_outward);

//! Affine-patch convenience wrapper evaluating g at S.point(u).
SurfaceGeometry second_fundamental_form(const MetricField& g,
                                        const HypersurfacePatch& S,
                                        std::span<const double> u);

//! Interior dihedral angle alpha = arccos(-g(nu1, nu2)) between the two
//! faces adjacent to an edge, evaluated at the edge point e.point(u).
//! Euclidean cubes give pi/2; conformal metrics reproduce the Euclidean
//! angle exactly.
double dihedral_angle(const MetricField& g, const EdgePatch& e,
                      std::span<const double> u);

//! Scalar curvature from second-order jets.
double scalar_curvature_at(const MetricAt& m);
double scalar_curvature(const MetricField& g, std::span<const double> x);

//! Geodesic curvature of an affine segment inside a 2-dimensional metric,
//! with the normal taken leftward of the travel direction (counterclockwise
//! boundary orientation). Straight coordinate lines in flat metrics give 0.
double geodesic_curvature(const MetricField& g2, std::span<const double> x,
                          std::span<const double> direction);

//! Oriented angle in (-pi, pi] between incoming and outgoing tangents,
//! measured with g2 at x; the sign follows the coordinate orientation.
double turning_angle(const MetricField& g2, std::span<const double> x,
                     std::span<const double> t_in,
                     std::span<const double> t_out);

//! Covariant divergence, trace, and trace differential of a symmetric
//! 2-tensor h with respect to the metric whose jet data is `gbar`:
//!   (div h)_j = g^{ik} (d_i h_kj - Gamma^m_ik h_mj - Gamma^m_ij h_km)
//!   tr h      = g^{ij} h_ij
//!   (d tr)_p  = d_p(g^{ij}) h_ij + g^{ij} d_p h_ij
struct DivTrace {
  VecN div{};
  double tr = 0.0;
  VecN dtr{};
};
DivTrace covariant_divergence(const MetricAt& gbar,
                              const SymTensorField::At& h);

//! Surface area of the unit (n-1)-sphere in R^n: 2 pi^{n/2} / Gamma(n/2).
double unit_sphere_area(int n);

}  // namespace polymass

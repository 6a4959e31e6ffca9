#pragma once

#include <optional>

#include "polymass/geometry.hpp"
#include "polymass/mass_report.hpp"
#include "polymass/metrics.hpp"
#include "polymass/polytope.hpp"
#include "polymass/quadrature.hpp"

namespace polymass {

//! Integral of f over a face with the measure induced from g; the callback
//! receives the ambient point, the metric jets, and the surface geometry.
using FaceIntegrand = std::function<double(
    std::span<const double>, const MetricAt&, const SurfaceGeometry&)>;
QuadResult integrate_face(const MetricField& g, const Face& face,
                          const FaceIntegrand& f, const QuadConfig& cfg);

//! ADM flux evaluated at one radius (Euclidean normal and measure):
//!   (1 / (2 (n-1) omega_{n-1})) * int_{S_r} (g_ij,i - g_ii,j) nu^j dsigma.
MassReport adm_mass(const MetricField& g, double r, const QuadConfig& cfg);

//! Polyhedral mass at one polytope: face term int_F H dsigma with the
//! outward normal, edge term int_E (alpha - alpha-bar) dmu, both measured
//! with the metric induced from g; total = (-face + edge)/((n-1) omega_{n-1}).
MassReport poly_mass(const MetricField& g, const Polytope& P,
                     const QuadConfig& cfg);

//! 3-d slicing mass: for each axis k and slice offset t, the angle deficit
//! 2 pi - int kappa ds - sum of turning angles of the square cross-section
//! of the cube of half-width L, integrated in t and summed over k, divided
//! by 8 pi.
MassReport slice_mass_3d(const MetricField& g, double L,
                         const QuadConfig& cfg);

//! Higher-dimensional slicing (n >= 4): per axis and slice offset, the
//! (n-1)-dimensional polyhedral mass of the induced metric on the slice
//! box, integrated in t; total carries omega_{n-2} / ((n-1) omega_{n-1}).
MassReport slice_mass_nd(const MetricField& g, double L,
                         const QuadConfig& cfg);

//! Per-slice quantity m_k^{(n-1)}(t, L): the polyhedral mass of the induced
//! metric on {x_k = t} evaluated on the concentric (n-1)-box of half-width L.
double slice_quantity(const MetricField& g, int k_one_based, double t,
                      double L, const QuadConfig& cfg);

//! Static potential a0 t + sum_i a_i z_i on the hyperboloid model,
//! t = sqrt(1 + r^2).
struct StaticPotential {
  std::vector<double> coeffs;  // a0..an
  static StaticPotential basis(int n, int index);  // 0 -> t, i -> z_i
  Expr expr(int n) const;
};

//! One component of the asymptotically hyperbolic mass functional at radius
//! r: the flux of U(V) = V(div h - d tr h) + (tr h) dV - h(grad V, .)
//! through the coordinate sphere, with the hyperbolic background measure
//! and normal. The metric must be in the hyperboloid chart.
MassReport ah_mass(const MetricField& g, const StaticPotential& V, double r,
                   const QuadConfig& cfg);

struct AHMassVector {
  std::vector<double> p;       // p_0 .. p_n
  std::vector<double> errors;  // quadrature error per component
  double radius = 0.0;
};
AHMassVector ah_mass_vector(const MetricField& g, double r,
                            const QuadConfig& cfg);

//! Prism evaluator for p_0 - p_1 in upper-half-space coordinates:
//!   total = 2 [ int_F V (Hbar - H) dsigma-bar + int_E V (alpha - pi/2) dmu-bar ]
//! with V = 1/y_1 and all background quantities from the exact hyperbolic
//! upper-half-space metric. per_face keeps the bottom horosphere separate.
MassReport ah_prism_mass(const MetricField& g_uhs, const Polytope& prism,
                         const QuadConfig& cfg);

//! Measures how fast the first-order expansion of the mean curvature
//! difference closes: residual(eps) integrated over Sigma should shrink
//! like eps^2. The weighted mode checks the expansion of U(V)(nu-bar)
//! instead, with the same expected slope.
struct LinearizationReport {
  std::vector<double> eps;
  std::vector<double> residual;
  double slope = 0.0;  // log-log fit
  bool weighted = false;
};
LinearizationReport check_linearization(const MetricField& gbar,
                                        const SymTensorField& h_direction,
                                        const HypersurfacePatch& sigma,
                                        std::vector<double> eps_ladder,
                                        const QuadConfig& cfg,
                                        const Expr* weight = nullptr);

//! Pointwise functional A(V, Sigma) = (tr_gamma h) dV(nu) - V <Abar, h>
//! on upper-half-space hypersurface patches with V = 1/y_1, sampled on a
//! deterministic grid; also verifies the umbilic reduction and the
//! conformal second-fundamental-form identity.
struct AFunctionalReport {
  double max_abs_A = 0.0;
  double max_umbilic_residual = 0.0;
  double max_reduction_residual = 0.0;
  double max_conformal_residual = 0.0;
  int samples = 0;
};
AFunctionalReport check_A_functional(const HypersurfacePatch& sigma,
                                     const SymTensorField& h,
                                     int samples_per_axis = 4);

//! The (unnormalized) combination -int_F H + int_E (alpha - alpha-bar) per
//! sequence element, with pass defined as >= -(quadrature error). Scalar
//! curvature is spot-sampled and violations reported; the audit still runs.
struct PositivityReport {
  struct El {
    double scale = 0.0;
    double combination = 0.0;
    double quad_error = 0.0;
    bool pass = false;
  };
  std::vector<El> elements;
  bool all_pass = false;
  int scalar_curvature_violations = 0;
  double min_scalar_curvature = 0.0;
};
PositivityReport positivity_audit(const MetricField& g,
                                  const SequencePlan& seq,
                                  const QuadConfig& cfg);

}  // namespace polymass

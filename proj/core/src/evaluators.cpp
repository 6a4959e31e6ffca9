#include "polymass/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "polymass/error.hpp"

namespace polymass {

namespace {

constexpr double kPi = std::numbers::pi;

std::span<const double> vec_span(const VecN& v, int n) {
  return std::span<const double>(v.data(), static_cast<std::size_t>(n));
}

//! Induced volume element of an affine patch (any codimension) at a point.
double induced_measure(const MetricAt& m, const std::vector<VecN>& dirs) {
  if (dirs.empty()) return 1.0;
  SymMat gram;
  gram.n = static_cast<int>(dirs.size());
  for (int a = 0; a < gram.n; ++a)
    for (int b = a; b < gram.n; ++b) {
      double s = 0.0;
      for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
          s += m.met(i, j) * dirs[a][i] * dirs[b][j];
      gram.at(a, b) = s;
    }
  const auto chol = cholesky(gram);
  if (!chol) throw GeometryError("degenerate induced metric on edge patch");
  return std::sqrt(det_from_cholesky(*chol, gram.n));
}

double fit_loglog_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  const double denom = m * sxx - sx * sx;
  if (m < 2 || std::fabs(denom) < 1e-300) return 0.0;
  return (m * sxy - sx * sy) / denom;
}

}  // namespace

QuadResult integrate_face(const MetricField& g, const Face& face,
                          const FaceIntegrand& f, const QuadConfig& cfg) {
  QuadResult total;
  total.converged = true;
  for (const HypersurfacePatch& patch : face.patches) {
    Integrand integrand = [&](std::span<const double> u) {
      const VecN x = patch.point(u);
      const MetricAt m = g.at_first_order(vec_span(x, patch.n));
      const SurfaceGeometry sg = hypersurface_geometry(
          m, patch.dirs, {}, vec_span(patch.outward, patch.n));
      return f(vec_span(x, patch.n), m, sg) * sg.area_element;
    };
    total += integrate_domain(patch.domain, integrand, cfg);
  }
  return total;
}

namespace {

QuadResult integrate_edge_deficit(const MetricField& g, const Edge& edge,
                                  double reference_angle,
                                  const Expr* weight,  // evaluated at x
                                  const QuadConfig& cfg) {
  const EdgePatch& ep = edge.patch;
  Integrand integrand = [&](std::span<const double> u) {
    const VecN x = ep.point(u);
    const MetricAt m = g.at_first_order(vec_span(x, ep.n));
    const UnitNormal n1 = unit_normal(m, vec_span(ep.outward_a, ep.n));
    const UnitNormal n2 = unit_normal(m, vec_span(ep.outward_b, ep.n));
    double inner = 0.0;
    for (int i = 0; i < ep.n; ++i)
      for (int j = 0; j < ep.n; ++j)
        inner += m.met(i, j) * n1.nu[i] * n2.nu[j];
    const double alpha = std::acos(std::clamp(-inner, -1.0, 1.0));
    double w = 1.0;
    if (weight) w = weight->eval(vec_span(x, ep.n));
    return w * (alpha - reference_angle) * induced_measure(m, ep.dirs);
  };
  return integrate_domain(ep.domain, integrand, cfg);
}

}  // namespace

MassReport adm_mass(const MetricField& g, double r, const QuadConfig& cfg) {
  const int n = g.dimension();
  if (g.asym_type() != AsymType::AF)
    throw Error("adm_mass expects an asymptotically flat metric");
  MassReport rep;
  rep.evaluator = "adm";
  rep.n = n;
  rep.params = g.params();
  rep.geometry_kind = "sphere";
  rep.scale = r;
  {
    std::ostringstream os;
    os << "coordinate sphere r = " << r;
    rep.geometry_desc = os.str();
  }

  SphereIntegrand f = [&](std::span<const double> x,
                          std::span<const double> nu) {
    const MetricAt m = g.at_first_order(x);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double dgi = 0.0;   // d_i g_ij
      double dtr = 0.0;   // d_j g_ii
      for (int i = 0; i < n; ++i) {
        dgi += m.d(i, i, j);
        dtr += m.d(j, i, i);
      }
      s += (dgi - dtr) * nu[j];
    }
    return s;
  };
  const QuadResult q = integrate_sphere(n, r, f, cfg);
  rep.flux_term = q.value;
  rep.quad_error = q.error;
  rep.converged = q.converged;
  rep.evaluations = q.evaluations;
  const double norm = 2.0 * (n - 1) * unit_sphere_area(n);
  rep.total = q.value / norm;
  return rep;
}

MassReport poly_mass(const MetricField& g, const Polytope& P,
                     const QuadConfig& cfg) {
  const int n = g.dimension();
  if (P.dimension() != n) throw Error("polytope/metric dimension mismatch");
  MassReport rep;
  rep.evaluator = "poly-mass";
  rep.n = n;
  rep.params = g.params();
  rep.geometry_kind = "polytope";
  {
    std::ostringstream os;
    os << P.faces().size() << " faces, " << P.edges().size() << " edges";
    rep.geometry_desc = os.str();
  }

  FaceIntegrand mean_curv = [](std::span<const double>, const MetricAt&,
                               const SurfaceGeometry& sg) {
    return sg.mean_curvature;
  };
  for (const Face& face : P.faces()) {
    const QuadResult q = integrate_face(g, face, mean_curv, cfg);
    rep.per_face.push_back({face.tag, q.value, q.error});
    rep.face_term += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations;
  }
  for (const Edge& edge : P.edges()) {
    const QuadResult q =
        integrate_edge_deficit(g, edge, edge.patch.bar_alpha, nullptr, cfg);
    rep.per_edge.push_back({edge.patch.tag, q.value, q.error});
    rep.edge_term += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations;
  }
  const double norm = (n - 1) * unit_sphere_area(n);
  rep.total = (-rep.face_term + rep.edge_term) / norm;
  return rep;
}

namespace {

//! Angle deficit 2 pi - int kappa ds - sum of turning angles of the square
//! cross-section {max|x_a| = L} inside the slice plane, for a 2-d metric.
double square_slice_deficit(const MetricField& g2, double L,
                            const QuadConfig& cfg, QuadResult* accum) {
  // Counterclockwise boundary of [-L, L]^2: four affine segments.
  struct Seg {
    double start[2];
    double dir[2];
  };
  const Seg segs[4] = {
      {{-L, -L}, {2 * L, 0.0}},
      {{L, -L}, {0.0, 2 * L}},
      {{L, L}, {-2 * L, 0.0}},
      {{-L, L}, {0.0, -2 * L}},
  };
  double kappa_total = 0.0;
  const double lo[1] = {0.0}, hi[1] = {1.0};
  for (const Seg& s : segs) {
    Integrand f = [&](std::span<const double> u) {
      const double x[2] = {s.start[0] + u[0] * s.dir[0],
                           s.start[1] + u[0] * s.dir[1]};
      const std::span<const double> xs(x, 2);
      const std::span<const double> ds(s.dir, 2);
      const double kappa = geodesic_curvature(g2, xs, ds);
      const SymMat m = g2.value_at(xs);
      double speed2 = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) speed2 += m(i, j) * s.dir[i] * s.dir[j];
      return kappa * std::sqrt(speed2);
    };
    const QuadResult q = integrate_box(std::span<const double>(lo, 1),
                                       std::span<const double>(hi, 1), f, cfg);
    kappa_total += q.value;
    if (accum) *accum += q;
  }
  double turning_total = 0.0;
  for (int c = 0; c < 4; ++c) {
    const Seg& in = segs[c];
    const Seg& out = segs[(c + 1) % 4];
    const double corner[2] = {out.start[0], out.start[1]};
    turning_total += turning_angle(g2, std::span<const double>(corner, 2),
                                   std::span<const double>(in.dir, 2),
                                   std::span<const double>(out.dir, 2));
  }
  return 2.0 * kPi - kappa_total - turning_total;
}

}  // namespace

MassReport slice_mass_3d(const MetricField& g, double L,
                         const QuadConfig& cfg) {
  if (g.dimension() != 3) throw Error("slice_mass_3d expects n = 3");
  MassReport rep;
  rep.evaluator = "slice-mass";
  rep.n = 3;
  rep.params = g.params();
  rep.geometry_kind = "slices";
  rep.scale = L;
  {
    std::ostringstream os;
    os << "cube half-width L = " << L << ", 3 slicing directions";
    rep.geometry_desc = os.str();
  }

  const double lo[1] = {-L}, hi[1] = {L};
  double sum = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const MetricField g2param = g.restrict_to_hyperplane_param(k, "slice_t");
    Integrand deficit = [&](std::span<const double> t) {
      const MetricField g2 = g2param.with_params({{"slice_t", t[0]}});
      return square_slice_deficit(g2, L, cfg, nullptr);
    };
    const QuadResult q = integrate_box(std::span<const double>(lo, 1),
                                       std::span<const double>(hi, 1),
                                       deficit, cfg);
    rep.per_face.push_back({"axis-x" + std::to_string(k), q.value, q.error});
    sum += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations;
  }
  rep.face_term = sum;
  rep.total = sum / (8.0 * kPi);
  return rep;
}

double slice_quantity(const MetricField& g, int k_one_based, double t,
                      double L, const QuadConfig& cfg) {
  const int n = g.dimension();
  const MetricField induced = g.restrict_to_hyperplane(k_one_based, t);
  if (n - 1 == 2) {
    QuadResult dummy;
    return square_slice_deficit(induced, L, cfg, &dummy) / (2.0 * kPi);
  }
  return poly_mass(induced, Polytope::box(n - 1, L), cfg).total;
}

MassReport slice_mass_nd(const MetricField& g, double L,
                         const QuadConfig& cfg) {
  const int n = g.dimension();
  if (n < 4) throw Error("slice_mass_nd expects n >= 4");
  MassReport rep;
  rep.evaluator = "slice-mass";
  rep.n = n;
  rep.params = g.params();
  rep.geometry_kind = "slices";
  rep.scale = L;
  {
    std::ostringstream os;
    os << "cube half-width L = " << L << ", " << n << " slicing directions";
    rep.geometry_desc = os.str();
  }

  const double lo[1] = {-L}, hi[1] = {L};
  const Polytope slice_box = Polytope::box(n - 1, L);
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const MetricField gparam = g.restrict_to_hyperplane_param(k, "slice_t");
    Integrand mk = [&](std::span<const double> t) {
      const MetricField induced = gparam.with_params({{"slice_t", t[0]}});
      return poly_mass(induced, slice_box, cfg).total;
    };
    const QuadResult q = integrate_box(std::span<const double>(lo, 1),
                                       std::span<const double>(hi, 1), mk,
                                       cfg);
    rep.per_face.push_back({"axis-x" + std::to_string(k), q.value, q.error});
    sum += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations;
  }
  rep.face_term = sum;
  rep.total = unit_sphere_area(n - 1) / ((n - 1) * unit_sphere_area(n)) * sum;
  return rep;
}

StaticPotential StaticPotential::basis(int n, int index) {
  StaticPotential v;
  v.coeffs.assign(static_cast<std::size_t>(n + 1), 0.0);
  v.coeffs.at(static_cast<std::size_t>(index)) = 1.0;
  return v;
}

Expr StaticPotential::expr(int n) const {
  Expr e = Expr::constant(0.0, n);
  if (!coeffs.empty() && coeffs[0] != 0.0) {
    const Expr t =
        sqrt(Expr::constant(1.0, n) + pow(Expr::radial(n), 2));
    e = e + Expr::constant(coeffs[0], n) * t;
  }
  for (int i = 1; i < static_cast<int>(coeffs.size()); ++i)
    if (coeffs[static_cast<std::size_t>(i)] != 0.0)
      e = e + Expr::constant(coeffs[static_cast<std::size_t>(i)], n) *
                  Expr::variable(i - 1, n);
  return e;
}

namespace {

//! The mass-integrand 1-form applied to a vector:
//! U(V)(nu) = V (div h - d tr h)(nu) + (tr h) dV(nu) - h(grad V, nu).
double mass_form_U(const MetricAt& mbar, const SymTensorField::At& hat,
                   const Jet2& vjet, std::span<const double> nu) {
  const int n = mbar.n;
  const DivTrace dt = covariant_divergence(mbar, hat);
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += vjet.v * (dt.div[j] - dt.dtr[j]) * nu[j];
  for (int j = 0; j < n; ++j) s += dt.tr * vjet.g[j] * nu[j];
  // grad V = gbar^{kl} d_l V
  for (int j = 0; j < n; ++j) {
    double hx = 0.0;
    for (int k = 0; k < n; ++k) {
      double gv = 0.0;
      for (int l = 0; l < n; ++l) gv += mbar.inv(k, l) * vjet.g[l];
      hx += hat.val(j, k) * gv;
    }
    s -= hx * nu[j];
  }
  return s;
}

}  // namespace

MassReport ah_mass(const MetricField& g, const StaticPotential& V, double r,
                   const QuadConfig& cfg) {
  const int n = g.dimension();
  if (g.asym_type() != AsymType::AHHyperboloid)
    throw Error("ah_mass expects a hyperboloid-chart AH metric");
  MassReport rep;
  rep.evaluator = "ah-mass";
  rep.n = n;
  rep.params = g.params();
  rep.geometry_kind = "sphere";
  rep.scale = r;
  {
    std::ostringstream os;
    os << "coordinate sphere |z| = " << r << " (hyperbolic measure)";
    rep.geometry_desc = os.str();
  }

  const MetricField gbar = hyperboloid_metric(n);
  const SymTensorField h = g.perturbation();
  const Expr vexpr = V.expr(n);

  QuadResult total;
  total.converged = true;
  std::array<double, kMaxDim> lo{}, hi{};
  for (int d = 0; d < n - 1; ++d) {
    lo[d] = -1.0;
    hi[d] = 1.0;
  }
  for (const SphereChart& chart : sphere_charts(n, r)) {
    Integrand f = [&](std::span<const double> u) {
      const VecN x = chart.point(u);
      const auto xs = vec_span(x, n);
      const MetricAt mbar = gbar.at_first_order(xs);
      const SymTensorField::At hat = h.at_first_order(xs);
      const Jet1 v1 = vexpr.eval_jet1(xs);
      Jet2 vjet(n, v1.v);
      vjet.g = v1.g;
      // gbar-unit outward normal of the coordinate sphere.
      const UnitNormal nu = unit_normal(mbar, xs);
      // gbar measure on the sphere through the chart tangents.
      const std::vector<VecN> tang = chart.tangents(u);
      SymMat gam;
      gam.n = n - 1;
      for (int a = 0; a < n - 1; ++a)
        for (int b = a; b < n - 1; ++b) {
          double s = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              s += mbar.met(i, j) * tang[a][i] * tang[b][j];
          gam.at(a, b) = s;
        }
      const auto chol = cholesky(gam);
      if (!chol) throw GeometryError("degenerate sphere chart metric");
      const double measure = std::sqrt(det_from_cholesky(*chol, n - 1));
      return mass_form_U(mbar, hat, vjet, vec_span(nu.nu, n)) * measure;
    };
    total += integrate_box(std::span<const double>(lo.data(), n - 1),
                           std::span<const double>(hi.data(), n - 1), f, cfg);
  }
  rep.flux_term = total.value;
  rep.quad_error = total.error;
  rep.converged = total.converged;
  rep.evaluations = total.evaluations;
  rep.total = total.value;
  return rep;
}

AHMassVector ah_mass_vector(const MetricField& g, double r,
                            const QuadConfig& cfg) {
  const int n = g.dimension();
  AHMassVector v;
  v.radius = r;
  for (int i = 0; i <= n; ++i) {
    const MassReport rep = ah_mass(g, StaticPotential::basis(n, i), r, cfg);
    v.p.push_back(rep.total);
    v.errors.push_back(rep.quad_error);
  }
  return v;
}

MassReport ah_prism_mass(const MetricField& g_uhs, const Polytope& prism,
                         const QuadConfig& cfg) {
  const int n = g_uhs.dimension();
  if (g_uhs.asym_type() != AsymType::AHUpperHalfSpace)
    throw Error("ah_prism_mass expects a metric in upper-half-space coords");
  if (prism.dimension() != n) throw Error("prism/metric dimension mismatch");
  MassReport rep;
  rep.evaluator = "prism";
  rep.n = n;
  rep.params = g_uhs.params();
  rep.geometry_kind = "prism";
  {
    std::ostringstream os;
    os << prism.faces().size() << " faces in upper-half-space coordinates";
    rep.geometry_desc = os.str();
  }

  const MetricField gbar = upper_half_space_metric(n);
  const Expr vexpr = Expr::parse("1/x1", n);  // V = y_1^{-1}

  for (const Face& face : prism.faces()) {
    QuadResult q, q_gmeasure;
    q.converged = true;
    q_gmeasure.converged = true;
    for (const HypersurfacePatch& patch : face.patches) {
      auto integrand_with_measure = [&](bool g_measure) {
        return Integrand([&, g_measure](std::span<const double> u) {
          const VecN x = patch.point(u);
          const auto xs = vec_span(x, n);
          const MetricAt mbar = gbar.at_first_order(xs);
          const MetricAt mg = g_uhs.at_first_order(xs);
          const SurfaceGeometry sgbar = hypersurface_geometry(
              mbar, patch.dirs, {}, vec_span(patch.outward, n));
          const SurfaceGeometry sgg = hypersurface_geometry(
              mg, patch.dirs, {}, vec_span(patch.outward, n));
          const double V = 1.0 / x[0];
          // Hbar - H uses same-side normals; the quoted total takes the
          // gbar face measure, and the g-measure variant is reported so the
          // difference (higher order in h) stays observable.
          return V * (sgbar.mean_curvature - sgg.mean_curvature) *
                 (g_measure ? sgg.area_element : sgbar.area_element);
        });
      };
      q += integrate_domain(patch.domain, integrand_with_measure(false), cfg);
      q_gmeasure +=
          integrate_domain(patch.domain, integrand_with_measure(true), cfg);
    }
    rep.per_face.push_back({face.tag, q.value, q.error});
    rep.per_face.push_back(
        {face.tag + "|g-measure", q_gmeasure.value, q_gmeasure.error});
    rep.face_term += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations + q_gmeasure.evaluations;
  }

  for (const Edge& edge : prism.edges()) {
    const EdgePatch& ep = edge.patch;
    Integrand f = [&](std::span<const double> u) {
      const VecN x = ep.point(u);
      const auto xs = vec_span(x, n);
      const MetricAt mg = g_uhs.at_first_order(xs);
      const MetricAt mbar = gbar.at_first_order(xs);
      const UnitNormal n1 = unit_normal(mg, vec_span(ep.outward_a, n));
      const UnitNormal n2 = unit_normal(mg, vec_span(ep.outward_b, n));
      double inner = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          inner += mg.met(i, j) * n1.nu[i] * n2.nu[j];
      const double alpha = std::acos(std::clamp(-inner, -1.0, 1.0));
      const double V = 1.0 / x[0];
      return V * (alpha - kPi / 2.0) * induced_measure(mbar, ep.dirs);
    };
    const QuadResult q = integrate_domain(ep.domain, f, cfg);
    rep.per_edge.push_back({ep.tag, q.value, q.error});
    rep.edge_term += q.value;
    rep.quad_error += q.error;
    rep.converged = rep.converged && q.converged;
    rep.evaluations += q.evaluations;
  }

  rep.total = 2.0 * (rep.face_term + rep.edge_term);
  return rep;
}

namespace {

//! Divergence over (Sigma, gamma-bar) of the tangential field dual to
//! (V) h(nu-bar, .), evaluated pointwise from jets. V == nullptr means the
//! unweighted field X.
double tangential_divergence(const MetricField& gbar, const SymTensorField& h,
                             const HypersurfacePatch& sigma,
                             std::span<const double> u, const Expr* V) {
  const int n = sigma.n;
  const int k = n - 1;
  const VecN x = sigma.point(u);
  const auto xs = vec_span(x, n);
  const MetricAt mbar = gbar.at_first_order(xs);
  const SymTensorField::At hat = h.at_first_order(xs);
  const auto& T = sigma.dirs;
  const VecN& w = sigma.outward;

  // Induced metric and its tangential derivatives.
  SymMat gam;
  gam.n = k;
  std::array<std::array<double, kMaxSym>, kMaxDim> dgam{};
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += mbar.met(i, j) * T[a][i] * T[b][j];
      gam.at(a, b) = s;
      for (int c = 0; c < k; ++c) {
        double ds = 0.0;
        for (int p = 0; p < n; ++p)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              ds += T[c][p] * mbar.d(p, i, j) * T[a][i] * T[b][j];
        dgam[c][sym_index(a, b)] = ds;
      }
    }
  const auto chol = cholesky(gam);
  if (!chol) throw GeometryError("degenerate induced metric");
  const SymMat gaminv = spd_inverse(*chol, k);

  // Normal nu-bar and its tangential derivatives.
  double wn2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) wn2 += mbar.inv(i, j) * w[i] * w[j];
  const double wn = std::sqrt(wn2);
  VecN nu{};
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += mbar.inv(i, j) * w[j];
    nu[i] = s / wn;
  }
  // d_p |w| = (d_p gbar^{ab}) w_a w_b / (2 |w|)
  VecN dwn{};
  for (int p = 0; p < n; ++p) {
    double s = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s += mbar.dinv(p, a, b) * w[a] * w[b];
    dwn[p] = s / (2.0 * wn);
  }
  // dnu[c][i] = T_c^p d_p (gbar^{ij} w_j / |w|)
  std::array<VecN, kMaxDim> dnu{};
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int p = 0; p < n; ++p) {
        double raw = 0.0, gw = 0.0;
        for (int j = 0; j < n; ++j) {
          raw += mbar.dinv(p, i, j) * w[j];
          gw += mbar.inv(i, j) * w[j];
        }
        s += T[c][p] * (raw / wn - gw * dwn[p] / wn2);
      }
      dnu[c][i] = s;
    }

  // omega_b = (V) h(nu, T_b) and tangential derivatives.
  Jet1 vjet;
  if (V) vjet = V->eval_jet1(xs);
  std::array<double, kMaxDim> omega{};
  std::array<std::array<double, kMaxDim>, kMaxDim> domega{};
  for (int b = 0; b < k; ++b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += hat.val(i, j) * nu[i] * T[b][j];
    omega[b] = s;
    for (int c = 0; c < k; ++c) {
      double ds = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double dh = 0.0;
          for (int p = 0; p < n; ++p) dh += T[c][p] * hat.deriv(p, i, j);
          ds += dh * nu[i] * T[b][j] + hat.val(i, j) * dnu[c][i] * T[b][j];
        }
      domega[c][b] = ds;
    }
  }
  if (V) {
    // Product rule: d_c (V omega_b) = (T_c . dV) omega_b + V d_c omega_b.
    std::array<double, kMaxDim> dV{};
    for (int c = 0; c < k; ++c) {
      double s = 0.0;
      for (int p = 0; p < n; ++p) s += T[c][p] * vjet.g[p];
      dV[c] = s;
    }
    for (int c = 0; c < k; ++c)
      for (int b = 0; b < k; ++b)
        domega[c][b] = dV[c] * omega[b] + vjet.v * domega[c][b];
    for (int b = 0; b < k; ++b) omega[b] *= vjet.v;
  }

  // X^a = gam^{ab} omega_b; d_c X^a with d gam^{-1} = -ginv dgam ginv.
  std::array<double, kMaxDim> X{};
  for (int a = 0; a < k; ++a) {
    double s = 0.0;
    for (int b = 0; b < k; ++b) s += gaminv(a, b) * omega[b];
    X[a] = s;
  }
  double div = 0.0;
  for (int a = 0; a < k; ++a) {
    // d_a X^a
    double daXa = 0.0;
    for (int b = 0; b < k; ++b) {
      double dginv = 0.0;
      for (int aa = 0; aa < k; ++aa)
        for (int bb = 0; bb < k; ++bb)
          dginv -= gaminv(a, aa) * dgam[a][sym_index(aa, bb)] * gaminv(bb, b);
      daXa += dginv * omega[b] + gaminv(a, b) * domega[a][b];
    }
    div += daXa;
    // X^a d_a log sqrt(det gam) = X^a (1/2) gam^{bc} d_a gam_bc
    double dlog = 0.0;
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c)
        dlog += gaminv(b, c) * dgam[a][sym_index(b, c)];
    div += 0.5 * X[a] * dlog;
  }
  return div;
}

}  // namespace

LinearizationReport check_linearization(const MetricField& gbar,
                                        const SymTensorField& h_direction,
                                        const HypersurfacePatch& sigma,
                                        std::vector<double> eps_ladder,
                                        const QuadConfig& cfg,
                                        const Expr* weight) {
  const int n = gbar.dimension();
  LinearizationReport rep;
  rep.weighted = weight != nullptr;

  const SymTensorField h = h_direction.bind({});

  for (double eps : eps_ladder) {
    // Perturbed metric gbar + eps h as a metric field.
    std::vector<Expr> comps(static_cast<std::size_t>(n * (n + 1) / 2));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        comps[static_cast<std::size_t>(packed_index(n, i, j))] =
            gbar.component(i, j) +
            Expr::constant(eps, n) * h.component(i, j);
    const MetricField geps(n, comps, gbar.background(), gbar.asym_type(),
                           gbar.decay_rate(), gbar.params());

    Integrand f = [&](std::span<const double> u) {
      const VecN x = sigma.point(u);
      const auto xs = vec_span(x, n);
      const MetricAt mbar = gbar.at_first_order(xs);
      const MetricAt meps = geps.at_first_order(xs);
      const SymTensorField::At hat = h.at_first_order(xs);
      const SurfaceGeometry sbar = hypersurface_geometry(
          mbar, sigma.dirs, {}, vec_span(sigma.outward, n));
      const SurfaceGeometry seps = hypersurface_geometry(
          meps, sigma.dirs, {}, vec_span(sigma.outward, n));
      const int k = n - 1;

      // Restricted h, its induced trace, and <h, Abar>.
      SymMat hres;
      hres.n = k;
      for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b) {
          double s = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              s += hat.val(i, j) * sigma.dirs[a][i] * sigma.dirs[b][j];
          hres.at(a, b) = s;
        }
      double tr_h = 0.0, hA = 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          tr_h += sbar.induced_inv(a, b) * hres(a, b);
          for (int c = 0; c < k; ++c)
            for (int d = 0; d < k; ++d)
              hA += sbar.induced_inv(a, c) * sbar.induced_inv(b, d) *
                    hres(a, b) * sbar.second_form(c, d);
        }

      const double divX =
          tangential_divergence(gbar, h, sigma, u, weight) * eps;
      const DivTrace dt = covariant_divergence(mbar, hat);

      double residual;
      if (!weight) {
        // 2(H - Hbar) = (d tr h - div h)(nu) - div X - <h, Abar> + O(h^2)
        double first = 0.0;
        for (int j = 0; j < n; ++j)
          first += (dt.dtr[j] - dt.div[j]) * sbar.normal.nu[j];
        const double lhs =
            2.0 * (seps.mean_curvature - sbar.mean_curvature);
        const double rhs = eps * first - divX - eps * hA;
        residual = std::fabs(lhs - rhs);
      } else {
        // U(V)(nu) = 2V(Hbar - H) - div(V X) + (tr_gamma h) dV(nu)
        //            - V <Abar, h> + O(h^2)
        const Jet1 v1 = weight->eval_jet1(xs);
        Jet2 vjet(n, v1.v);
        vjet.g = v1.g;
        // Scale h by eps inside U(V).
        SymTensorField::At hat_eps = hat;
        for (auto& row : hat_eps.value.a) row *= eps;
        for (auto& row : hat_eps.d)
          for (auto& vv : row) vv *= eps;
        for (auto& row : hat_eps.dd)
          for (auto& vv : row) vv *= eps;
        const double lhs =
            mass_form_U(mbar, hat_eps, vjet, vec_span(sbar.normal.nu, n));
        double dVnu = 0.0;
        for (int j = 0; j < n; ++j) dVnu += vjet.g[j] * sbar.normal.nu[j];
        const double rhs =
            2.0 * vjet.v * (sbar.mean_curvature - seps.mean_curvature) -
            divX + eps * tr_h * dVnu - vjet.v * eps * hA;
        residual = std::fabs(lhs - rhs);
      }
      return residual * sbar.area_element;
    };
    const QuadResult q = integrate_domain(sigma.domain, f, cfg);
    rep.eps.push_back(eps);
    rep.residual.push_back(q.value);
  }
  rep.slope = fit_loglog_slope(rep.eps, rep.residual);
  return rep;
}

AFunctionalReport check_A_functional(const HypersurfacePatch& sigma,
                                     const SymTensorField& h,
                                     int samples_per_axis) {
  const int n = sigma.n;
  const MetricField gbar = upper_half_space_metric(n);
  const MetricField geuc = euclidean_metric(n);
  const SymTensorField hb = h.bind({});
  AFunctionalReport rep;

  const int k = n - 1;
  const int total = static_cast<int>(std::pow(samples_per_axis, k));
  for (int s = 0; s < total; ++s) {
    int rem = s;
    std::array<double, kMaxDim> u{};
    for (int a = 0; a < k; ++a) {
      const int ia = rem % samples_per_axis;
      rem /= samples_per_axis;
      u[a] = (ia + 0.5) / samples_per_axis;
      if (sigma.domain.kind == DomainKind::Box)
        u[a] = sigma.domain.lo[a] +
               u[a] * (sigma.domain.hi[a] - sigma.domain.lo[a]);
    }
    if (sigma.domain.kind == DomainKind::Simplex) {
      // Keep samples inside the simplex.
      double sum = 0.0;
      for (int a = 0; a < k; ++a) sum += u[a];
      if (sum >= 1.0)
        for (int a = 0; a < k; ++a) u[a] *= 0.9 / sum;
    }
    const VecN x = sigma.point(std::span<const double>(u.data(), k));
    const auto xs = vec_span(x, n);
    const MetricAt mbar = gbar.at(xs);
    const MetricAt meuc = geuc.at(xs);
    const SymTensorField::At hat = hb.at(xs);
    const SurfaceGeometry sbar =
        hypersurface_geometry(mbar, sigma.dirs, {}, vec_span(sigma.outward, n));
    const SurfaceGeometry seuc =
        hypersurface_geometry(meuc, sigma.dirs, {}, vec_span(sigma.outward, n));

    const double V = 1.0 / x[0];
    VecN dV{};
    dV[0] = -1.0 / (x[0] * x[0]);

    SymMat hres;
    hres.n = k;
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        double v = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            v += hat.val(i, j) * sigma.dirs[a][i] * sigma.dirs[b][j];
        hres.at(a, b) = v;
      }
    double tr_h = 0.0, hA = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        tr_h += sbar.induced_inv(a, b) * hres(a, b);
        for (int c = 0; c < k; ++c)
          for (int d = 0; d < k; ++d)
            hA += sbar.induced_inv(a, c) * sbar.induced_inv(b, d) *
                  hres(a, b) * sbar.second_form(c, d);
      }
    double dVnu = 0.0;
    for (int i = 0; i < n; ++i) dVnu += dV[i] * sbar.normal.nu[i];
    const double A = tr_h * dVnu - V * hA;
    rep.max_abs_A = std::max(rep.max_abs_A, std::fabs(A));

    // Umbilicity Abar = Hbar gamma-bar / (n-1) and the resulting reduction.
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b)
        rep.max_umbilic_residual = std::max(
            rep.max_umbilic_residual,
            std::fabs(sbar.second_form(a, b) -
                      sbar.mean_curvature * sbar.induced(a, b) / (n - 1)));
    const double reduction =
        (dVnu - sbar.mean_curvature * V / (n - 1)) * tr_h;
    rep.max_reduction_residual =
        std::max(rep.max_reduction_residual, std::fabs(A - reduction));

    // Conformal identity Abar = V A_E + (dV/dnu_E) gamma_E.
    double dVnuE = 0.0;
    for (int i = 0; i < n; ++i) dVnuE += dV[i] * seuc.normal.nu[i];
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b)
        rep.max_conformal_residual = std::max(
            rep.max_conformal_residual,
            std::fabs(sbar.second_form(a, b) -
                      (V * seuc.second_form(a, b) +
                       dVnuE * seuc.induced(a, b))));
    ++rep.samples;
  }
  return rep;
}

PositivityReport positivity_audit(const MetricField& g,
                                  const SequencePlan& seq,
                                  const QuadConfig& cfg) {
  PositivityReport rep;
  rep.all_pass = true;
  rep.min_scalar_curvature = std::numeric_limits<double>::infinity();

  // Spot-check the scalar curvature hypothesis on deterministic samples.
  std::mt19937 rng(20230517u);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double r_lo = seq.scales.front(), r_hi = seq.scales.back();
  for (int s = 0; s < 64; ++s) {
    VecN x{};
    double norm2 = 0.0;
    for (int i = 0; i < seq.n; ++i) {
      x[i] = unit(rng);
      norm2 += x[i] * x[i];
    }
    const double radius = r_lo + (r_hi - r_lo) * (s + 0.5) / 64.0;
    const double scale = radius / std::sqrt(std::max(norm2, 1e-12));
    for (int i = 0; i < seq.n; ++i) x[i] *= scale;
    try {
      const double R = scalar_curvature(g, vec_span(x, seq.n));
      rep.min_scalar_curvature = std::min(rep.min_scalar_curvature, R);
      if (R < -1e-6) ++rep.scalar_curvature_violations;
    } catch (const Error&) {
      // Point outside the metric's domain; skip.
    }
  }

  for (std::size_t i = 0; i < seq.size(); ++i) {
    const MassReport mr = poly_mass(g, seq.element(i), cfg);
    PositivityReport::El el;
    el.scale = seq.scales[i];
    el.combination = -mr.face_term + mr.edge_term;
    el.quad_error = mr.quad_error;
    el.pass = el.combination >= -el.quad_error;
    rep.all_pass = rep.all_pass && el.pass;
    rep.elements.push_back(el);
  }
  return rep;
}

}  // namespace polymass

#include "polymass/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "polymass/error.hpp"

namespace polymass {

UnitNormal unit_normal(const MetricAt& m, std::span<const double> w) {
  const int n = m.n;
  double norm2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) norm2 += m.inv(i, j) * w[i] * w[j];
  if (!(norm2 > 0.0)) throw GeometryError("degenerate surface normal");
  UnitNormal r;
  r.w_norm = std::sqrt(norm2);
  for (int i = 0; i < n; ++i) r.conormal[i] = w[i] / r.w_norm;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += m.inv(i, j) * r.conormal[j];
    r.nu[i] = s;
  }
  return r;
}

SurfaceGeometry hypersurface_geometry(const MetricAt& m,
                                      std::span<const VecN> tangents,
                                      std::span<const VecN> second_derivs,
                                      std::span<const double> w_outward) {
  const int n = m.n;
  const int k = static_cast<int>(tangents.size());
  SurfaceGeometry r;
  r.k = k;
  r.induced.n = k;
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s += m.met(i, j) * tangents[a][i] * tangents[b][j];
      r.induced.at(a, b) = s;
    }
  const auto chol = cholesky(r.induced);
  if (!chol) throw GeometryError("degenerate induced metric on patch");
  r.area_element = std::sqrt(det_from_cholesky(*chol, k));
  r.induced_inv = spd_inverse(*chol, k);

  r.normal = unit_normal(m, w_outward);

  r.second_form.n = k;
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double gamma_ij = 0.0;
          for (int p = 0; p < n; ++p)
            gamma_ij += r.normal.conormal[p] * m.christoffel(p, i, j);
          s += gamma_ij * tangents[a][i] * tangents[b][j];
        }
      if (!second_derivs.empty()) {
        const auto& dd = second_derivs[sym_index(a, b)];
        for (int p = 0; p < n; ++p) s += r.normal.conormal[p] * dd[p];
      }
      r.second_form.at(a, b) = -s;
    }
  double H = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      H += r.induced_inv(a, b) * r.second_form(a, b);
  r.mean_curvature = H;
  return r;
}

SurfaceGeometry second_fundamental_form(const MetricField& g,
                                        const HypersurfacePatch& S,
                                        std::span<const double> u) {
  const VecN x = S.point(u);
  const MetricAt m = g.at(std::span<const double>(x.data(), S.n));
  return hypersurface_geometry(m, S.dirs, {},
                               std::span<const double>(S.outward.data(), S.n));
}

double dihedral_angle(const MetricField& g, const EdgePatch& e,
                      std::span<const double> u) {
  const VecN x = e.point(u);
  const MetricAt m = g.at(std::span<const double>(x.data(), e.n));
  const UnitNormal n1 =
      unit_normal(m, std::span<const double>(e.outward_a.data(), e.n));
  const UnitNormal n2 =
      unit_normal(m, std::span<const double>(e.outward_b.data(), e.n));
  double inner = 0.0;
  for (int i = 0; i < e.n; ++i)
    for (int j = 0; j < e.n; ++j)
      inner += m.met(i, j) * n1.nu[i] * n2.nu[j];
  const double c = std::clamp(-inner, -1.0, 1.0);
  return std::acos(c);
}

namespace {

// d_p Gamma^m_kl from jet data.
double dgamma(const MetricAt& m, int p, int mm, int k, int l) {
  double s = 0.0;
  for (int a = 0; a < m.n; ++a) {
    s += m.dinv(p, mm, a) * (m.d(k, a, l) + m.d(l, a, k) - m.d(a, k, l));
    s += m.inv(mm, a) *
         (m.dd(p, k, a, l) + m.dd(p, l, a, k) - m.dd(p, a, k, l));
  }
  return 0.5 * s;
}

}  // namespace

double scalar_curvature_at(const MetricAt& m) {
  const int n = m.n;
  double R = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double term = 0.0;
      for (int l = 0; l < n; ++l) {
        term += dgamma(m, l, l, i, k) - dgamma(m, i, l, l, k);
        for (int p = 0; p < n; ++p)
          term += m.christoffel(l, l, p) * m.christoffel(p, i, k) -
                  m.christoffel(l, i, p) * m.christoffel(p, l, k);
      }
      R += m.inv(i, k) * term;
    }
  return R;
}

double scalar_curvature(const MetricField& g, std::span<const double> x) {
  return scalar_curvature_at(g.at(x));
}

double geodesic_curvature(const MetricField& g2, std::span<const double> x,
                          std::span<const double> dir) {
  if (g2.dimension() != 2)
    throw GeometryError("geodesic curvature needs a 2-dimensional metric");
  const double d0 = dir[0], d1 = dir[1];
  if (d0 == 0.0 && d1 == 0.0) throw GeometryError("degenerate tangent");
  const MetricAt m = g2.at(x);
  // Leftward Euclidean normal covector: annihilates dir, positive on the
  // +90-degree rotation of dir.
  const double w[2] = {-d1, d0};
  const UnitNormal nrm = unit_normal(m, std::span<const double>(w, 2));
  double acc[2] = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        s += m.christoffel(k, i, j) * dir[i] * dir[j];
    acc[k] = s;
  }
  double num = 0.0, speed2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      num += m.met(i, j) * acc[i] * nrm.nu[j];
      speed2 += m.met(i, j) * dir[i] * dir[j];
    }
  return num / speed2;
}

double turning_angle(const MetricField& g2, std::span<const double> x,
                     std::span<const double> t_in,
                     std::span<const double> t_out) {
  if ((t_in[0] == 0.0 && t_in[1] == 0.0) ||
      (t_out[0] == 0.0 && t_out[1] == 0.0))
    throw GeometryError("zero tangent in turning angle");
  const SymMat m = g2.value_at(x);
  auto ip = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s += m(i, j) * a[i] * b[j];
    return s;
  };
  const double c =
      ip(t_in, t_out) / std::sqrt(ip(t_in, t_in) * ip(t_out, t_out));
  const double angle = std::acos(std::clamp(c, -1.0, 1.0));
  const double orient = t_in[0] * t_out[1] - t_in[1] * t_out[0];
  return orient < 0.0 ? -angle : angle;
}

DivTrace covariant_divergence(const MetricAt& gbar,
                              const SymTensorField::At& h) {
  const int n = gbar.n;
  DivTrace r;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double cov = h.deriv(i, k, j);
        for (int mm = 0; mm < n; ++mm)
          cov -= gbar.christoffel(mm, i, k) * h.val(mm, j) +
                 gbar.christoffel(mm, i, j) * h.val(k, mm);
        s += gbar.inv(i, k) * cov;
      }
    r.div[j] = s;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r.tr += gbar.inv(i, j) * h.val(i, j);
  for (int p = 0; p < n; ++p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        s += gbar.dinv(p, i, j) * h.val(i, j) +
             gbar.inv(i, j) * h.deriv(p, i, j);
    r.dtr[p] = s;
  }
  return r;
}

double unit_sphere_area(int n) {
  // 2 pi^{n/2} / Gamma(n/2) with the half-integer Gamma values in closed form.
  double gamma_half;  // Gamma(n/2)
  if (n % 2 == 0) {
    gamma_half = 1.0;
    for (int k = 1; k < n / 2; ++k) gamma_half *= k;
  } else {
    gamma_half = std::sqrt(std::numbers::pi);
    for (int k = 1; k <= n / 2; ++k)
      gamma_half *= (2.0 * k - 1.0) / 2.0;
  }
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / gamma_half;
}

}  // namespace polymass

#pragma once

#include <span>
#include <string>
#include <vector>

#include "polymass/linalg.hpp"

namespace polymass {

//! Parameter domain of a patch: an axis-aligned box or the unit simplex
//! {u_a >= 0, sum u_a <= 1}. Simplex domains are integrated through a
//! collapsed (Duffy) map, so quadrature nodes stay in the open interior.
enum class DomainKind { Box, Simplex };

struct PatchDomain {
  DomainKind kind = DomainKind::Box;
  int dim = 0;
  VecN lo{};
  VecN hi{};

  static PatchDomain box(std::span<const double> lo_in,
                         std::span<const double> hi_in) {
    PatchDomain d;
    d.kind = DomainKind::Box;
    d.dim = static_cast<int>(lo_in.size());
    for (int i = 0; i < d.dim; ++i) {
      d.lo[i] = lo_in[i];
      d.hi[i] = hi_in[i];
    }
    return d;
  }
  static PatchDomain unit_simplex(int dim) {
    PatchDomain d;
    d.kind = DomainKind::Simplex;
    d.dim = dim;
    for (int i = 0; i < dim; ++i) {
      d.lo[i] = 0.0;
      d.hi[i] = 1.0;
    }
    return d;
  }
};

//! Affine codimension-one patch x(u) = base + sum_a u_a dir_a with a fixed
//! Euclidean outward conormal. Direction vectors must stay linearly
//! independent; the parametrization is injective on the domain.
struct HypersurfacePatch {
  int n = 0;                  // ambient dimension
  VecN base{};
  std::vector<VecN> dirs;     // n-1 direction vectors
  PatchDomain domain;
  VecN outward{};             // unit Euclidean outward normal (= conormal)
  std::string tag;

  VecN point(std::span<const double> u) const {
    VecN x = base;
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (int i = 0; i < n; ++i) x[i] += u[a] * dirs[a][i];
    return x;
  }
};

//! Affine codimension-two patch along which two faces meet. Stores the
//! Euclidean outward normals of both adjacent faces and the Euclidean
//! dihedral angle between them.
struct EdgePatch {
  int n = 0;
  VecN base{};
  std::vector<VecN> dirs;  // n-2 direction vectors
  PatchDomain domain;
  int face_a = -1;         // indices into the owning polytope's face list
  int face_b = -1;
  VecN outward_a{};
  VecN outward_b{};
  double bar_alpha = 0.0;  // Euclidean dihedral angle
  std::string tag;

  VecN point(std::span<const double> u) const {
    VecN x = base;
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (int i = 0; i < n; ++i) x[i] += u[a] * dirs[a][i];
    return x;
  }
};

}  // namespace polymass

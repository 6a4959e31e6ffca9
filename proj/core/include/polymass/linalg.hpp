#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>

#include "polymass/jet.hpp"

namespace polymass {

inline constexpr int kMaxSym = kMaxDim * (kMaxDim + 1) / 2;

//! Packed index of (i, j), i <= j, into a length-n(n+1)/2 vector (row-major
//! upper triangle for dimension n). Distinct from sym_index, which packs
//! into the fixed kMaxDim-sized arrays.
constexpr int packed_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

using VecN = std::array<double, kMaxDim>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) {
  return std::sqrt(dot(a, a));
}

//! Dense symmetric matrix with runtime dimension n <= kMaxDim,
//! stored as a packed upper triangle.
struct SymMat {
  int n = 0;
  std::array<double, kMaxSym> a{};

  double operator()(int i, int j) const { return a[sym_index(i, j)]; }
  double& at(int i, int j) { return a[sym_index(i, j)]; }
};

//! Cholesky factorization; empty when the matrix is not positive definite.
inline std::optional<std::array<double, kMaxDim * kMaxDim>> cholesky(
    const SymMat& m) {
  std::array<double, kMaxDim * kMaxDim> L{};
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= L[i * kMaxDim + k] * L[j * kMaxDim + k];
      if (i == j) {
        if (s <= 0.0) return std::nullopt;
        L[i * kMaxDim + i] = std::sqrt(s);
      } else {
        L[i * kMaxDim + j] = s / L[j * kMaxDim + j];
      }
    }
  }
  return L;
}

inline double det_from_cholesky(
    const std::array<double, kMaxDim * kMaxDim>& L, int n) {
  double d = 1.0;
  for (int i = 0; i < n; ++i) d *= L[i * kMaxDim + i];
  return d * d;
}

//! Inverse of a symmetric positive definite matrix via its Cholesky factor.
inline SymMat spd_inverse(const std::array<double, kMaxDim * kMaxDim>& L,
                          int n) {
  // Solve L L^T X = I column by column.
  SymMat inv;
  inv.n = n;
  for (int c = 0; c < n; ++c) {
    std::array<double, kMaxDim> y{};
    for (int i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) s -= L[i * kMaxDim + k] * y[k];
      y[i] = s / L[i * kMaxDim + i];
    }
    std::array<double, kMaxDim> x{};
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k) s -= L[k * kMaxDim + i] * x[k];
      x[i] = s / L[i * kMaxDim + i];
    }
    for (int rr = 0; rr <= c; ++rr) inv.at(rr, c) = x[rr];
  }
  return inv;
}

//! Determinant of a general square matrix (rows given as vectors), used for
//! orientation checks; Gaussian elimination with partial pivoting.
inline double det_general(std::span<const VecN> rows, int n) {
  std::array<std::array<double, kMaxDim>, kMaxDim> m{};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = rows[i][j];
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int rr = c + 1; rr < n; ++rr)
      if (std::fabs(m[rr][c]) > std::fabs(m[piv][c])) piv = rr;
    if (m[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (int rr = c + 1; rr < n; ++rr) {
      const double f = m[rr][c] / m[c][c];
      for (int j = c; j < n; ++j) m[rr][j] -= f * m[c][j];
    }
  }
  return det;
}

}  // namespace polymass

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

namespace polymass {

//! Maximum ambient dimension supported by the fixed-size jet carrier.
inline constexpr int kMaxDim = 6;
inline constexpr int kMaxHess = kMaxDim * (kMaxDim + 1) / 2;

//! Packed index of the (i,j) entry, i <= j, of a symmetric matrix stored
//! as its upper triangle in row-major order.
constexpr int sym_index(int i, int j) {
  if (i > j) std::swap(i, j);
  return i * (2 * kMaxDim - i - 1) / 2 + j;
}

//! Second-order jet: a value together with its exact gradient and Hessian
//! with respect to n coordinates. The algebra below implements forward-mode
//! differentiation, so evaluating an expression on seeded jets yields
//! machine-precision first and second derivatives.
//!
//! The Hessian is stored as the packed upper triangle and is therefore
//! symmetric by construction.
struct Jet2 {
  int n = 0;
  double v = 0.0;
  std::array<double, kMaxDim> g{};
  std::array<double, kMaxHess> h{};

  Jet2() = default;
  Jet2(int dims, double value) : n(dims), v(value) {}

  //! Seed for the i-th coordinate variable (0-based): value x, unit gradient.
  static Jet2 variable(int dims, int i, double x) {
    Jet2 j(dims, x);
    j.g[static_cast<std::size_t>(i)] = 1.0;
    return j;
  }
  static Jet2 constant(int dims, double c) { return Jet2(dims, c); }

  double grad(int i) const { return g[static_cast<std::size_t>(i)]; }
  double hess(int i, int j) const {
    return h[static_cast<std::size_t>(sym_index(i, j))];
  }
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r(a.n, a.v + b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int k = 0; k < kMaxHess; ++k) r.h[k] = a.h[k] + b.h[k];
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r(a.n, a.v - b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] - b.g[i];
  for (int k = 0; k < kMaxHess; ++k) r.h[k] = a.h[k] - b.h[k];
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r(a.n, -a.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = -a.g[i];
  for (int k = 0; k < kMaxHess; ++k) r.h[k] = -a.h[k];
  return r;
}

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r(a.n, a.v * b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < a.n; ++i)
    for (int j = i; j < a.n; ++j) {
      const int k = sym_index(i, j);
      r.h[k] = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
    }
  return r;
}

inline Jet2 operator*(double c, const Jet2& a) {
  Jet2 r(a.n, c * a.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = c * a.g[i];
  for (int k = 0; k < kMaxHess; ++k) r.h[k] = c * a.h[k];
  return r;
}
inline Jet2 operator*(const Jet2& a, double c) { return c * a; }

inline Jet2 operator+(const Jet2& a, double c) {
  Jet2 r = a;
  r.v += c;
  return r;
}
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }

//! Chain rule for a scalar function applied to a jet:
//!   hess(phi(f)) = phi'*hess(f) + phi''*grad(f) grad(f)^T.
inline Jet2 chain(const Jet2& f, double value, double d1, double d2) {
  Jet2 r(f.n, value);
  for (int i = 0; i < f.n; ++i) r.g[i] = d1 * f.g[i];
  for (int i = 0; i < f.n; ++i)
    for (int j = i; j < f.n; ++j) {
      const int k = sym_index(i, j);
      r.h[k] = d1 * f.h[k] + d2 * f.g[i] * f.g[j];
    }
  return r;
}

inline Jet2 reciprocal(const Jet2& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
  return a * reciprocal(b);
}
inline Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }
inline Jet2 operator/(double c, const Jet2& a) { return c * reciprocal(a); }

//! Integer power by repeated multiplication; exact for nonpositive bases.
inline Jet2 pow_int(const Jet2& a, long long e) {
  if (e == 0) return Jet2::constant(a.n, 1.0);
  const bool neg = e < 0;
  unsigned long long k = neg ? static_cast<unsigned long long>(-e)
                             : static_cast<unsigned long long>(e);
  Jet2 acc = Jet2::constant(a.n, 1.0);
  Jet2 base = a;
  while (k > 0) {
    if (k & 1ull) acc = acc * base;
    base = base * base;
    k >>= 1;
  }
  if (neg) return reciprocal(acc);
  return acc;
}

inline Jet2 sqrt(const Jet2& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet2 log(const Jet2& a) {
  return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}
inline Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, s, c, -s);
}
inline Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, c, -s, -c);
}
inline Jet2 tan(const Jet2& a) {
  const double t = std::tan(a.v);
  const double d = 1.0 + t * t;
  return chain(a, t, d, 2.0 * t * d);
}
inline Jet2 atan(const Jet2& a) {
  const double d = 1.0 / (1.0 + a.v * a.v);
  return chain(a, std::atan(a.v), d, -2.0 * a.v * d * d);
}
inline Jet2 abs(const Jet2& a) {
  const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
  return chain(a, std::fabs(a.v), s, 0.0);
}

//! First-order jet: value and gradient only. Same algebra as Jet2 without
//! the Hessian bookkeeping; used on evaluation paths that only need first
//! derivatives (surface geometry, flux integrands, measures).
struct Jet1 {
  int n = 0;
  double v = 0.0;
  std::array<double, kMaxDim> g{};

  Jet1() = default;
  Jet1(int dims, double value) : n(dims), v(value) {}
  static Jet1 variable(int dims, int i, double x) {
    Jet1 j(dims, x);
    j.g[static_cast<std::size_t>(i)] = 1.0;
    return j;
  }
  static Jet1 constant(int dims, double c) { return Jet1(dims, c); }
  double grad(int i) const { return g[static_cast<std::size_t>(i)]; }
};

inline Jet1 operator+(const Jet1& a, const Jet1& b) {
  Jet1 r(a.n, a.v + b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] + b.g[i];
  return r;
}
inline Jet1 operator-(const Jet1& a, const Jet1& b) {
  Jet1 r(a.n, a.v - b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] - b.g[i];
  return r;
}
inline Jet1 operator-(const Jet1& a) {
  Jet1 r(a.n, -a.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = -a.g[i];
  return r;
}
inline Jet1 operator*(const Jet1& a, const Jet1& b) {
  Jet1 r(a.n, a.v * b.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  return r;
}
inline Jet1 operator*(double c, const Jet1& a) {
  Jet1 r(a.n, c * a.v);
  for (int i = 0; i < a.n; ++i) r.g[i] = c * a.g[i];
  return r;
}
inline Jet1 operator*(const Jet1& a, double c) { return c * a; }
inline Jet1 operator+(const Jet1& a, double c) {
  Jet1 r = a;
  r.v += c;
  return r;
}
inline Jet1 operator+(double c, const Jet1& a) { return a + c; }
inline Jet1 operator-(const Jet1& a, double c) { return a + (-c); }
inline Jet1 operator-(double c, const Jet1& a) { return (-a) + c; }

inline Jet1 chain(const Jet1& f, double value, double d1, double /*d2*/) {
  Jet1 r(f.n, value);
  for (int i = 0; i < f.n; ++i) r.g[i] = d1 * f.g[i];
  return r;
}
inline Jet1 reciprocal(const Jet1& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 0.0);
}
inline Jet1 operator/(const Jet1& a, const Jet1& b) {
  return a * reciprocal(b);
}
inline Jet1 operator/(const Jet1& a, double c) { return a * (1.0 / c); }
inline Jet1 operator/(double c, const Jet1& a) { return c * reciprocal(a); }

inline Jet1 pow_int(const Jet1& a, long long e) {
  if (e == 0) return Jet1::constant(a.n, 1.0);
  const bool neg = e < 0;
  unsigned long long k = neg ? static_cast<unsigned long long>(-e)
                             : static_cast<unsigned long long>(e);
  Jet1 acc = Jet1::constant(a.n, 1.0);
  Jet1 base = a;
  while (k > 0) {
    if (k & 1ull) acc = acc * base;
    base = base * base;
    k >>= 1;
  }
  if (neg) return reciprocal(acc);
  return acc;
}

inline Jet1 sqrt(const Jet1& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, 0.0);
}
inline Jet1 exp(const Jet1& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, 0.0);
}
inline Jet1 log(const Jet1& a) { return chain(a, std::log(a.v), 1.0 / a.v, 0.0); }
inline Jet1 sin(const Jet1& a) {
  return chain(a, std::sin(a.v), std::cos(a.v), 0.0);
}
inline Jet1 cos(const Jet1& a) {
  return chain(a, std::cos(a.v), -std::sin(a.v), 0.0);
}
inline Jet1 tan(const Jet1& a) {
  const double t = std::tan(a.v);
  return chain(a, t, 1.0 + t * t, 0.0);
}
inline Jet1 atan(const Jet1& a) {
  return chain(a, std::atan(a.v), 1.0 / (1.0 + a.v * a.v), 0.0);
}
inline Jet1 abs(const Jet1& a) {
  const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
  return chain(a, std::fabs(a.v), s, 0.0);
}

}  // namespace polymass

#pragma once

// Test-only oracles, kept independent of the library's evaluation paths:
// a direct recursive differentiator over the expression tree and central
// finite differences. Both exist solely to cross-check the jet algebra.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "polymass/expr.hpp"

namespace oracles {

struct Deriv2 {
  double v = 0.0;
  std::array<double, polymass::kMaxDim> g{};
  std::array<std::array<double, polymass::kMaxDim>, polymass::kMaxDim> h{};
};

//! Direct recursive differentiation with explicit calculus rules; no dual
//! numbers involved.
inline Deriv2 symbolic_eval(const polymass::ExprNode& node,
                            std::span<const double> x,
                            const polymass::ParamMap& params) {
  using polymass::NodeKind;
  const int n = static_cast<int>(x.size());
  Deriv2 r;
  auto scalar = [&](double v) {
    Deriv2 s;
    s.v = v;
    return s;
  };
  switch (node.kind) {
    case NodeKind::Constant:
      return scalar(node.value);
    case NodeKind::Parameter:
      return scalar(params.at(node.name));
    case NodeKind::Variable: {
      Deriv2 s = scalar(x[node.index]);
      s.g[node.index] = 1.0;
      return s;
    }
    case NodeKind::Radial: {
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
      const double rr = std::sqrt(r2);
      Deriv2 s = scalar(rr);
      for (int i = 0; i < n; ++i) s.g[i] = x[i] / rr;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s.h[i][j] = ((i == j ? 1.0 : 0.0) - x[i] * x[j] / r2) / rr;
      return s;
    }
    case NodeKind::Add: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      Deriv2 b = symbolic_eval(*node.args[1], x, params);
      Deriv2 s = scalar(a.v + b.v);
      for (int i = 0; i < n; ++i) s.g[i] = a.g[i] + b.g[i];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s.h[i][j] = a.h[i][j] + b.h[i][j];
      return s;
    }
    case NodeKind::Sub: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      Deriv2 b = symbolic_eval(*node.args[1], x, params);
      Deriv2 s = scalar(a.v - b.v);
      for (int i = 0; i < n; ++i) s.g[i] = a.g[i] - b.g[i];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s.h[i][j] = a.h[i][j] - b.h[i][j];
      return s;
    }
    case NodeKind::Neg: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      Deriv2 s = scalar(-a.v);
      for (int i = 0; i < n; ++i) s.g[i] = -a.g[i];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s.h[i][j] = -a.h[i][j];
      return s;
    }
    case NodeKind::Mul: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      Deriv2 b = symbolic_eval(*node.args[1], x, params);
      Deriv2 s = scalar(a.v * b.v);
      for (int i = 0; i < n; ++i) s.g[i] = a.g[i] * b.v + a.v * b.g[i];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s.h[i][j] = a.h[i][j] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] +
                      a.v * b.h[i][j];
      return s;
    }
    case NodeKind::Div: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      Deriv2 b = symbolic_eval(*node.args[1], x, params);
      Deriv2 s = scalar(a.v / b.v);
      // quotient rule, with the Hessian of f/g expanded explicitly
      const double inv = 1.0 / b.v;
      for (int i = 0; i < n; ++i)
        s.g[i] = (a.g[i] - s.v * b.g[i]) * inv;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s.h[i][j] = (a.h[i][j] - s.g[i] * b.g[j] - s.g[j] * b.g[i] -
                       s.v * b.h[i][j]) *
                      inv;
      return s;
    }
    case NodeKind::PowInt:
    case NodeKind::Pow:
    case NodeKind::Call: {
      Deriv2 a = symbolic_eval(*node.args[0], x, params);
      double f = 0.0, d1 = 0.0, d2 = 0.0;  // f(a), f'(a), f''(a)
      if (node.kind == NodeKind::PowInt) {
        const double e = static_cast<double>(node.int_exp);
        f = std::pow(a.v, e);
        d1 = e * std::pow(a.v, e - 1.0);
        d2 = e * (e - 1.0) * std::pow(a.v, e - 2.0);
      } else if (node.kind == NodeKind::Pow) {
        Deriv2 b = symbolic_eval(*node.args[1], x, params);
        // general a^b via exp(b log a); cross terms assembled directly
        const double val = std::pow(a.v, b.v);
        Deriv2 s = scalar(val);
        const double la = std::log(a.v);
        for (int i = 0; i < n; ++i)
          s.g[i] = val * (b.g[i] * la + b.v * a.g[i] / a.v);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double ti = b.g[i] * la + b.v * a.g[i] / a.v;
            const double tj = b.g[j] * la + b.v * a.g[j] / a.v;
            const double tij = b.h[i][j] * la + b.g[i] * a.g[j] / a.v +
                               b.g[j] * a.g[i] / a.v +
                               b.v * (a.h[i][j] / a.v -
                                      a.g[i] * a.g[j] / (a.v * a.v));
            s.h[i][j] = val * (ti * tj + tij);
          }
        return s;
      } else {
        switch (node.func) {
          case polymass::Func::Sqrt:
            f = std::sqrt(a.v);
            d1 = 0.5 / f;
            d2 = -0.25 / (f * a.v);
            break;
          case polymass::Func::Exp:
            f = std::exp(a.v);
            d1 = d2 = f;
            break;
          case polymass::Func::Log:
            f = std::log(a.v);
            d1 = 1.0 / a.v;
            d2 = -1.0 / (a.v * a.v);
            break;
          case polymass::Func::Sin:
            f = std::sin(a.v);
            d1 = std::cos(a.v);
            d2 = -f;
            break;
          case polymass::Func::Cos:
            f = std::cos(a.v);
            d1 = -std::sin(a.v);
            d2 = -f;
            break;
          case polymass::Func::Tan:
            f = std::tan(a.v);
            d1 = 1.0 + f * f;
            d2 = 2.0 * f * d1;
            break;
          case polymass::Func::Atan:
            f = std::atan(a.v);
            d1 = 1.0 / (1.0 + a.v * a.v);
            d2 = -2.0 * a.v * d1 * d1;
            break;
          case polymass::Func::Abs:
            f = std::fabs(a.v);
            d1 = a.v >= 0.0 ? 1.0 : -1.0;
            d2 = 0.0;
            break;
        }
      }
      Deriv2 s = scalar(f);
      for (int i = 0; i < n; ++i) s.g[i] = d1 * a.g[i];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s.h[i][j] = d1 * a.h[i][j] + d2 * a.g[i] * a.g[j];
      return s;
    }
  }
  return r;
}

inline Deriv2 symbolic_eval(const polymass::Expr& e, std::span<const double> x,
                            const polymass::ParamMap& params = {}) {
  return symbolic_eval(e.root(), x, params);
}

//! Central finite differences of a scalar field.
inline std::vector<double> fd_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double step = 1e-5) {
  const int n = static_cast<int>(x.size());
  std::vector<double> g(static_cast<std::size_t>(n));
  std::vector<double> p(x.begin(), x.end());
  for (int i = 0; i < n; ++i) {
    p[i] = x[i] + step;
    const double up = f(p);
    p[i] = x[i] - step;
    const double dn = f(p);
    p[i] = x[i];
    g[static_cast<std::size_t>(i)] = (up - dn) / (2.0 * step);
  }
  return g;
}

inline double fd_second(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> x, int i, int j,
                        double step = 1e-4) {
  std::vector<double> p(x.begin(), x.end());
  auto at = [&](double di, double dj) {
    p[i] = x[i] + di;
    p[j] += dj;
    const double v = f(p);
    p[i] = x[i];
    p[j] = x[j];
    return v;
  };
  if (i == j)
    return (at(step, 0) - 2.0 * f(x) + at(-step, 0)) / (step * step);
  return (at(step, step) - at(step, -step) - at(-step, step) +
          at(-step, -step)) /
         (4.0 * step * step);
}

//! Deterministic random polynomial of degree <= 4 in n variables.
inline std::string random_polynomial(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> terms(2, 5);
  std::uniform_int_distribution<int> deg(0, 2);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::string s;
  const int t = terms(rng);
  for (int k = 0; k < t; ++k) {
    double c = coef(rng);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", c);
    std::string term = buf;
    int total_deg = 0;
    for (int i = 0; i < n && total_deg < 4; ++i) {
      const int d = deg(rng);
      if (d == 0) continue;
      term += "*x" + std::to_string(i + 1);
      if (d > 1) term += "^" + std::to_string(d);
      total_deg += d;
    }
    s += (k ? " + " : "") + term;
  }
  return s;
}

}  // namespace oracles

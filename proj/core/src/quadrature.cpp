#include "polymass/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "polymass/error.hpp"

namespace polymass {

namespace {

GaussRule compute_gauss(int order) {
  GaussRule r;
  r.nodes.resize(order);
  r.weights.resize(order);
  // Newton iteration on Legendre polynomials, symmetric roots.
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.nodes[i] = -x;
    r.nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    r.weights[i] = w;
    r.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) r.nodes[order / 2] = 0.0;
  return r;
}

std::mutex g_rule_mutex;
std::map<int, GaussRule> g_rules;

struct Kahan {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

//! Evaluate one panel with a tensor-product rule in fixed node order.
double panel_sum(std::span<const double> lo, std::span<const double> hi,
                 std::span<const long long> panel_index, long long panels,
                 const GaussRule& rule, const Integrand& f) {
  const int dim = static_cast<int>(lo.size());
  const int q = static_cast<int>(rule.nodes.size());
  std::array<double, kMaxDim> a{}, half{};
  double jac = 1.0;
  for (int d = 0; d < dim; ++d) {
    const double w = (hi[d] - lo[d]) / static_cast<double>(panels);
    a[d] = lo[d] + w * static_cast<double>(panel_index[d]);
    half[d] = 0.5 * w;
    jac *= half[d];
  }
  long long total = 1;
  for (int d = 0; d < dim; ++d) total *= q;
  Kahan acc;
  std::array<double, kMaxDim> u{};
  for (long long flat = 0; flat < total; ++flat) {
    long long rem = flat;
    double weight = 1.0;
    for (int d = dim - 1; d >= 0; --d) {
      const int ni = static_cast<int>(rem % q);
      rem /= q;
      u[d] = a[d] + half[d] * (1.0 + rule.nodes[ni]);
      weight *= rule.weights[ni];
    }
    const double v = f(std::span<const double>(u.data(), dim));
    if (std::isnan(v)) throw QuadratureError("integrand returned NaN");
    acc.add(weight * v);
  }
  return acc.sum * jac;
}

double level_estimate(std::span<const double> lo, std::span<const double> hi,
                      long long panels, const GaussRule& rule,
                      const Integrand& f, int workers, long long* evals) {
  const int dim = static_cast<int>(lo.size());
  long long count = 1;
  for (int d = 0; d < dim; ++d) count *= panels;
  long long per_panel = 1;
  for (int d = 0; d < dim; ++d) per_panel *= rule.nodes.size();
  *evals += count * per_panel;

  std::vector<double> sums(static_cast<std::size_t>(count));
  auto run = [&](long long begin, long long end) {
    std::array<long long, kMaxDim> idx{};
    for (long long p = begin; p < end; ++p) {
      long long rem = p;
      for (int d = dim - 1; d >= 0; --d) {
        idx[d] = rem % panels;
        rem /= panels;
      }
      sums[static_cast<std::size_t>(p)] =
          panel_sum(lo, hi, std::span<const long long>(idx.data(), dim),
                    panels, rule, f);
    }
  };
  if (workers > 1 && count > 1) {
    const int w = static_cast<int>(std::min<long long>(workers, count));
    std::vector<std::thread> pool;
    const long long chunk = (count + w - 1) / w;
    std::exception_ptr err;
    std::mutex err_mutex;
    for (int t = 0; t < w; ++t) {
      const long long b = t * chunk;
      const long long e = std::min(count, b + chunk);
      pool.emplace_back([&, b, e] {
        try {
          run(b, e);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  } else {
    run(0, count);
  }
  // Deterministic merge: compensated summation in lexicographic panel order.
  Kahan acc;
  for (double s : sums) acc.add(s);
  return acc.sum;
}

}  // namespace

const GaussRule& gauss_rule(int order) {
  if (order < 1) throw QuadratureError("Gauss order must be positive");
  std::lock_guard<std::mutex> lock(g_rule_mutex);
  auto it = g_rules.find(order);
  if (it == g_rules.end()) it = g_rules.emplace(order, compute_gauss(order)).first;
  return it->second;
}

QuadResult integrate_box(std::span<const double> lo,
                         std::span<const double> hi, const Integrand& f,
                         const QuadConfig& cfg) {
  const int dim = static_cast<int>(lo.size());
  if (dim == 0) {
    // Zero-dimensional domain: the integral is the single point value.
    QuadResult r;
    r.value = f({});
    r.converged = true;
    r.evaluations = 1;
    return r;
  }
  const GaussRule& rule = gauss_rule(cfg.order);
  QuadResult r;
  double prev = 0.0;
  long long panels = 1;
  for (int level = 0; level <= cfg.max_levels; ++level) {
    const double est =
        level_estimate(lo, hi, panels, rule, f, cfg.workers, &r.evaluations);
    r.levels = level;
    if (level > 0) {
      r.error = std::fabs(est - prev);
      r.value = est;
      if (r.error <= std::max(cfg.rtol * std::fabs(est), cfg.atol)) {
        r.converged = true;
        return r;
      }
    } else {
      r.value = est;
    }
    prev = est;
    panels *= 2;
  }
  return r;  // best value, converged stays false
}

QuadResult integrate_domain(const PatchDomain& domain, const Integrand& f,
                            const QuadConfig& cfg) {
  if (domain.kind == DomainKind::Box) {
    return integrate_box(
        std::span<const double>(domain.lo.data(), domain.dim),
        std::span<const double>(domain.hi.data(), domain.dim), f, cfg);
  }
  if (domain.dim != 2)
    throw QuadratureError("simplex domains supported in 2 parameters only");
  // Collapsed map (s, t) in [0,1]^2 -> (u1, u2) = (s(1-t), st), |J| = s.
  const double lo[2] = {0.0, 0.0};
  const double hi[2] = {1.0, 1.0};
  Integrand g = [&f](std::span<const double> st) {
    const double s = st[0], t = st[1];
    const double u[2] = {s * (1.0 - t), s * t};
    return s * f(std::span<const double>(u, 2));
  };
  return integrate_box(std::span<const double>(lo, 2),
                       std::span<const double>(hi, 2), g, cfg);
}

VecN SphereChart::point(std::span<const double> u) const {
  VecN w = cube_point(u);
  const double wn = norm(std::span<const double>(w.data(), n));
  VecN x{};
  for (int i = 0; i < n; ++i) x[i] = radius * w[i] / wn;
  return x;
}

std::vector<VecN> SphereChart::tangents(std::span<const double> u) const {
  VecN w = cube_point(u);
  const double w2 = dot(std::span<const double>(w.data(), n),
                        std::span<const double>(w.data(), n));
  const double wn = std::sqrt(w2);
  std::vector<VecN> t(static_cast<std::size_t>(n - 1));
  int a = 0;
  for (int i = 0; i < n; ++i) {
    if (i == axis) continue;
    // dx/du_a = r (E_i / |w| - w u_a / |w|^3)
    VecN& ta = t[a];
    for (int j = 0; j < n; ++j)
      ta[j] = radius * ((i == j ? 1.0 : 0.0) / wn - w[j] * u[a] / (wn * w2));
    ++a;
  }
  return t;
}

std::vector<VecN> SphereChart::second_derivs(std::span<const double> u) const {
  VecN w = cube_point(u);
  const double w2 = dot(std::span<const double>(w.data(), n),
                        std::span<const double>(w.data(), n));
  const double wn = std::sqrt(w2);
  const double w3 = wn * w2, w5 = w3 * w2;
  const int k = n - 1;
  std::vector<int> param_axis;
  for (int i = 0; i < n; ++i)
    if (i != axis) param_axis.push_back(i);
  std::vector<VecN> dd(static_cast<std::size_t>(kMaxSym));
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      VecN v{};
      const int ia = param_axis[a], ib = param_axis[b];
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        s -= (ia == j ? 1.0 : 0.0) * u[b] / w3;
        s -= (ib == j ? 1.0 : 0.0) * u[a] / w3;
        s -= (a == b ? 1.0 : 0.0) * w[j] / w3;
        s += 3.0 * w[j] * u[a] * u[b] / w5;
        v[j] = radius * s;
      }
      dd[static_cast<std::size_t>(sym_index(a, b))] = v;
    }
  return dd;
}

double SphereChart::euclidean_jacobian(std::span<const double> u) const {
  VecN w = cube_point(u);
  const double wn = norm(std::span<const double>(w.data(), n));
  return std::pow(radius, n - 1) / std::pow(wn, n);
}

std::vector<SphereChart> sphere_charts(int n, double radius) {
  std::vector<SphereChart> charts;
  charts.reserve(static_cast<std::size_t>(2 * n));
  for (int axis = 0; axis < n; ++axis)
    for (int sign : {+1, -1})
      charts.push_back(SphereChart{n, axis, sign, radius});
  return charts;
}

QuadResult integrate_sphere(int n, double radius, const SphereIntegrand& f,
                            const QuadConfig& cfg) {
  QuadResult total;
  total.converged = true;
  std::array<double, kMaxDim> lo{}, hi{};
  for (int d = 0; d < n - 1; ++d) {
    lo[d] = -1.0;
    hi[d] = 1.0;
  }
  for (const SphereChart& chart : sphere_charts(n, radius)) {
    Integrand g = [&](std::span<const double> u) {
      const VecN x = chart.point(u);
      VecN nu{};
      for (int i = 0; i < n; ++i) nu[i] = x[i] / radius;
      return f(std::span<const double>(x.data(), n),
               std::span<const double>(nu.data(), n)) *
             chart.euclidean_jacobian(u);
    };
    total += integrate_box(std::span<const double>(lo.data(), n - 1),
                           std::span<const double>(hi.data(), n - 1), g, cfg);
  }
  return total;
}

}  // namespace polymass

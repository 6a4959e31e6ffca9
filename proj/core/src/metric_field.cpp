#include "polymass/metric_field.hpp"

#include <algorithm>
#include <cmath>

#include "polymass/error.hpp"

namespace polymass {

double MetricAt::dinv(int p, int m, int a) const {
  double s = 0.0;
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c) s += ginv(m, b) * d(p, b, c) * ginv(c, a);
  return -s;
}

SymTensorField::SymTensorField(int n, std::vector<Expr> packed)
    : n_(n), comps_(std::move(packed)) {
  if (static_cast<int>(comps_.size()) != n * (n + 1) / 2)
    throw Error("tensor field needs n(n+1)/2 packed components");
  compiled_ = CompiledExprs::compile(comps_);
}

SymTensorField::At SymTensorField::at(std::span<const double> x,
                                      const ParamMap& params) const {
  At r;
  r.n = n_;
  r.value.n = n_;
  std::vector<Jet2> jets(comps_.size());
  compiled_.eval_jet2(x, jets, params);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      const Jet2& jet = jets[static_cast<std::size_t>(packed_index(n_, i, j))];
      const int ij = sym_index(i, j);
      r.value.a[ij] = jet.v;
      for (int k = 0; k < n_; ++k) r.d[k][ij] = jet.g[k];
      for (int k = 0; k < n_; ++k)
        for (int l = k; l < n_; ++l) r.dd[sym_index(k, l)][ij] = jet.hess(k, l);
    }
  return r;
}

SymTensorField::At SymTensorField::at_first_order(std::span<const double> x,
                                                  const ParamMap& params) const {
  At r;
  r.n = n_;
  r.value.n = n_;
  std::vector<Jet1> jets(comps_.size());
  compiled_.eval_jet1(x, jets, params);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      const Jet1& jet = jets[static_cast<std::size_t>(packed_index(n_, i, j))];
      const int ij = sym_index(i, j);
      r.value.a[ij] = jet.v;
      for (int k = 0; k < n_; ++k) r.d[k][ij] = jet.g[k];
    }
  return r;
}

SymTensorField SymTensorField::bind(const ParamMap& params) const {
  std::vector<Expr> b;
  b.reserve(comps_.size());
  for (const Expr& e : comps_) b.push_back(e.bind(params));
  return SymTensorField(n_, std::move(b));
}

SymTensorField SymTensorField::scaled(const Expr& factor) const {
  std::vector<Expr> b;
  b.reserve(comps_.size());
  for (const Expr& e : comps_) b.push_back(factor * e);
  return SymTensorField(n_, std::move(b));
}

SymTensorField operator-(const SymTensorField& a, const SymTensorField& b) {
  if (a.n_ != b.n_) throw Error("tensor dimension mismatch");
  std::vector<Expr> c;
  c.reserve(a.comps_.size());
  for (std::size_t i = 0; i < a.comps_.size(); ++i)
    c.push_back(a.comps_[i] - b.comps_[i]);
  return SymTensorField(a.n_, std::move(c));
}

SymTensorField operator+(const SymTensorField& a, const SymTensorField& b) {
  if (a.n_ != b.n_) throw Error("tensor dimension mismatch");
  std::vector<Expr> c;
  c.reserve(a.comps_.size());
  for (std::size_t i = 0; i < a.comps_.size(); ++i)
    c.push_back(a.comps_[i] + b.comps_[i]);
  return SymTensorField(a.n_, std::move(c));
}

MetricField::MetricField(int n, std::vector<Expr> packed, Background bg,
                         AsymType type, double decay, ParamMap params,
                         std::vector<Expr> explicit_perturbation)
    : SymTensorField(n, std::move(packed)),
      background_(bg),
      type_(type),
      decay_(decay),
      params_(std::move(params)),
      pert_(std::move(explicit_perturbation)) {
  if (!pert_.empty() &&
      static_cast<int>(pert_.size()) != n * (n + 1) / 2)
    throw Error("perturbation needs n(n+1)/2 packed components");
  if (n < 2 || n > kMaxDim)
    throw Error("metric dimension must be between 2 and " +
                std::to_string(kMaxDim));
  bound_.reserve(comps_.size());
  for (const Expr& e : comps_) bound_.push_back(e.bind(params_));
  bound_compiled_ = CompiledExprs::compile(bound_);
}

MetricField MetricField::with_params(const ParamMap& overrides) const {
  ParamMap merged = params_;
  for (const auto& [k, v] : overrides) merged[k] = v;
  return MetricField(n_, comps_, background_, type_, decay_, merged, pert_);
}

MetricAt MetricField::at(std::span<const double> x) const {
  MetricAt r;
  r.n = n_;
  for (int i = 0; i < n_; ++i) r.x[i] = x[i];
  r.g.n = n_;
  r.ginv.n = n_;
  std::vector<Jet2> jets(bound_.size());
  bound_compiled_.eval_jet2(x, jets, {});
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      const Jet2& jet =
          jets[static_cast<std::size_t>(packed_index(n_, i, j))];
      const int ij = sym_index(i, j);
      r.g.a[ij] = jet.v;
      for (int k = 0; k < n_; ++k) r.dg[k][ij] = jet.g[k];
      for (int k = 0; k < n_; ++k)
        for (int l = k; l < n_; ++l)
          r.ddg[sym_index(k, l)][ij] = jet.hess(k, l);
    }

  const auto chol = cholesky(r.g);
  if (!chol) {
    std::string pt = "(";
    for (int i = 0; i < n_; ++i)
      pt += (i ? ", " : "") + std::to_string(x[i]);
    throw GeometryError("metric is not positive definite at " + pt + ")");
  }
  r.det = det_from_cholesky(*chol, n_);
  r.sqrt_det = std::sqrt(r.det);
  r.ginv = spd_inverse(*chol, n_);

  // Gamma^m_kl = (1/2) g^{ma} (d_k g_al + d_l g_ak - d_a g_kl)
  for (int m = 0; m < n_; ++m)
    for (int k = 0; k < n_; ++k)
      for (int l = k; l < n_; ++l) {
        double s = 0.0;
        for (int a = 0; a < n_; ++a)
          s += r.inv(m, a) *
               (r.d(k, a, l) + r.d(l, a, k) - r.d(a, k, l));
        r.gamma[m][sym_index(k, l)] = 0.5 * s;
      }
  return r;
}

MetricAt MetricField::at_first_order(std::span<const double> x) const {
  MetricAt r;
  r.n = n_;
  r.second_order = false;
  for (int i = 0; i < n_; ++i) r.x[i] = x[i];
  r.g.n = n_;
  r.ginv.n = n_;
  std::vector<Jet1> jets(bound_.size());
  bound_compiled_.eval_jet1(x, jets, {});
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      const Jet1& jet =
          jets[static_cast<std::size_t>(packed_index(n_, i, j))];
      const int ij = sym_index(i, j);
      r.g.a[ij] = jet.v;
      for (int k = 0; k < n_; ++k) r.dg[k][ij] = jet.g[k];
    }

  const auto chol = cholesky(r.g);
  if (!chol) {
    std::string pt = "(";
    for (int i = 0; i < n_; ++i)
      pt += (i ? ", " : "") + std::to_string(x[i]);
    throw GeometryError("metric is not positive definite at " + pt + ")");
  }
  r.det = det_from_cholesky(*chol, n_);
  r.sqrt_det = std::sqrt(r.det);
  r.ginv = spd_inverse(*chol, n_);
  for (int m = 0; m < n_; ++m)
    for (int k = 0; k < n_; ++k)
      for (int l = k; l < n_; ++l) {
        double s = 0.0;
        for (int a = 0; a < n_; ++a)
          s += r.inv(m, a) *
               (r.d(k, a, l) + r.d(l, a, k) - r.d(a, k, l));
        r.gamma[m][sym_index(k, l)] = 0.5 * s;
      }
  return r;
}

SymMat MetricField::value_at(std::span<const double> x) const {
  SymMat m;
  m.n = n_;
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j)
      m.at(i, j) = bound_[static_cast<std::size_t>(packed_index(n_, i, j))].eval(x);
  if (!cholesky(m))
    throw GeometryError("metric is not positive definite");
  return m;
}

MetricField euclidean_metric(int n) {
  std::vector<Expr> packed(static_cast<std::size_t>(n * (n + 1) / 2));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      packed[static_cast<std::size_t>(packed_index(n, i, j))] =
          Expr::constant(i == j ? 1.0 : 0.0, n);
  return MetricField(n, std::move(packed), Background::Euclidean, AsymType::AF,
                     std::max(1.0, static_cast<double>(n - 2)), {});
}

MetricField hyperboloid_metric(int n) {
  // gbar_ij = delta_ij - z_i z_j / (1 + r^2)
  std::vector<Expr> packed(static_cast<std::size_t>(n * (n + 1) / 2));
  const Expr one = Expr::constant(1.0, n);
  const Expr denom = one + pow(Expr::radial(n), 2);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Expr zz = Expr::variable(i, n) * Expr::variable(j, n);
      Expr comp = (i == j ? one - zz / denom : Expr::constant(0.0, n) - zz / denom);
      packed[static_cast<std::size_t>(packed_index(n, i, j))] = comp;
    }
  return MetricField(n, std::move(packed), Background::HyperbolicHyperboloid,
                     AsymType::AHHyperboloid, static_cast<double>(n), {});
}

MetricField upper_half_space_metric(int n) {
  // gbar_ij = delta_ij / y_1^2 on {y_1 > 0}
  std::vector<Expr> packed(static_cast<std::size_t>(n * (n + 1) / 2));
  const Expr y1sq = pow(Expr::variable(0, n), 2);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      packed[static_cast<std::size_t>(packed_index(n, i, j))] =
          (i == j) ? Expr::constant(1.0, n) / y1sq : Expr::constant(0.0, n);
  return MetricField(n, std::move(packed), Background::HyperbolicUHS,
                     AsymType::AHUpperHalfSpace, static_cast<double>(n), {});
}

MetricField MetricField::background_field() const {
  switch (background_) {
    case Background::Euclidean:
      return euclidean_metric(n_);
    case Background::HyperbolicHyperboloid:
      return hyperboloid_metric(n_);
    case Background::HyperbolicUHS:
      return upper_half_space_metric(n_);
    case Background::None:
      break;
  }
  throw Error("metric has no background declared");
}

SymTensorField MetricField::perturbation() const {
  if (!pert_.empty()) return SymTensorField(n_, pert_).bind(params_);
  const MetricField bg = background_field();
  SymTensorField h = static_cast<const SymTensorField&>(*this) -
                     static_cast<const SymTensorField&>(bg);
  return h.bind(params_);
}

MetricField MetricField::restrict_to_hyperplane(int k_one_based,
                                                double t) const {
  MetricField f = restrict_to_hyperplane_param(k_one_based, "slice_t");
  ParamMap p = f.params();
  p["slice_t"] = t;
  return f.with_params(p);
}

MetricField MetricField::restrict_to_hyperplane_param(
    int k_one_based, const std::string& tname) const {
  const int k = k_one_based - 1;
  if (k < 0 || k >= n_) throw Error("hyperplane axis out of range");
  const int m = n_ - 1;
  // Old coordinate i maps to a new variable (i < k keeps its slot, i > k
  // shifts down); x_k becomes the named parameter.
  std::vector<Expr> repl;
  repl.reserve(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    if (i == k)
      repl.push_back(Expr::parameter(tname, m));
    else
      repl.push_back(Expr::variable(i < k ? i : i - 1, m));
  }
  std::vector<Expr> packed(static_cast<std::size_t>(m * (m + 1) / 2));
  for (int i = 0; i < n_; ++i) {
    if (i == k) continue;
    for (int j = i; j < n_; ++j) {
      if (j == k) continue;
      const int ni = i < k ? i : i - 1;
      const int nj = j < k ? j : j - 1;
      packed[static_cast<std::size_t>(packed_index(m, ni, nj))] =
          component(i, j).substitute(repl, m);
    }
  }
  Background bg = background_ == Background::Euclidean ? Background::Euclidean
                                                       : Background::None;
  return MetricField(m, std::move(packed), bg, AsymType::AF, decay_, params_);
}

MetricField pullback(const MetricField& g, const std::vector<Expr>& phi,
                     Background new_background, AsymType new_type) {
  const int n = g.dimension();
  if (static_cast<int>(phi.size()) != n)
    throw Error("pullback map needs one component per coordinate");
  const int m = phi.front().dimension();
  if (m != n) throw Error("pullback between different dimensions unsupported");

  // Composed components g_ab(phi(x)) and symbolic Jacobian d_i phi^a.
  std::vector<Expr> composed(static_cast<std::size_t>(n * (n + 1) / 2));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      composed[static_cast<std::size_t>(packed_index(n, a, b))] =
          g.component(a, b).substitute(phi, m);
  std::vector<std::vector<Expr>> dphi(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    dphi[a].reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) dphi[a].push_back(phi[a].derivative(i));
  }

  std::vector<Expr> packed(static_cast<std::size_t>(n * (n + 1) / 2));
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      Expr sum = Expr::constant(0.0, m);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const Expr& gab =
              composed[static_cast<std::size_t>(packed_index(n, a, b))];
          sum = sum + gab * dphi[a][i] * dphi[b][j];
        }
      packed[static_cast<std::size_t>(packed_index(m, i, j))] = sum;
    }
  return MetricField(m, std::move(packed), new_background, new_type,
                     g.decay_rate(), g.params());
}

}  // namespace polymass

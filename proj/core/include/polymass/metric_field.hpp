#pragma once

#include <span>
#include <string>
#include <vector>

#include "polymass/expr.hpp"
#include "polymass/linalg.hpp"

namespace polymass {

enum class Background { None, Euclidean, HyperbolicHyperboloid, HyperbolicUHS };
enum class AsymType { None, AF, AHHyperboloid, AHUpperHalfSpace };

//! Metric data at a point: component values, inverse, first and second
//! coordinate derivatives, and Christoffel symbols, all from exact jets.
struct MetricAt {
  int n = 0;
  VecN x{};
  SymMat g;
  SymMat ginv;
  double det = 0.0;
  double sqrt_det = 0.0;
  // dg[k] is the packed matrix of d_k g_ij; ddg[sym(k,l)] likewise for
  // d_k d_l g_ij.
  std::array<std::array<double, kMaxSym>, kMaxDim> dg{};
  std::array<std::array<double, kMaxSym>, kMaxSym> ddg{};
  // christoffel[m] is the packed symmetric matrix of Gamma^m_kl.
  std::array<std::array<double, kMaxSym>, kMaxDim> gamma{};

  double met(int i, int j) const { return g(i, j); }
  double inv(int i, int j) const { return ginv(i, j); }
  bool second_order = true;  // ddg populated (at) or zeroed (at_first_order)
  double d(int k, int i, int j) const { return dg[k][sym_index(i, j)]; }
  double dd(int k, int l, int i, int j) const {
    return ddg[sym_index(k, l)][sym_index(i, j)];
  }
  double christoffel(int m, int k, int l) const {
    return gamma[m][sym_index(k, l)];
  }
  //! d_p g^{ma} = -g^{mb} (d_p g_bc) g^{ca}
  double dinv(int p, int m, int a) const;
};

//! Symmetric 2-tensor field with expression components (the carrier for both
//! metrics g and perturbations h = g - gbar, which need not be definite).
class SymTensorField {
 public:
  SymTensorField() = default;
  SymTensorField(int n, std::vector<Expr> packed_components);

  int dimension() const { return n_; }
  const Expr& component(int i, int j) const {
    return comps_[static_cast<std::size_t>(packed_index(n_, i, j))];
  }
  const std::vector<Expr>& components() const { return comps_; }

  //! Values and first/second derivatives of every component at x.
  struct At {
    int n = 0;
    SymMat value;
    std::array<std::array<double, kMaxSym>, kMaxDim> d{};
    std::array<std::array<double, kMaxSym>, kMaxSym> dd{};
    double val(int i, int j) const { return value(i, j); }
    double deriv(int k, int i, int j) const { return d[k][sym_index(i, j)]; }
  };
  At at(std::span<const double> x, const ParamMap& params = {}) const;
  //! Values and first derivatives only (dd left zero).
  At at_first_order(std::span<const double> x,
                    const ParamMap& params = {}) const;

  SymTensorField bind(const ParamMap& params) const;
  SymTensorField scaled(const Expr& factor) const;

  const CompiledExprs& compiled() const { return compiled_; }

  friend SymTensorField operator-(const SymTensorField& a,
                                  const SymTensorField& b);
  friend SymTensorField operator+(const SymTensorField& a,
                                  const SymTensorField& b);

 protected:
  int n_ = 0;
  std::vector<Expr> comps_;  // packed i <= j, size n(n+1)/2
  CompiledExprs compiled_;   // tape over comps_
};

//! A Riemannian metric given by expression components together with its
//! asymptotic metadata. Positive definiteness is checked at every query.
class MetricField : public SymTensorField {
 public:
  MetricField() = default;
  MetricField(int n, std::vector<Expr> packed_components, Background bg,
              AsymType type, double decay, ParamMap params = {},
              std::vector<Expr> explicit_perturbation = {});

  Background background() const { return background_; }
  AsymType asym_type() const { return type_; }
  double decay_rate() const { return decay_; }
  const ParamMap& params() const { return params_; }

  //! Copy with some parameters overridden (expressions are shared).
  MetricField with_params(const ParamMap& overrides) const;

  //! Full jet data at x. Throws GeometryError when g(x) is not positive
  //! definite and DomainError when a component expression cannot be
  //! evaluated.
  MetricAt at(std::span<const double> x) const;

  //! First-order jet data (no component Hessians); enough for Christoffel
  //! symbols, surface geometry, and flux integrands.
  MetricAt at_first_order(std::span<const double> x) const;

  //! Component values only (with positive definiteness check).
  SymMat value_at(std::span<const double> x) const;

  //! The background metric gbar as a field in the same chart.
  MetricField background_field() const;

  //! h = g - gbar. Uses the analytic perturbation expressions when the
  //! metric carries them (cancellation-free at large radii); otherwise the
  //! component-wise difference from the background.
  SymTensorField perturbation() const;

  //! Restriction to the coordinate hyperplane {x_k = t} (k is 1-based),
  //! as an (n-1)-dimensional metric with x_k substituted.
  MetricField restrict_to_hyperplane(int k_one_based, double t) const;
  //! Same, but with the hyperplane offset left as a named parameter, so one
  //! restriction serves every slice position.
  MetricField restrict_to_hyperplane_param(int k_one_based,
                                           const std::string& tname) const;

 private:
  Background background_ = Background::Euclidean;
  AsymType type_ = AsymType::None;
  double decay_ = 0.0;
  ParamMap params_;
  std::vector<Expr> bound_;  // components with parameters substituted
  CompiledExprs bound_compiled_;
  std::vector<Expr> pert_;   // analytic h = g - gbar, when known
};

//! Euclidean metric in dimension n.
MetricField euclidean_metric(int n);
//! Hyperboloid-model hyperbolic metric in z-coordinates.
MetricField hyperboloid_metric(int n);
//! Upper-half-space hyperbolic metric (first coordinate positive).
MetricField upper_half_space_metric(int n);

//! Pullback (phi^* g)_ij(x) = g_ab(phi(x)) d_i phi^a d_j phi^b, with the
//! Jacobian assembled symbolically so jets of the result stay exact.
MetricField pullback(const MetricField& g, const std::vector<Expr>& phi,
                     Background new_background, AsymType new_type);

}  // namespace polymass

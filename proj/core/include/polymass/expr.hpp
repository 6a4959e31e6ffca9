#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polymass/jet.hpp"

namespace polymass {

//! Named parameter values, late-bound by name at evaluation time.
using ParamMap = std::map<std::string, double>;

enum class NodeKind {
  Constant,
  Variable,   // coordinate x_i, 0-based index
  Parameter,  // named scalar, late-bound
  Radial,     // r = sqrt(x1^2 + ... + xn^2)
  Add,
  Sub,
  Mul,
  Div,
  Pow,     // general power, evaluated as exp(b*log(a)), domain a > 0
  PowInt,  // integer power by repeated multiplication, exact for a <= 0
  Neg,
  Call,
};

enum class Func { Sqrt, Exp, Log, Sin, Cos, Tan, Atan, Abs };

struct ExprNode {
  NodeKind kind;
  double value = 0.0;     // Constant
  int index = 0;          // Variable
  long long int_exp = 0;  // PowInt exponent
  std::string name;       // Parameter
  Func func = Func::Sqrt; // Call
  std::vector<std::shared_ptr<const ExprNode>> args;
};

//! A scalar expression of coordinates x1..xn plus named parameters.
//! Immutable after construction; evaluation is pure, so an Expr may be
//! shared freely between threads.
class Expr {
 public:
  Expr() = default;

  //! Parse `source` against the fixed grammar with `dimension` coordinates.
  //! Throws ParseError (with byte offset) on syntax errors, unknown
  //! identifiers used as functions, call arity mismatches, and coordinate
  //! indices exceeding the dimension.
  static Expr parse(std::string_view source, int dimension);

  static Expr constant(double c, int dimension);
  static Expr variable(int index_zero_based, int dimension);
  static Expr parameter(const std::string& name, int dimension);
  static Expr radial(int dimension);

  bool empty() const { return root_ == nullptr; }
  int dimension() const { return dim_; }

  //! Evaluate value, gradient, and Hessian at `x` with the given parameters.
  Jet2 eval_jet2(std::span<const double> x, const ParamMap& params = {}) const;

  //! Value and gradient only.
  Jet1 eval_jet1(std::span<const double> x, const ParamMap& params = {}) const;

  //! Value-only evaluation (no derivative bookkeeping).
  double eval(std::span<const double> x, const ParamMap& params = {}) const;

  //! Reparseable text form. Parsing the result yields a structurally
  //! identical tree.
  std::string str() const;

  //! Replace coordinate i by `replacements[i]` (all of dimension `new_dim`);
  //! the radial symbol expands to sqrt of the summed squared replacements.
  Expr substitute(const std::vector<Expr>& replacements, int new_dim) const;

  //! Replace named parameters by constants; unlisted parameters stay.
  Expr bind(const ParamMap& params) const;

  //! Exact symbolic partial derivative with respect to coordinate `index`.
  Expr derivative(int index_zero_based) const;

  //! Sorted unique names of free parameters.
  std::vector<std::string> parameters() const;

  bool same_structure(const Expr& other) const;

  const ExprNode& root() const { return *root_; }
  std::shared_ptr<const ExprNode> node() const { return root_; }

  static Expr wrap(std::shared_ptr<const ExprNode> n, int dim);

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

 private:
  std::shared_ptr<const ExprNode> root_;
  int dim_ = 0;
};

Expr pow(const Expr& base, long long exponent);
Expr pow(const Expr& base, const Expr& exponent);
Expr sqrt(const Expr& a);

//! Evaluate several expressions at one point, sharing the results of
//! subtrees held in common (pullback Jacobians, radial spines).
std::vector<Jet2> eval_jet2_batch(std::span<const Expr> exprs,
                                  std::span<const double> x,
                                  const ParamMap& params = {});
std::vector<Jet1> eval_jet1_batch(std::span<const Expr> exprs,
                                  std::span<const double> x,
                                  const ParamMap& params = {});

//! A set of expressions flattened to one postorder tape with structural
//! common-subexpression elimination. Evaluation is a linear sweep, far
//! cheaper than tree recursion for the composed metrics the pullback
//! produces. Compilation is done once; evaluation is pure and thread-safe.
class CompiledExprs {
 public:
  CompiledExprs() = default;
  static CompiledExprs compile(std::span<const Expr> exprs);

  int outputs() const { return static_cast<int>(outputs_.size()); }
  int dimension() const { return dim_; }
  std::size_t op_count() const { return ops_.size(); }

  void eval_jet2(std::span<const double> x, std::span<Jet2> out,
                 const ParamMap& params = {}) const;
  void eval_jet1(std::span<const double> x, std::span<Jet1> out,
                 const ParamMap& params = {}) const;

 private:
  struct Op {
    NodeKind kind;
    Func func = Func::Sqrt;
    int a = -1, b = -1;
    double cval = 0.0;
    int var = 0;
    long long int_exp = 0;
    int param = -1;  // index into param_names_
  };
  std::vector<Op> ops_;
  std::vector<int> outputs_;
  std::vector<std::string> param_names_;
  std::vector<std::shared_ptr<const ExprNode>> op_nodes_;  // for error text
  int dim_ = 0;

  template <class J>
  void run(std::span<const double> x, std::span<J> out,
           const ParamMap& params) const;
};

}  // namespace polymass

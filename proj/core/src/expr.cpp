#include "polymass/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <set>
#include <unordered_map>
#include <sstream>

#include "polymass/error.hpp"

namespace polymass {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_node(ExprNode n) {
  return std::make_shared<const ExprNode>(std::move(n));
}

NodePtr make_const(double c) {
  ExprNode n;
  n.kind = NodeKind::Constant;
  n.value = c;
  return make_node(std::move(n));
}

NodePtr make_var(int index) {
  ExprNode n;
  n.kind = NodeKind::Variable;
  n.index = index;
  return make_node(std::move(n));
}

NodePtr make_param(std::string name) {
  ExprNode n;
  n.kind = NodeKind::Parameter;
  n.name = std::move(name);
  return make_node(std::move(n));
}

NodePtr make_radial() {
  ExprNode n;
  n.kind = NodeKind::Radial;
  return make_node(std::move(n));
}

NodePtr make_binary(NodeKind k, NodePtr a, NodePtr b) {
  ExprNode n;
  n.kind = k;
  n.args = {std::move(a), std::move(b)};
  return make_node(std::move(n));
}

NodePtr make_neg(NodePtr a) {
  // Fold negated literals so that printing and reparsing agree structurally.
  if (a->kind == NodeKind::Constant) return make_const(-a->value);
  ExprNode n;
  n.kind = NodeKind::Neg;
  n.args = {std::move(a)};
  return make_node(std::move(n));
}

NodePtr make_pow_int(NodePtr base, long long e) {
  if (base->kind == NodeKind::Constant && !(base->value == 0.0 && e < 0)) {
    // Fold literal powers with the same repeated-multiplication rule the
    // evaluator uses, keeping nested constant exponents exact.
    double acc = 1.0, b = base->value;
    unsigned long long k = e < 0 ? static_cast<unsigned long long>(-e)
                                 : static_cast<unsigned long long>(e);
    while (k > 0) {
      if (k & 1ull) acc *= b;
      b *= b;
      k >>= 1;
    }
    return make_const(e < 0 ? 1.0 / acc : acc);
  }
  ExprNode n;
  n.kind = NodeKind::PowInt;
  n.int_exp = e;
  n.args = {std::move(base)};
  return make_node(std::move(n));
}

NodePtr make_pow(NodePtr base, NodePtr exponent) {
  if (exponent->kind == NodeKind::Constant) {
    const double e = exponent->value;
    if (e == std::floor(e) && std::fabs(e) < 1e9)
      return make_pow_int(std::move(base), static_cast<long long>(e));
  }
  ExprNode n;
  n.kind = NodeKind::Pow;
  n.args = {std::move(base), std::move(exponent)};
  return make_node(std::move(n));
}

NodePtr make_call(Func f, std::vector<NodePtr> args) {
  ExprNode n;
  n.kind = NodeKind::Call;
  n.func = f;
  n.args = std::move(args);
  return make_node(std::move(n));
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == NodeKind::Constant && n->value == v;
}

// Folding builders used when assembling derivative and pullback trees.
// Only literal arithmetic is folded; no structural simplification.
NodePtr fold_add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value + b->value);
  return make_binary(NodeKind::Add, std::move(a), std::move(b));
}

NodePtr fold_sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value - b->value);
  if (is_const(a, 0.0)) return make_neg(std::move(b));
  return make_binary(NodeKind::Sub, std::move(a), std::move(b));
}

NodePtr fold_mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value * b->value);
  return make_binary(NodeKind::Mul, std::move(a), std::move(b));
}

NodePtr fold_div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return make_const(0.0);
  if (is_const(b, 1.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant &&
      b->value != 0.0)
    return make_const(a->value / b->value);
  return make_binary(NodeKind::Div, std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct FuncInfo {
  const char* name;
  Func func;
  int arity;
};

constexpr FuncInfo kFuncs[] = {
    {"sqrt", Func::Sqrt, 1}, {"exp", Func::Exp, 1},   {"log", Func::Log, 1},
    {"sin", Func::Sin, 1},   {"cos", Func::Cos, 1},   {"tan", Func::Tan, 1},
    {"atan", Func::Atan, 1}, {"abs", Func::Abs, 1},
};

class Parser {
 public:
  Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

  NodePtr run() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < src_.size())
      throw ParseError(std::string("unexpected trailing input '") +
                           std::string(src_.substr(pos_)) + "'",
                       pos_);
    return e;
  }

 private:
  std::string_view src_;
  int dim_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (eat('+'))
        lhs = make_binary(NodeKind::Add, std::move(lhs), parse_term());
      else if (eat('-'))
        lhs = make_binary(NodeKind::Sub, std::move(lhs), parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      if (eat('*'))
        lhs = make_binary(NodeKind::Mul, std::move(lhs), parse_factor());
      else if (eat('/'))
        lhs = make_binary(NodeKind::Div, std::move(lhs), parse_factor());
      else
        return lhs;
    }
  }

  NodePtr parse_factor() {
    if (eat('-')) return make_neg(parse_power());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (eat('^')) return make_pow(std::move(base), parse_factor());
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        ++pos_;
      if (pos_ < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          ++pos_;
      } else {
        pos_ = mark;  // 'e' belongs to a following identifier, not this number
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    if (text == ".") throw ParseError("malformed number", start);
    return make_const(std::strtod(text.c_str(), nullptr));
  }

  NodePtr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    if (peek() == '(') return parse_call(name, start);

    if (name == "pi") return make_const(std::numbers::pi);
    if (name == "r") return make_radial();

    // x<k> is the k-th coordinate (1-based); x,y,z,w alias x1..x4 when the
    // dimension does not exceed 4.
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char d) {
          return std::isdigit(static_cast<unsigned char>(d));
        })) {
      const long k = std::strtol(name.c_str() + 1, nullptr, 10);
      if (k < 1 || k > dim_)
        throw ParseError("variable index " + std::to_string(k) +
                             " exceeds dimension " + std::to_string(dim_),
                         start);
      return make_var(static_cast<int>(k - 1));
    }
    if (dim_ <= 4 && name.size() == 1) {
      const int alias = name[0] == 'x'   ? 0
                        : name[0] == 'y' ? 1
                        : name[0] == 'z' ? 2
                        : name[0] == 'w' ? 3
                                         : -1;
      if (alias >= 0) {
        if (alias >= dim_)
          throw ParseError("variable index " + std::to_string(alias + 1) +
                               " exceeds dimension " + std::to_string(dim_),
                           start);
        return make_var(alias);
      }
    }
    return make_param(name);
  }

  NodePtr parse_call(const std::string& name, std::size_t name_offset) {
    const FuncInfo* info = nullptr;
    bool is_pow = (name == "pow");
    if (!is_pow) {
      for (const auto& f : kFuncs)
        if (name == f.name) info = &f;
      if (!info)
        throw ParseError("unknown identifier '" + name + "'", name_offset);
    }
    eat('(');
    std::vector<NodePtr> args;
    args.push_back(parse_expr());
    while (eat(',')) args.push_back(parse_expr());
    if (!eat(')')) throw ParseError("expected ')'", pos_);
    const int expected = is_pow ? 2 : info->arity;
    if (static_cast<int>(args.size()) != expected)
      throw ParseError("'" + name + "' expects " + std::to_string(expected) +
                           " argument(s), got " + std::to_string(args.size()),
                       name_offset);
    if (is_pow) return make_pow(std::move(args[0]), std::move(args[1]));
    return make_call(info->func, std::move(args));
  }
};

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

// Precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 power, 5 atom.
int node_level(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
    case NodeKind::PowInt:
      return 4;
    case NodeKind::Constant:
      return n.value < 0.0 ? 3 : 5;  // negative literals print a leading '-'
    default:
      return 5;
  }
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Sqrt: return "sqrt";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Atan: return "atan";
    case Func::Abs: return "abs";
  }
  return "?";
}

void print_node(const ExprNode& n, std::string& out, int min_level);

void print_child(const ExprNode& c, std::string& out, int min_level) {
  if (node_level(c) < min_level) {
    out += '(';
    print_node(c, out, 0);
    out += ')';
  } else {
    print_node(c, out, 0);
  }
}

void print_node(const ExprNode& n, std::string& out, int) {
  switch (n.kind) {
    case NodeKind::Constant:
      out += format_double(n.value);
      break;
    case NodeKind::Variable:
      out += "x" + std::to_string(n.index + 1);
      break;
    case NodeKind::Parameter:
      out += n.name;
      break;
    case NodeKind::Radial:
      out += 'r';
      break;
    case NodeKind::Add:
      print_child(*n.args[0], out, 1);
      out += " + ";
      print_child(*n.args[1], out, 2);
      break;
    case NodeKind::Sub:
      print_child(*n.args[0], out, 1);
      out += " - ";
      print_child(*n.args[1], out, 2);
      break;
    case NodeKind::Mul:
      print_child(*n.args[0], out, 2);
      out += "*";
      print_child(*n.args[1], out, 3);
      break;
    case NodeKind::Div:
      print_child(*n.args[0], out, 2);
      out += "/";
      print_child(*n.args[1], out, 3);
      break;
    case NodeKind::Neg:
      out += '-';
      print_child(*n.args[0], out, 4);
      break;
    case NodeKind::Pow:
      print_child(*n.args[0], out, 5);
      out += '^';
      print_child(*n.args[1], out, 3);
      break;
    case NodeKind::PowInt:
      print_child(*n.args[0], out, 5);
      out += '^';
      if (n.int_exp < 0) {
        out += '(' + std::to_string(n.int_exp) + ')';
      } else {
        out += std::to_string(n.int_exp);
      }
      break;
    case NodeKind::Call:
      out += func_name(n.func);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print_node(*n.args[i], out, 0);
      }
      out += ')';
      break;
  }
}

std::string print_tree(const ExprNode& n) {
  std::string out;
  print_node(n, out, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

[[noreturn]] void domain_error(const std::string& what, const ExprNode& n) {
  throw DomainError(what, print_tree(n));
}

template <class J>
using JetMemoT = std::unordered_map<const ExprNode*, J>;
using JetMemo = JetMemoT<Jet2>;

template <class J>
J eval_jet_memo(const NodePtr& n, std::span<const double> x,
                const ParamMap& params, JetMemoT<J>* memo);

inline void seed_radial_hessian(Jet2& j, std::span<const double> x, double r,
                                double r2) {
  const int dim = j.n;
  for (int i = 0; i < dim; ++i)
    for (int k = i; k < dim; ++k)
      j.h[sym_index(i, k)] = ((i == k ? 1.0 : 0.0) - x[i] * x[k] / r2) / r;
}
inline void seed_radial_hessian(Jet1&, std::span<const double>, double,
                                double) {}

template <class J>
J eval_jet(const ExprNode& n, std::span<const double> x,
           const ParamMap& params, JetMemoT<J>* memo) {
  const int dim = static_cast<int>(x.size());
  switch (n.kind) {
    case NodeKind::Constant:
      return J::constant(dim, n.value);
    case NodeKind::Variable:
      return J::variable(dim, n.index, x[n.index]);
    case NodeKind::Parameter: {
      auto it = params.find(n.name);
      if (it == params.end())
        throw Error("unbound parameter '" + n.name + "'");
      return J::constant(dim, it->second);
    }
    case NodeKind::Radial: {
      double r2 = 0.0;
      for (double xi : x) r2 += xi * xi;
      const double r = std::sqrt(r2);
      if (r == 0.0) domain_error("radial symbol at the origin", n);
      J j(dim, r);
      for (int i = 0; i < dim; ++i) j.g[i] = x[i] / r;
      seed_radial_hessian(j, x, r, r2);
      return j;
    }
    case NodeKind::Add:
      return eval_jet_memo<J>(n.args[0], x, params, memo) +
             eval_jet_memo<J>(n.args[1], x, params, memo);
    case NodeKind::Sub:
      return eval_jet_memo<J>(n.args[0], x, params, memo) -
             eval_jet_memo<J>(n.args[1], x, params, memo);
    case NodeKind::Mul:
      return eval_jet_memo<J>(n.args[0], x, params, memo) *
             eval_jet_memo<J>(n.args[1], x, params, memo);
    case NodeKind::Div: {
      J b = eval_jet_memo<J>(n.args[1], x, params, memo);
      if (b.v == 0.0) domain_error("division by zero", n);
      return eval_jet_memo<J>(n.args[0], x, params, memo) * reciprocal(b);
    }
    case NodeKind::Neg:
      return -eval_jet_memo<J>(n.args[0], x, params, memo);
    case NodeKind::Pow: {
      J a = eval_jet_memo<J>(n.args[0], x, params, memo);
      if (a.v <= 0.0)
        domain_error("power with nonpositive base (use integer exponents)", n);
      J b = eval_jet_memo<J>(n.args[1], x, params, memo);
      return exp(b * log(a));
    }
    case NodeKind::PowInt: {
      J a = eval_jet_memo<J>(n.args[0], x, params, memo);
      if (a.v == 0.0 && n.int_exp < 0) domain_error("division by zero", n);
      return pow_int(a, n.int_exp);
    }
    case NodeKind::Call: {
      J a = eval_jet_memo<J>(n.args[0], x, params, memo);
      switch (n.func) {
        case Func::Sqrt:
          if (a.v < 0.0) domain_error("sqrt of a negative number", n);
          if (a.v == 0.0) domain_error("sqrt has singular derivatives at 0", n);
          return sqrt(a);
        case Func::Exp: return exp(a);
        case Func::Log:
          if (a.v <= 0.0) domain_error("log of a nonpositive number", n);
          return log(a);
        case Func::Sin: return sin(a);
        case Func::Cos: return cos(a);
        case Func::Tan: return tan(a);
        case Func::Atan: return atan(a);
        case Func::Abs: return abs(a);
      }
      domain_error("unknown function", n);
    }
  }
  domain_error("unknown node", n);
}

template <class J>
J eval_jet_memo(const NodePtr& n, std::span<const double> x,
                const ParamMap& params, JetMemoT<J>* memo) {
  // Subtrees shared between expressions (pullback Jacobians, radial spines)
  // are evaluated once per point.
  const bool shared = memo && n.use_count() > 1 && !n->args.empty();
  if (shared) {
    auto it = memo->find(n.get());
    if (it != memo->end()) return it->second;
  }
  J r = eval_jet<J>(*n, x, params, memo);
  if (shared) memo->emplace(n.get(), r);
  return r;
}

double eval_value(const ExprNode& n, std::span<const double> x,
                  const ParamMap& params) {
  switch (n.kind) {
    case NodeKind::Constant:
      return n.value;
    case NodeKind::Variable:
      return x[n.index];
    case NodeKind::Parameter: {
      auto it = params.find(n.name);
      if (it == params.end())
        throw Error("unbound parameter '" + n.name + "'");
      return it->second;
    }
    case NodeKind::Radial: {
      double r2 = 0.0;
      for (double xi : x) r2 += xi * xi;
      return std::sqrt(r2);
    }
    case NodeKind::Add:
      return eval_value(*n.args[0], x, params) +
             eval_value(*n.args[1], x, params);
    case NodeKind::Sub:
      return eval_value(*n.args[0], x, params) -
             eval_value(*n.args[1], x, params);
    case NodeKind::Mul:
      return eval_value(*n.args[0], x, params) *
             eval_value(*n.args[1], x, params);
    case NodeKind::Div: {
      const double b = eval_value(*n.args[1], x, params);
      if (b == 0.0) domain_error("division by zero", n);
      return eval_value(*n.args[0], x, params) / b;
    }
    case NodeKind::Neg:
      return -eval_value(*n.args[0], x, params);
    case NodeKind::Pow: {
      const double a = eval_value(*n.args[0], x, params);
      if (a <= 0.0)
        domain_error("power with nonpositive base (use integer exponents)", n);
      return std::pow(a, eval_value(*n.args[1], x, params));
    }
    case NodeKind::PowInt: {
      const double a = eval_value(*n.args[0], x, params);
      if (a == 0.0 && n.int_exp < 0) domain_error("division by zero", n);
      double acc = 1.0, base = a;
      unsigned long long k = n.int_exp < 0
                                 ? static_cast<unsigned long long>(-n.int_exp)
                                 : static_cast<unsigned long long>(n.int_exp);
      while (k > 0) {
        if (k & 1ull) acc *= base;
        base *= base;
        k >>= 1;
      }
      return n.int_exp < 0 ? 1.0 / acc : acc;
    }
    case NodeKind::Call: {
      const double a = eval_value(*n.args[0], x, params);
      switch (n.func) {
        case Func::Sqrt:
          if (a < 0.0) domain_error("sqrt of a negative number", n);
          return std::sqrt(a);
        case Func::Exp: return std::exp(a);
        case Func::Log:
          if (a <= 0.0) domain_error("log of a nonpositive number", n);
          return std::log(a);
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Atan: return std::atan(a);
        case Func::Abs: return std::fabs(a);
      }
      domain_error("unknown function", n);
    }
  }
  domain_error("unknown node", n);
}

// ---------------------------------------------------------------------------
// Structural transforms
// ---------------------------------------------------------------------------

struct SubstContext {
  const std::vector<Expr>& repl;
  NodePtr sum_sq;  // shared sum-of-squares spine, built on first use

  const NodePtr& radial_squared() {
    if (!sum_sq) {
      NodePtr sum = make_const(0.0);
      for (const Expr& e : repl)
        sum = fold_add(std::move(sum), make_pow_int(e.node(), 2));
      sum_sq = std::move(sum);
    }
    return sum_sq;
  }
};

NodePtr substitute_node(const ExprNode& n, SubstContext& ctx) {
  switch (n.kind) {
    case NodeKind::Constant:
      return make_const(n.value);
    case NodeKind::Parameter:
      return make_param(n.name);
    case NodeKind::Variable:
      return ctx.repl[static_cast<std::size_t>(n.index)].node();
    case NodeKind::Radial:
      // r expands through the replacements so the symbol keeps its meaning
      // in the original chart. The spine is shared across occurrences.
      return make_call(Func::Sqrt, {ctx.radial_squared()});
    case NodeKind::PowInt:
      // Even radial powers skip the square root entirely.
      if (n.args[0]->kind == NodeKind::Radial && n.int_exp % 2 == 0)
        return make_pow_int(ctx.radial_squared(), n.int_exp / 2);
      [[fallthrough]];
    default: {
      ExprNode copy;
      copy.kind = n.kind;
      copy.value = n.value;
      copy.index = n.index;
      copy.int_exp = n.int_exp;
      copy.name = n.name;
      copy.func = n.func;
      for (const auto& a : n.args)
        copy.args.push_back(substitute_node(*a, ctx));
      return make_node(std::move(copy));
    }
  }
}

NodePtr bind_node(const ExprNode& n, const ParamMap& params) {
  if (n.kind == NodeKind::Parameter) {
    auto it = params.find(n.name);
    if (it != params.end()) return make_const(it->second);
    return make_param(n.name);
  }
  if (n.args.empty()) {
    ExprNode copy = n;
    return make_node(std::move(copy));
  }
  ExprNode copy;
  copy.kind = n.kind;
  copy.value = n.value;
  copy.index = n.index;
  copy.int_exp = n.int_exp;
  copy.name = n.name;
  copy.func = n.func;
  for (const auto& a : n.args) copy.args.push_back(bind_node(*a, params));
  return make_node(std::move(copy));
}

NodePtr derivative_node(const NodePtr& n, int var) {
  switch (n->kind) {
    case NodeKind::Constant:
    case NodeKind::Parameter:
      return make_const(0.0);
    case NodeKind::Variable:
      return make_const(n->index == var ? 1.0 : 0.0);
    case NodeKind::Radial:
      return fold_div(make_var(var), make_radial());
    case NodeKind::Add:
      return fold_add(derivative_node(n->args[0], var),
                      derivative_node(n->args[1], var));
    case NodeKind::Sub:
      return fold_sub(derivative_node(n->args[0], var),
                      derivative_node(n->args[1], var));
    case NodeKind::Mul:
      return fold_add(
          fold_mul(derivative_node(n->args[0], var), n->args[1]),
          fold_mul(n->args[0], derivative_node(n->args[1], var)));
    case NodeKind::Div:
      return fold_div(
          fold_sub(fold_mul(derivative_node(n->args[0], var), n->args[1]),
                   fold_mul(n->args[0], derivative_node(n->args[1], var))),
          make_pow_int(n->args[1], 2));
    case NodeKind::Neg:
      return make_neg(derivative_node(n->args[0], var));
    case NodeKind::PowInt: {
      if (n->int_exp == 0) return make_const(0.0);
      NodePtr inner = derivative_node(n->args[0], var);
      return fold_mul(
          fold_mul(make_const(static_cast<double>(n->int_exp)),
                   make_pow_int(n->args[0], n->int_exp - 1)),
          std::move(inner));
    }
    case NodeKind::Pow: {
      // d(a^b) = a^b (b' log a + b a'/a)
      NodePtr da = derivative_node(n->args[0], var);
      NodePtr db = derivative_node(n->args[1], var);
      NodePtr term1 = fold_mul(std::move(db), make_call(Func::Log, {n->args[0]}));
      NodePtr term2 = fold_div(fold_mul(n->args[1], std::move(da)), n->args[0]);
      return fold_mul(make_pow(n->args[0], n->args[1]),
                      fold_add(std::move(term1), std::move(term2)));
    }
    case NodeKind::Call: {
      NodePtr inner = derivative_node(n->args[0], var);
      NodePtr outer;
      switch (n->func) {
        case Func::Sqrt:
          outer = fold_div(make_const(0.5), make_call(Func::Sqrt, {n->args[0]}));
          break;
        case Func::Exp:
          outer = make_call(Func::Exp, {n->args[0]});
          break;
        case Func::Log:
          outer = fold_div(make_const(1.0), n->args[0]);
          break;
        case Func::Sin:
          outer = make_call(Func::Cos, {n->args[0]});
          break;
        case Func::Cos:
          outer = make_neg(make_call(Func::Sin, {n->args[0]}));
          break;
        case Func::Tan: {
          NodePtr t = make_call(Func::Tan, {n->args[0]});
          outer = fold_add(make_const(1.0), make_pow_int(std::move(t), 2));
          break;
        }
        case Func::Atan:
          outer = fold_div(make_const(1.0),
                           fold_add(make_const(1.0),
                                    make_pow_int(n->args[0], 2)));
          break;
        case Func::Abs:
          // d|u| = u/|u| du; valid away from u = 0.
          outer = fold_div(n->args[0], make_call(Func::Abs, {n->args[0]}));
          break;
      }
      return fold_mul(std::move(outer), std::move(inner));
    }
  }
  return make_const(0.0);
}

void collect_params(const ExprNode& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Parameter) out.insert(n.name);
  for (const auto& a : n.args) collect_params(*a, out);
}

bool nodes_equal(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      if (a.value != b.value) return false;
      break;
    case NodeKind::Variable:
      if (a.index != b.index) return false;
      break;
    case NodeKind::Parameter:
      if (a.name != b.name) return false;
      break;
    case NodeKind::PowInt:
      if (a.int_exp != b.int_exp) return false;
      break;
    case NodeKind::Call:
      if (a.func != b.func) return false;
      break;
    default:
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!nodes_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expr surface
// ---------------------------------------------------------------------------

Expr Expr::parse(std::string_view source, int dimension) {
  if (dimension < 1) throw Error("dimension must be at least 1");
  Parser p(source, dimension);
  return wrap(p.run(), dimension);
}

Expr Expr::constant(double c, int dimension) {
  return wrap(make_const(c), dimension);
}
Expr Expr::variable(int index, int dimension) {
  if (index < 0 || index >= dimension)
    throw Error("variable index out of range");
  return wrap(make_var(index), dimension);
}
Expr Expr::parameter(const std::string& name, int dimension) {
  return wrap(make_param(name), dimension);
}
Expr Expr::radial(int dimension) { return wrap(make_radial(), dimension); }

Expr Expr::wrap(std::shared_ptr<const ExprNode> n, int dim) {
  Expr e;
  e.root_ = std::move(n);
  e.dim_ = dim;
  return e;
}

Jet2 Expr::eval_jet2(std::span<const double> x, const ParamMap& params) const {
  JetMemo memo;
  return eval_jet_memo<Jet2>(root_, x.first(static_cast<std::size_t>(dim_)),
                             params, &memo);
}

Jet1 Expr::eval_jet1(std::span<const double> x, const ParamMap& params) const {
  JetMemoT<Jet1> memo;
  return eval_jet_memo<Jet1>(root_, x.first(static_cast<std::size_t>(dim_)),
                             params, &memo);
}

double Expr::eval(std::span<const double> x, const ParamMap& params) const {
  return eval_value(*root_, x.first(static_cast<std::size_t>(dim_)), params);
}

std::string Expr::str() const { return print_tree(*root_); }

Expr Expr::substitute(const std::vector<Expr>& replacements,
                      int new_dim) const {
  if (static_cast<int>(replacements.size()) != dim_)
    throw Error("substitute: need one replacement per coordinate");
  SubstContext ctx{replacements, nullptr};
  return wrap(substitute_node(*root_, ctx), new_dim);
}

Expr Expr::bind(const ParamMap& params) const {
  return wrap(bind_node(*root_, params), dim_);
}

Expr Expr::derivative(int index) const {
  if (index < 0 || index >= dim_) throw Error("derivative index out of range");
  return wrap(derivative_node(root_, index), dim_);
}

std::vector<std::string> Expr::parameters() const {
  std::set<std::string> s;
  collect_params(*root_, s);
  return {s.begin(), s.end()};
}

bool Expr::same_structure(const Expr& other) const {
  return dim_ == other.dim_ && nodes_equal(*root_, *other.root_);
}

Expr operator+(const Expr& a, const Expr& b) {
  return Expr::wrap(fold_add(a.node(), b.node()), a.dimension());
}
Expr operator-(const Expr& a, const Expr& b) {
  return Expr::wrap(fold_sub(a.node(), b.node()), a.dimension());
}
Expr operator*(const Expr& a, const Expr& b) {
  return Expr::wrap(fold_mul(a.node(), b.node()), a.dimension());
}
Expr operator/(const Expr& a, const Expr& b) {
  return Expr::wrap(fold_div(a.node(), b.node()), a.dimension());
}
Expr operator-(const Expr& a) {
  return Expr::wrap(make_neg(a.node()), a.dimension());
}

std::vector<Jet2> eval_jet2_batch(std::span<const Expr> exprs,
                                  std::span<const double> x,
                                  const ParamMap& params) {
  JetMemo memo;
  std::vector<Jet2> out;
  out.reserve(exprs.size());
  for (const Expr& e : exprs)
    out.push_back(eval_jet_memo<Jet2>(
        e.node(), x.first(static_cast<std::size_t>(e.dimension())), params,
        &memo));
  return out;
}

std::vector<Jet1> eval_jet1_batch(std::span<const Expr> exprs,
                                  std::span<const double> x,
                                  const ParamMap& params) {
  JetMemoT<Jet1> memo;
  std::vector<Jet1> out;
  out.reserve(exprs.size());
  for (const Expr& e : exprs)
    out.push_back(eval_jet_memo<Jet1>(
        e.node(), x.first(static_cast<std::size_t>(e.dimension())), params,
        &memo));
  return out;
}

// ---------------------------------------------------------------------------
// Compiled tape
// ---------------------------------------------------------------------------

namespace {

struct OpKey {
  int kind;
  int func;
  long long int_exp;
  unsigned long long value_bits;
  int param;
  int a;
  int b;
  int var;
  auto operator<=>(const OpKey&) const = default;
};

}  // namespace

CompiledExprs CompiledExprs::compile(std::span<const Expr> exprs) {
  CompiledExprs c;
  if (exprs.empty()) return c;
  c.dim_ = exprs.front().dimension();
  std::map<OpKey, int> ids;
  std::map<std::string, int> param_ids;

  std::function<int(const NodePtr&)> visit = [&](const NodePtr& n) -> int {
    Op op;
    op.kind = n->kind;
    OpKey key{};
    key.kind = static_cast<int>(n->kind);
    switch (n->kind) {
      case NodeKind::Constant: {
        op.cval = n->value;
        unsigned long long bits;
        static_assert(sizeof(bits) == sizeof(n->value));
        std::memcpy(&bits, &n->value, sizeof(bits));
        key.value_bits = bits;
        break;
      }
      case NodeKind::Variable:
        op.var = n->index;
        key.var = n->index;
        break;
      case NodeKind::Parameter: {
        auto [it, fresh] = param_ids.emplace(
            n->name, static_cast<int>(c.param_names_.size()));
        if (fresh) c.param_names_.push_back(n->name);
        op.param = it->second;
        key.param = it->second;
        break;
      }
      case NodeKind::Radial:
        break;
      case NodeKind::Neg:
      case NodeKind::Call:
        op.a = visit(n->args[0]);
        key.a = op.a;
        if (n->kind == NodeKind::Call) {
          op.func = n->func;
          key.func = static_cast<int>(n->func);
        }
        break;
      case NodeKind::PowInt:
        op.a = visit(n->args[0]);
        op.int_exp = n->int_exp;
        key.a = op.a;
        key.int_exp = n->int_exp;
        break;
      default:  // binary
        op.a = visit(n->args[0]);
        op.b = visit(n->args[1]);
        key.a = op.a;
        key.b = op.b;
        break;
    }
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(c.ops_.size());
    c.ops_.push_back(op);
    c.op_nodes_.push_back(n);
    ids.emplace(key, id);
    return id;
  };

  for (const Expr& e : exprs) c.outputs_.push_back(visit(e.node()));
  return c;
}

template <class J>
void CompiledExprs::run(std::span<const double> x, std::span<J> out,
                        const ParamMap& params) const {
  const int dim = dim_;
  // Scratch tape values; reused across calls on the same thread.
  thread_local std::vector<J> vals;
  if (vals.size() < ops_.size()) vals.resize(ops_.size());

  std::array<double, 16> param_vals{};
  for (std::size_t p = 0; p < param_names_.size(); ++p) {
    auto it = params.find(param_names_[p]);
    if (it == params.end())
      throw Error("unbound parameter '" + param_names_[p] + "'");
    param_vals[p] = it->second;
  }

  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    switch (op.kind) {
      case NodeKind::Constant:
        vals[i] = J::constant(dim, op.cval);
        break;
      case NodeKind::Variable:
        vals[i] = J::variable(dim, op.var, x[op.var]);
        break;
      case NodeKind::Parameter:
        vals[i] = J::constant(dim, param_vals[static_cast<std::size_t>(op.param)]);
        break;
      case NodeKind::Radial: {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k) r2 += x[k] * x[k];
        const double r = std::sqrt(r2);
        if (r == 0.0)
          throw DomainError("radial symbol at the origin", "r");
        J j(dim, r);
        for (int k = 0; k < dim; ++k) j.g[k] = x[k] / r;
        seed_radial_hessian(j, x, r, r2);
        vals[i] = j;
        break;
      }
      case NodeKind::Add:
        vals[i] = vals[op.a] + vals[op.b];
        break;
      case NodeKind::Sub:
        vals[i] = vals[op.a] - vals[op.b];
        break;
      case NodeKind::Mul:
        vals[i] = vals[op.a] * vals[op.b];
        break;
      case NodeKind::Div:
        if (vals[op.b].v == 0.0)
          throw DomainError("division by zero", print_tree(*op_nodes_[i]));
        vals[i] = vals[op.a] * reciprocal(vals[op.b]);
        break;
      case NodeKind::Neg:
        vals[i] = -vals[op.a];
        break;
      case NodeKind::Pow:
        if (vals[op.a].v <= 0.0)
          throw DomainError("power with nonpositive base",
                            print_tree(*op_nodes_[i]));
        vals[i] = exp(vals[op.b] * log(vals[op.a]));
        break;
      case NodeKind::PowInt:
        if (vals[op.a].v == 0.0 && op.int_exp < 0)
          throw DomainError("division by zero", print_tree(*op_nodes_[i]));
        vals[i] = pow_int(vals[op.a], op.int_exp);
        break;
      case NodeKind::Call: {
        const J& a = vals[op.a];
        switch (op.func) {
          case Func::Sqrt:
            if (a.v <= 0.0)
              throw DomainError(a.v < 0.0 ? "sqrt of a negative number"
                                          : "sqrt has singular derivatives at 0",
                                print_tree(*op_nodes_[i]));
            vals[i] = sqrt(a);
            break;
          case Func::Exp: vals[i] = exp(a); break;
          case Func::Log:
            if (a.v <= 0.0)
              throw DomainError("log of a nonpositive number",
                                print_tree(*op_nodes_[i]));
            vals[i] = log(a);
            break;
          case Func::Sin: vals[i] = sin(a); break;
          case Func::Cos: vals[i] = cos(a); break;
          case Func::Tan: vals[i] = tan(a); break;
          case Func::Atan: vals[i] = atan(a); break;
          case Func::Abs: vals[i] = abs(a); break;
        }
        break;
      }
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k)
    out[k] = vals[static_cast<std::size_t>(outputs_[k])];
}

void CompiledExprs::eval_jet2(std::span<const double> x, std::span<Jet2> out,
                              const ParamMap& params) const {
  run<Jet2>(x.first(static_cast<std::size_t>(dim_)), out, params);
}

void CompiledExprs::eval_jet1(std::span<const double> x, std::span<Jet1> out,
                              const ParamMap& params) const {
  run<Jet1>(x.first(static_cast<std::size_t>(dim_)), out, params);
}

Expr pow(const Expr& base, long long exponent) {
  return Expr::wrap(make_pow_int(base.node(), exponent), base.dimension());
}
Expr pow(const Expr& base, const Expr& exponent) {
  return Expr::wrap(make_pow(base.node(), exponent.node()), base.dimension());
}
Expr sqrt(const Expr& a) {
  return Expr::wrap(make_call(Func::Sqrt, {a.node()}), a.dimension());
}

}  // namespace polymass

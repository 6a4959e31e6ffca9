#include <doctest.h>

#include <cmath>
#include <random>

#include "polymass/error.hpp"
#include "polymass/expr.hpp"
#include "test_oracles.hpp"

using namespace polymass;

namespace {

double jet_value(const Expr& e, std::initializer_list<double> pt,
                 const ParamMap& params = {}) {
  std::vector<double> x(pt);
  return e.eval_jet2(x, params).v;
}

}  // namespace

TEST_CASE("parser produces the grammar-forced trees") {
  // 1 + m/(2*r)  ->  (+ 1 (/ m (* 2 r)))
  const Expr e = Expr::parse("1 + m/(2*r)", 3);
  const ExprNode& root = e.root();
  REQUIRE(root.kind == NodeKind::Add);
  CHECK(root.args[0]->kind == NodeKind::Constant);
  REQUIRE(root.args[1]->kind == NodeKind::Div);
  CHECK(root.args[1]->args[0]->kind == NodeKind::Parameter);
  CHECK(root.args[1]->args[0]->name == "m");
  REQUIRE(root.args[1]->args[1]->kind == NodeKind::Mul);
  CHECK(root.args[1]->args[1]->args[1]->kind == NodeKind::Radial);

  // x1^2 - -x2  ->  (- (^ x1 2) (neg x2))
  const Expr f = Expr::parse("x1^2 - -x2", 2);
  const ExprNode& fr = f.root();
  REQUIRE(fr.kind == NodeKind::Sub);
  REQUIRE(fr.args[0]->kind == NodeKind::PowInt);
  CHECK(fr.args[0]->int_exp == 2);
  REQUIRE(fr.args[1]->kind == NodeKind::Neg);
  CHECK(fr.args[1]->args[0]->kind == NodeKind::Variable);
  CHECK(fr.args[1]->args[0]->index == 1);
}

TEST_CASE("parser error paths") {
  CHECK_THROWS_AS(Expr::parse("foo(x1)", 3), ParseError);
  CHECK_THROWS_AS(Expr::parse("x5", 3), ParseError);
  CHECK_THROWS_AS(Expr::parse("w", 3), ParseError);  // alias beyond dimension
  CHECK_THROWS_AS(Expr::parse("", 3), ParseError);
  CHECK_THROWS_AS(Expr::parse("1 +", 3), ParseError);
  CHECK_THROWS_AS(Expr::parse("sqrt(x1, x2)", 3), ParseError);
  CHECK_THROWS_AS(Expr::parse("(x1", 3), ParseError);
  try {
    Expr::parse("1 + foo(x1)", 3);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.offset == 4);  // byte offset of the unknown identifier
  }
}

TEST_CASE("precedence and associativity") {
  CHECK(jet_value(Expr::parse("2^3^2", 2), {0, 0}) == 512.0);  // right assoc
  CHECK(jet_value(Expr::parse("2*3 + 4*5", 2), {0, 0}) == 26.0);
  CHECK(jet_value(Expr::parse("-2^2", 2), {0, 0}) == -4.0);  // ^ binds tighter
  CHECK(jet_value(Expr::parse("2^-2", 2), {0, 0}) == 0.25);
  CHECK(jet_value(Expr::parse("10 - 4 - 3", 2), {0, 0}) == 3.0);  // left assoc
  CHECK(jet_value(Expr::parse("pow(2, 10)", 2), {0, 0}) == 1024.0);
  CHECK(jet_value(Expr::parse("pi", 2), {0, 0}) ==
        doctest::Approx(3.14159265358979).epsilon(1e-14));
}

TEST_CASE("aliases x,y,z,w map to coordinates for n <= 4") {
  const Expr e = Expr::parse("x + 2*y + 3*z + 4*w", 4);
  CHECK(jet_value(e, {1, 1, 1, 1}) == 10.0);
  const Expr e2 = Expr::parse("x*y", 2);
  CHECK(jet_value(e2, {3, 5}) == 15.0);
}

TEST_CASE("parse-print-parse round trip is structurally identical") {
  const char* sources[] = {
      "1 + m/(2*r)",
      "x1^2 - -x2",
      "(x1 + x2)*(x1 - x2)/(1 + r^2)",
      "sqrt(1 + x1^2)*exp(-x2)/log(2 + x3^2)",
      "sin(x1)*cos(x2) + tan(x3)/atan(1 + x1^2)",
      "abs(x1 - x2)^3",
      "2^3^2 - x1^(4/3)",
      "-(x1 + x2)^2",
      "pow(1 + r, 2) - pi*r^2",
      "a*x1 + b_2*x2 - c/(x3 - 5e-3)",
  };
  for (const char* src : sources) {
    const Expr e = Expr::parse(src, 3);
    const Expr round = Expr::parse(e.str(), 3);
    CHECK_MESSAGE(e.same_structure(round), "failed for: ", src,
                  " printed as: ", e.str());
  }
}

TEST_CASE("random polynomial round trips") {
  std::mt19937 rng(7u);
  for (int k = 0; k < 50; ++k) {
    const std::string src = oracles::random_polynomial(rng, 3);
    const Expr e = Expr::parse(src, 3);
    CHECK(e.same_structure(Expr::parse(e.str(), 3)));
  }
}

TEST_CASE("eval_jet2 on forced examples") {
  // bilinear
  {
    const Jet2 j = Expr::parse("x1*x2", 2).eval_jet2(std::array{3.0, 5.0});
    CHECK(j.v == 15.0);
    CHECK(j.grad(0) == 5.0);
    CHECK(j.grad(1) == 3.0);
    CHECK(j.hess(0, 1) == 1.0);
    CHECK(j.hess(0, 0) == 0.0);
  }
  // radial identity
  {
    const Jet2 j = Expr::parse("r", 3).eval_jet2(std::array{1.0, 0.0, 0.0});
    CHECK(j.v == 1.0);
    CHECK(j.grad(0) == 1.0);
    CHECK(j.grad(1) == 0.0);
    CHECK(j.grad(2) == 0.0);
  }
  // exp: grad and hess equal value; cross-checked against the FD oracle
  {
    const Expr e = Expr::parse("exp(x1)", 1);
    const std::array<double, 1> x{0.7};
    const Jet2 j = e.eval_jet2(x);
    CHECK(j.grad(0) == doctest::Approx(j.v).epsilon(1e-15));
    CHECK(j.hess(0, 0) == doctest::Approx(j.v).epsilon(1e-15));
    auto f = [&](std::span<const double> p) { return e.eval(p); };
    const auto fd = oracles::fd_gradient(f, x);
    CHECK(std::fabs(fd[0] - j.grad(0)) / std::fabs(j.grad(0)) <= 1e-9);
  }
}

TEST_CASE("jets match the independent symbolic differentiator") {
  std::mt19937 rng(20240311u);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 3;
    const std::string src = oracles::random_polynomial(rng, n);
    const Expr e = Expr::parse(src, n);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& xi : x) xi = coord(rng);
    const Jet2 jet = e.eval_jet2(x);
    const oracles::Deriv2 sym = oracles::symbolic_eval(e, x);
    const double scale = std::max(1.0, std::fabs(sym.v));
    CHECK(std::fabs(jet.v - sym.v) <= 1e-12 * scale);
    for (int i = 0; i < n; ++i) {
      const double gs = std::max(1.0, std::fabs(sym.g[i]));
      CHECK(std::fabs(jet.grad(i) - sym.g[i]) <= 1e-12 * gs);
      for (int j = i; j < n; ++j) {
        const double hs = std::max(1.0, std::fabs(sym.h[i][j]));
        CHECK(std::fabs(jet.hess(i, j) - sym.h[i][j]) <= 1e-12 * hs);
      }
    }
  }
}

TEST_CASE("jets match symbolic differentiation on transcendental fields") {
  const char* sources[] = {
      "exp(-x1^2/2)*sin(x2)",
      "sqrt(1 + r^2)",
      "log(2 + x1^2 + x2^2)/(1 + x3^2)",
      "atan(x1*x2)*cos(x3)",
      "(1 + m/(2*r))^4",
  };
  const ParamMap params{{"m", 1.3}};
  std::mt19937 rng(99u);
  std::uniform_real_distribution<double> coord(0.4, 1.7);
  for (const char* src : sources) {
    const Expr e = Expr::parse(src, 3);
    for (int t = 0; t < 10; ++t) {
      std::array<double, 3> x{coord(rng), coord(rng), coord(rng)};
      const Jet2 jet = e.eval_jet2(x, params);
      const oracles::Deriv2 sym = oracles::symbolic_eval(e, x, params);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
          const double hs = std::max(1.0, std::fabs(sym.h[i][j]));
          CHECK(std::fabs(jet.hess(i, j) - sym.h[i][j]) <= 1e-11 * hs);
        }
    }
  }
}

TEST_CASE("linearity of the jet evaluation") {
  std::mt19937 rng(31337u);
  std::uniform_real_distribution<double> coord(-1.5, 1.5);
  const Expr e1 = Expr::parse("sin(x1)*x2 + x1^3", 2);
  const Expr e2 = Expr::parse("exp(x2/2) - x1*x2", 2);
  const double a = 2.75;
  const Expr combo = Expr::constant(a, 2) * e1 + e2;
  for (int t = 0; t < 20; ++t) {
    std::array<double, 2> x{coord(rng), coord(rng)};
    const Jet2 j1 = e1.eval_jet2(x);
    const Jet2 j2 = e2.eval_jet2(x);
    const Jet2 jc = combo.eval_jet2(x);
    CHECK(std::fabs(jc.v - (a * j1.v + j2.v)) <=
          1e-14 * std::max(1.0, std::fabs(jc.v)));
    for (int i = 0; i < 2; ++i) {
      CHECK(std::fabs(jc.grad(i) - (a * j1.grad(i) + j2.grad(i))) <=
            1e-14 * std::max(1.0, std::fabs(jc.grad(i))));
      for (int j = i; j < 2; ++j)
        CHECK(std::fabs(jc.hess(i, j) - (a * j1.hess(i, j) + j2.hess(i, j))) <=
              1e-14 * std::max(1.0, std::fabs(jc.hess(i, j))));
    }
  }
}

TEST_CASE("domain errors carry the offending subexpression") {
  const Expr e = Expr::parse("sqrt(x1 - 5)", 1);
  try {
    e.eval_jet2(std::array{1.0});
    CHECK(false);
  } catch (const DomainError& err) {
    CHECK(err.subexpression == "sqrt(x1 - 5)");
  }
  CHECK_THROWS_AS(Expr::parse("log(x1)", 1).eval_jet2(std::array{-1.0}),
                  DomainError);
  CHECK_THROWS_AS(Expr::parse("1/x1", 1).eval_jet2(std::array{0.0}),
                  DomainError);
  CHECK_THROWS_AS(Expr::parse("x1^0.5", 1).eval_jet2(std::array{-2.0}),
                  DomainError);
  // unbound parameter
  CHECK_THROWS_AS(Expr::parse("q*x1", 1).eval_jet2(std::array{1.0}), Error);
}

TEST_CASE("integer powers are exact at nonpositive bases") {
  const Expr e = Expr::parse("x1^3", 1);
  CHECK(jet_value(e, {-2.0}) == -8.0);
  const Expr f = Expr::parse("x1^(-2)", 1);
  CHECK(jet_value(f, {-2.0}) == 0.25);
}

TEST_CASE("substitution and symbolic derivative") {
  // restrict r to a hyperplane: r expands through the replacements
  const Expr e = Expr::parse("r^2", 3);
  const std::vector<Expr> repl{Expr::variable(0, 2), Expr::variable(1, 2),
                               Expr::constant(5.0, 2)};
  const Expr restricted = e.substitute(repl, 2);
  CHECK(jet_value(restricted, {3.0, 4.0}) == doctest::Approx(50.0));

  const Expr d = Expr::parse("x1^3 + x1*x2", 2).derivative(0);
  CHECK(jet_value(d, {2.0, 7.0}) == doctest::Approx(19.0));
  // derivative of the radial symbol
  const Expr dr = Expr::parse("r", 2).derivative(1);
  CHECK(jet_value(dr, {3.0, 4.0}) == doctest::Approx(0.8));
}

TEST_CASE("evaluation is pure and bit-reproducible") {
  const Expr e = Expr::parse("exp(sin(x1*x2))/(1 + r^2) + m*x1^3", 2);
  const std::array<double, 2> x{0.731, -1.417};
  const ParamMap params{{"m", 2.25}};
  const Jet2 a = e.eval_jet2(x, params);
  const Jet2 b = e.eval_jet2(x, params);
  CHECK(a.v == b.v);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.grad(i) == b.grad(i));
    for (int j = i; j < 2; ++j) CHECK(a.hess(i, j) == b.hess(i, j));
  }
  CHECK(e.eval(x, params) == e.eval(x, params));
}

TEST_CASE("parameters are late-bound by name") {
  const Expr e = Expr::parse("(1 + m/(2*r))^4", 3);
  const std::array<double, 3> x{10.0, 0.0, 0.0};
  const double v1 = e.eval(x, {{"m", 1.0}});
  const double v2 = e.eval(x, {{"m", 2.0}});
  CHECK(v1 == doctest::Approx(std::pow(1.05, 4)).epsilon(1e-15));
  CHECK(v2 == doctest::Approx(std::pow(1.10, 4)).epsilon(1e-15));
  const Expr bound = e.bind({{"m", 1.0}});
  CHECK(bound.parameters().empty());
  CHECK(bound.eval(x) == v1);
}

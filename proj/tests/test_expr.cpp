#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "psifrac/error.hpp"
#include "psifrac/expr.hpp"
#include "psifrac/special_functions.hpp"
#include "expr_properties.hpp"

using namespace psifrac;
using namespace psifrac::expr;

namespace {

using Env = std::map<std::string, double, std::less<>>;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::validation;
}

}  // namespace

TEST_CASE("parse: precedence and associativity") {
  const auto e = parse("t^2 - 1");
  CHECK(same(e, binary(BinOp::sub, binary(BinOp::pow, variable("t"), constant(2)), constant(1))));
  CHECK(same(parse("sqrt(t+1)"), unary(Func::sqrt, binary(BinOp::add, variable("t"), constant(1)))));
  CHECK(evaluate(parse("2^3^2"), {}) == 512.0);
  CHECK(evaluate(parse("-2^2"), {}) == -4.0);
  CHECK(evaluate(parse("(-2)^2"), {}) == 4.0);
  CHECK(evaluate(parse("2^-1"), {}) == 0.5);
  CHECK(evaluate(parse("8/4/2"), {}) == 1.0);
  CHECK(evaluate(parse("1 - 2 - 3"), {}) == -4.0);
  CHECK(evaluate(parse("2*-3"), {}) == -6.0);
  CHECK(evaluate(parse("neg(3) + 1.5e1"), {}) == 12.0);
  CHECK(evaluate(parse(".5 + 2E-1"), {}) == doctest::Approx(0.7));
  CHECK(same(parse("--x"), unary(Func::neg, unary(Func::neg, variable("x")))));
}

TEST_CASE("parse: variables") {
  for (const char* v : {"t", "x", "d", "xtau", "s", "alpha", "pi", "e", "x1", "d12"}) {
    CHECK_NOTHROW(parse(v));
  }
  CHECK(code_of([] { parse("y + 1"); }) == ErrorCode::unknown_identifier);
  CHECK(code_of([] { parse("x0"); }) == ErrorCode::unknown_identifier);
  CHECK(code_of([] { parse("foo(t)"); }) == ErrorCode::unknown_identifier);
}

TEST_CASE("parse: errors carry line and column") {
  try {
    parse("t +\n  * 2");
    FAIL("expected syntax error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::syntax);
    CHECK(std::string(e.what()).find("line 2, column 3") != std::string::npos);
  }
  try {
    parse("1 + zz");
    FAIL("expected unknown identifier");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1, column 5") != std::string::npos);
  }
  CHECK(code_of([] { parse(""); }) == ErrorCode::syntax);
  CHECK(code_of([] { parse("(t + 1"); }) == ErrorCode::syntax);
  CHECK(code_of([] { parse("t + 1)"); }) == ErrorCode::syntax);
  CHECK(code_of([] { parse("exp t"); }) == ErrorCode::syntax);
  CHECK(code_of([] { parse("2 $ 3"); }) == ErrorCode::syntax);
  CHECK(code_of([] { parse("2 3"); }) == ErrorCode::syntax);
}

TEST_CASE("evaluate") {
  CHECK(evaluate(parse("gammafn(2.5)"), {}) == doctest::Approx(1.5 * 0.5 * std::sqrt(std::numbers::pi)).epsilon(1e-14));
  CHECK(evaluate(parse("pi"), {}) == std::numbers::pi);
  CHECK(evaluate(parse("e"), {}) == std::numbers::e);
  CHECK(evaluate(parse("ln(e) + cos(0) + sin(0) + exp(0)"), {}) == 3.0);

  SUBCASE("Example 1 Lagrangian against its closed form") {
    const double alpha = 0.5;
    const auto L = parse("(d - s^(1 - alpha)/gammafn(2 - alpha))^2 + t^2 - 1");
    const double t = 0.5;
    const double g = std::pow(t, 1.0 - alpha) / psifrac::gamma(2.0 - alpha);
    CHECK(evaluate(L, {{"t", t}, {"s", t}, {"alpha", alpha}, {"x", t}, {"d", g}}) ==
          doctest::Approx(t * t - 1.0).epsilon(1e-15));
    CHECK(evaluate(L, {{"t", t}, {"s", t}, {"alpha", alpha}, {"x", t}, {"d", g + 0.3}}) ==
          doctest::Approx(0.09 + t * t - 1.0).epsilon(1e-14));
  }
  SUBCASE("errors") {
    CHECK(code_of([] { evaluate(parse("x + 1"), {}); }) == ErrorCode::unbound_variable);
    CHECK(code_of([] { evaluate(parse("ln(0)"), {}); }) == ErrorCode::domain);
    CHECK(code_of([] { evaluate(parse("sqrt(-1)"), {}); }) == ErrorCode::domain);
    CHECK(code_of([] { evaluate(parse("1/0"), {}); }) == ErrorCode::pole);
    CHECK(code_of([] { evaluate(parse("gammafn(-1)"), {}); }) == ErrorCode::pole);
    // non-constant exponent needs a positive base
    CHECK(code_of([] { evaluate(parse("x^t"), {{"x", 0.0}, {"t", 1.0}}); }) == ErrorCode::domain);
    CHECK(evaluate(parse("x^2"), {{"x", -3.0}}) == 9.0);
    CHECK(evaluate(parse("x^(-2)"), {{"x", -2.0}}) == 0.25);
    CHECK(code_of([] { evaluate(parse("x^0.5"), {{"x", -2.0}}); }) == ErrorCode::domain);
  }
  SUBCASE("compiled program matches the tree walk") {
    const auto e = parse("x*sin(t) + d^2/(1 + s) - xtau*exp(-t)");
    const std::vector<std::string> layout{"t", "s", "x", "d", "xtau"};
    const Program prog(e, layout);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
      std::vector<double> v{u(rng), std::fabs(u(rng)), u(rng), u(rng), u(rng)};
      Env env;
      for (std::size_t k = 0; k < layout.size(); ++k) env[layout[k]] = v[k];
      CHECK(prog(v) == evaluate(e, env));
    }
    CHECK(code_of([&] { Program(e, {"t"}); }) == ErrorCode::unbound_variable);
  }
}

TEST_CASE("print") {
  CHECK(print(parse("t^2 - 1")) == "t^2 - 1");
  CHECK(print(parse("((t))")) == "t");
  CHECK(print(parse("-(t + 1)")) == "-(t + 1)");
  CHECK(print(parse("(-2)^2")) == "(-2)^2");
  CHECK(print(parse("(2^3)^2")) == "(2^3)^2");
  CHECK(print(parse("2^3^2")) == "2^3^2");
  CHECK(print(parse("x - (d - t)")) == "x - (d - t)");
  CHECK(print(parse("(x - d) - t")) == "x - d - t");
  CHECK(print(parse("x/(d*t)")) == "x/(d*t)");
  CHECK(print(parse("exp(-x)")) == "exp(-x)");
}

TEST_CASE("round trip: parse(print(e)) == e on 1000 random trees") {
  const auto r = testing::round_trip(1000, 2024);
  INFO(r.first_failure);
  CHECK(r.checked == 1000);
  CHECK(r.failed == 0);
}

TEST_CASE("differentiate") {
  CHECK(print(differentiate(parse("(d - t)^2"), "d")) == "2*(d - t)");
  CHECK(print(differentiate(parse("t^2 - 1"), "x")) == "0");
  CHECK(print(differentiate(parse("x*d + xtau"), "xtau")) == "1");
  CHECK(print(differentiate(parse("3*x"), "x")) == "3");
  CHECK(code_of([] { differentiate(parse("gammafn(x)"), "x"); }) == ErrorCode::non_differentiable);
  CHECK(print(differentiate(parse("gammafn(t)*x"), "x")) == "gammafn(t)");

  SUBCASE("Example 1 dL/dd against central differences at 100 points") {
    const auto L = parse("(d - s^(1 - alpha)/gammafn(2 - alpha))^2 + t^2 - 1");
    const auto dL = differentiate(L, "d");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 100; ++i) {
      const double t = u(rng);
      Env env{{"t", t}, {"s", t}, {"alpha", 0.5}, {"x", u(rng)}, {"d", u(rng) - 1.0}};
      const double h = 1e-6;
      Env up = env;
      Env dn = env;
      up["d"] += h;
      dn["d"] -= h;
      const double fd = (evaluate(L, up) - evaluate(L, dn)) / (2.0 * h);
      CHECK(evaluate(dL, env) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("differentiate agrees with central differences on 1000 random pairs") {
  const auto r = testing::derivative_agreement(1000, 99, 1e-5);
  INFO(r.first_failure);
  CHECK(r.checked == 1000);
  CHECK(r.failed == 0);
}

TEST_CASE("substitute, rename, require_variables") {
  const auto e = parse("s^(alpha + 1)*d");
  const auto fixed = substitute(e, "alpha", 0.5);
  CHECK(print(fixed) == "s^1.5*d");
  CHECK(print(rename(parse("d^2 + d1"), "d", "d1")) == "d1^2 + d1");
  CHECK_NOTHROW(require_variables(parse("sqrt(t + pi)"), {"t"}, "psi"));
  CHECK(code_of([] { require_variables(parse("x + t"), {"t"}, "psi"); }) == ErrorCode::validation);
  CHECK(free_variables(parse("x + t*x - pi")) == std::set<std::string>{"pi", "t", "x"});
}

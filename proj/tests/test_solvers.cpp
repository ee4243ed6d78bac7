#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "psifrac/error.hpp"
#include "psifrac/solvers.hpp"
#include "psifrac/special_functions.hpp"

using namespace psifrac;

namespace {

PsiMap sqrt_psi(double a, double b) {
  return PsiMap([](double t) { return std::sqrt(t + 1.0); }, [](double t) { return 0.5 / std::sqrt(t + 1.0); }, a, b,
                [](double u) { return u * u - 1.0; });
}

LagrangianDef time_only(std::function<double(double)> f) {
  LagrangianDef L;
  L.value = [f](const LagPoint& p) { return f(p.t); };
  L.dx = {[](const LagPoint&) { return 0.0; }};
  L.dd = {[](const LagPoint&) { return 0.0; }};
  L.ddd = [](const LagPoint&) { return 0.0; };
  return L;
}

// (d - g)^2 + t^2 - 1, g = s^(1-alpha)/Gamma(2-alpha)
LagrangianDef example1_lagrangian(double alpha) {
  const double G = psifrac::gamma(2.0 - alpha);
  LagrangianDef L;
  L.value = [alpha, G](const LagPoint& p) {
    const double e = p.d[0] - std::pow(p.s, 1.0 - alpha) / G;
    return e * e + p.t * p.t - 1.0;
  };
  L.dx = {[](const LagPoint&) { return 0.0; }};
  L.dd = {[alpha, G](const LagPoint& p) { return 2.0 * (p.d[0] - std::pow(p.s, 1.0 - alpha) / G); }};
  L.ddd = [](const LagPoint&) { return 2.0; };
  return L;
}

ProblemSpec basic(PsiMap psi, LagrangianDef L, double alpha = 0.5) {
  ProblemSpec p;
  p.psi = std::move(psi);
  p.lagrangian = std::move(L);
  p.orders = {Order::of(alpha)};
  p.x_a = 0.0;
  return p;
}

Path line(const PsiMap& psi) {
  Path x([psi](double t) { return psi(t) - psi(psi.a()); });
  x.with_derivative([](double) { return 1.0; });
  return x;
}

// Example 2: L = d^2 + g^2 + t^2 - 1, M = d g, Phi = int g^2
ProblemSpec example2(PsiMap psi, double alpha) {
  const double G = psifrac::gamma(2.0 - alpha);
  auto g = [alpha, G](double s) { return std::pow(s, 1.0 - alpha) / G; };
  LagrangianDef L;
  L.value = [g](const LagPoint& p) { return p.d[0] * p.d[0] + g(p.s) * g(p.s) + p.t * p.t - 1.0; };
  L.dx = {[](const LagPoint&) { return 0.0; }};
  L.dd = {[](const LagPoint& p) { return 2.0 * p.d[0]; }};
  LagrangianDef M;
  M.value = [g](const LagPoint& p) { return p.d[0] * g(p.s); };
  M.dx = {[](const LagPoint&) { return 0.0; }};
  M.dd = {[g](const LagPoint& p) { return g(p.s); }};
  auto p = basic(psi, L, alpha);
  p.kind = ProblemKind::isoperimetric;
  p.constraint = M;
  const double ua = psi(psi.a());
  p.dphi = [psi, ua, g](double t) { return g(psi(t) - ua) * g(psi(t) - ua); };
  p.lambda = -2.0;
  return p;
}

}  // namespace

TEST_CASE("terminal time") {
  SUBCASE("Example 1") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = basic(psi, example1_lagrangian(0.5));
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 512);
    const double T = find_terminal_time(p, line(psi), {}, grid);
    CHECK(T == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("counterexample 1 - t") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = basic(psi, time_only([](double t) { return 1.0 - t; }));
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 64);
    CHECK(find_terminal_time(p, line(psi), {}, grid) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("linear root with shifted a") {
    const auto psi = PsiMap::identity(2.0, 4.0);
    const auto p = basic(psi, time_only([](double t) { return t - 2.0 - 0.5; }));
    const auto grid = QuadGrid::uniform_in_psi(psi, 2.0, 4.0, 64);
    RootConfig cfg;
    cfg.tol_x = 1e-10;
    const double T = find_terminal_time(p, line(psi), cfg, grid);
    CHECK(T == doctest::Approx(2.5).epsilon(1e-12));
    // sign change across T +- tol_x
    CHECK((T - cfg.tol_x - 2.5) * (T + cfg.tol_x - 2.5) <= 0.0);
  }
  SUBCASE("errors") {
    const auto psi = PsiMap::identity(0.0, 1.0);
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 1.0, 64);
    const auto p = basic(psi, time_only([](double t) { return 1.0 + t; }));
    try {
      find_terminal_time(p, line(psi), {}, grid);
      FAIL("expected no_sign_change");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_sign_change);
    }
    const auto q = basic(psi, time_only([](double t) { return std::atan(1e6 * (t - 0.3)) + 1e-3 * (t - 0.3); }));
    RootConfig cfg;
    cfg.max_iter = 2;
    try {
      find_terminal_time(q, line(psi), cfg, grid);
      FAIL("expected max_iter");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::max_iter);
    }
    RootConfig bad;
    bad.bracket = std::array<double, 2>{0.5, 0.2};
    CHECK_THROWS_AS(find_terminal_time(q, line(psi), bad, grid), Error);
  }
}

TEST_CASE("isoperimetric solve") {
  SUBCASE("Example 2 with lambda = -2") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = example2(psi, 0.5);
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 512);
    const auto sol = solve_isoperimetric(p, line(psi), {}, grid);
    CHECK(sol.lambda_from_hint);
    CHECK(sol.lambda == -2.0);
    const double g = std::pow(sol.T, 0.5) / psifrac::gamma(1.5);
    CHECK(std::fabs(sol.T * sol.T - 1.0 + 2.0 * g * g) <= 1e-10);
    // T^2 + (8/pi) T - 1 = 0
    const double c = 8.0 / std::numbers::pi;
    CHECK(sol.T == doctest::Approx(0.5 * (-c + std::sqrt(c * c + 4.0))).epsilon(1e-10));
    CHECK(sol.constraint_defect <= 1e-6);
  }
  SUBCASE("Example 2 with psi = sqrt(t+1)") {
    const auto psi = sqrt_psi(0.0, 3.0);
    const auto p = example2(psi, 0.5);
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 3.0, 1024);
    const auto sol = solve_isoperimetric(p, line(psi), {}, grid);
    const double g = std::pow(psi(sol.T) - 1.0, 0.5) / psifrac::gamma(1.5);
    CHECK(std::fabs(sol.T * sol.T - 1.0 + 2.0 * g * g) <= 1e-9);
  }
  SUBCASE("constraint identically true, F = T - 1") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    auto p = basic(psi, time_only([](double t) { return t - 1.0; }));
    p.kind = ProblemKind::isoperimetric;
    p.constraint = time_only([](double) { return 0.0; });
    p.phi = [](double) { return 0.0; };
    p.dphi = [](double) { return 0.0; };
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 64);
    for (double hint : {-5.0, 0.0, 7.0}) {
      p.lambda = hint;
      const auto sol = solve_isoperimetric(p, line(psi), {}, grid);
      CHECK(sol.T == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(sol.lambda == hint);
    }
    p.lambda.reset();
    CHECK_THROWS_AS(solve_isoperimetric(p, line(psi), {}, grid), Error);
  }
  SUBCASE("synthetic system with root (3, 0.7)") {
    // M = 1, Phi = T^2/0.7: defect T (1 - T/0.7); L = t + 2.3, M - Phi' = -1 at 0.7
    const auto psi = PsiMap::identity(0.0, 1.0);
    auto p = basic(psi, time_only([](double t) { return t + 2.3; }));
    p.kind = ProblemKind::isoperimetric;
    p.constraint = time_only([](double) { return 1.0; });
    p.phi = [](double T) { return T * T / 0.7; };
    p.dphi = [](double T) { return 2.0 * T / 0.7; };
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 1.0, 128);
    RootConfig cfg;
    cfg.bracket = std::array<double, 2>{0.3, 1.0};
    const auto sol = solve_isoperimetric(p, line(psi), cfg, grid);
    CHECK_FALSE(sol.lambda_from_hint);
    CHECK(sol.T == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(sol.lambda == doctest::Approx(3.0).epsilon(1e-8));
  }
  SUBCASE("no solution in bracket") {
    const auto psi = PsiMap::identity(0.0, 1.0);
    auto p = basic(psi, time_only([](double) { return 1.0; }));
    p.kind = ProblemKind::isoperimetric;
    p.constraint = time_only([](double) { return 1.0; });
    p.phi = [](double T) { return 2.0 * T + 1.0; };
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 1.0, 64);
    try {
      solve_isoperimetric(p, line(psi), {}, grid);
      FAIL("expected no_sign_change");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_sign_change);
    }
  }
}

TEST_CASE("optimal order") {
  SUBCASE("integrand vanishes at the terminal point") {
    for (double al : {0.1, 0.5, 0.9}) {
      const double s = order_terminal_gap(al);
      CHECK(20.0 - std::pow(s, al + 2.0) / 2.0 == doctest::Approx(0.0).epsilon(1e-12).scale(20.0));
    }
  }
  SUBCASE("psi(t) = t") {
    ProblemSpec p;
    p.kind = ProblemKind::optimal_order;
    p.psi = PsiMap::identity(0.0, 10.0);
    p.lagrangian = order_family_lagrangian(0.5);
    p.orders = {Order::of(0.5)};
    p.x_a = 0.0;
    const auto sol = solve_optimal_order(p, {});
    // mpmath root of the derived form
    CHECK(sol.alpha == doctest::Approx(0.267721541575469741).epsilon(1e-9));
    CHECK(std::fabs(sol.integral) <= 1e-6);
    CHECK(sol.T == doctest::Approx(std::pow(40.0, 1.0 / (sol.alpha + 2.0))).epsilon(1e-12));
    CHECK(sol.printed_matches);
    // psi' = 1: both forms agree
    REQUIRE(sol.alpha_other_form);
    CHECK(*sol.alpha_other_form == doctest::Approx(sol.alpha).epsilon(1e-12));
    // sign change across the root
    const auto f = [&](double al) {
      return order_stationarity_integral(p.psi, al, order_terminal_time(p.psi, al), StationarityForm::derived);
    };
    CHECK(f(sol.alpha - 1e-6) * f(sol.alpha + 1e-6) < 0.0);
  }
  SUBCASE("psi(t) = sqrt(t+1)") {
    ProblemSpec p;
    p.kind = ProblemKind::optimal_order;
    p.psi = sqrt_psi(0.0, 80.0);
    p.lagrangian = order_family_lagrangian(0.5);
    p.orders = {Order::of(0.5)};
    p.x_a = 0.0;
    const auto sol = solve_optimal_order(p, {});
    // mpmath root of the derived form
    CHECK(sol.alpha == doctest::Approx(0.588977010747208737).epsilon(1e-9));
    CHECK(std::fabs(sol.integral) <= 1e-6);
    CHECK(std::sqrt(sol.T + 1.0) == doctest::Approx(1.0 + order_terminal_gap(sol.alpha)).epsilon(1e-12));
    CHECK_FALSE(sol.printed_matches);
    CHECK_FALSE(sol.alpha_other_form);
    try {
      solve_optimal_order(p, {}, StationarityForm::printed);
      FAIL("expected no_sign_change");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_sign_change);
    }
  }
  SUBCASE("candidate makes dL/dd vanish") {
    const auto psi = PsiMap::identity(0.0, 10.0);
    const double al = 0.3;
    auto p = basic(psi, order_family_lagrangian(al), al);
    const auto x = order_family_candidate(psi, al);
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 10.0, 512);
    const double T = order_terminal_time(psi, al);
    CHECK(std::fabs(lagrangian_at(p, x, T, grid)) <= 1e-4);
    CHECK(objective(p, x, T, grid) == doctest::Approx(order_objective(psi, al, T)).epsilon(1e-4));
  }
  SUBCASE("kind and bracket checks") {
    ProblemSpec p;
    p.psi = PsiMap::identity(0.0, 10.0);
    CHECK_THROWS_AS(solve_optimal_order(p, {}), Error);
    p.kind = ProblemKind::optimal_order;
    RootConfig cfg;
    cfg.bracket = std::array<double, 2>{0.0, 0.5};
    CHECK_THROWS_AS(solve_optimal_order(p, cfg), Error);
    p.psi = PsiMap::identity(0.0, 2.0);
    try {
      solve_optimal_order(p, {});
      FAIL("expected domain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::domain);
    }
  }
}

TEST_CASE("direct minimization") {
  SUBCASE("Example 1") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = basic(psi, example1_lagrangian(0.5));
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 256);
    MinimizeConfig cfg;
    cfg.basis_size = 2;
    const auto r = direct_minimize(p, cfg, grid);
    CHECK(r.evaluations <= cfg.max_evals + 4);
    CHECK(r.J <= -2.0 / 3.0 + 1e-2);
    CHECK(r.T == doctest::Approx(1.0).epsilon(0.05));
    CHECK(r.coefficients[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::fabs(r.coefficients[1]) <= 0.05);
    const auto again = direct_minimize(p, cfg, grid);
    CHECK(again.J == r.J);
    CHECK(again.T == r.T);
    CHECK(again.coefficients == r.coefficients);
  }
  SUBCASE("x-independent t^2 - 1") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = basic(psi, time_only([](double t) { return t * t - 1.0; }));
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 128);
    MinimizeConfig cfg;
    cfg.basis_size = 1;
    const auto r = direct_minimize(p, cfg, grid);
    CHECK(r.T == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.J == doctest::Approx(-2.0 / 3.0).epsilon(1e-3));
  }
  SUBCASE("quadratic bowl") {
    const auto psi = PsiMap::identity(0.0, 1.0);
    LagrangianDef L;
    L.value = [](const LagPoint& p) { return p.d[0] * p.d[0] + 1.0; };
    const auto p = basic(psi, L);
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 1.0, 128);
    MinimizeConfig cfg;
    cfg.basis_size = 3;
    cfg.T_bracket = std::array<double, 2>{0.5, 1.0};
    const auto r = direct_minimize(p, cfg, grid);
    for (double c : r.coefficients) CHECK(std::fabs(c) <= 1e-3);
    CHECK(r.T == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("best-so-far never exceeds the start") {
    const auto psi = PsiMap::identity(0.0, 2.0);
    const auto p = basic(psi, example1_lagrangian(0.5));
    const auto grid = QuadGrid::uniform_in_psi(psi, 0.0, 2.0, 64);
    const double start = objective(p, DirectMinimum{0.0, {0.0, 0.0}, 1.0}.path(psi), 1.0, grid);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      MinimizeConfig cfg;
      cfg.basis_size = 2;
      cfg.max_evals = 100;
      cfg.seed = seed;
      const auto r = direct_minimize(p, cfg, grid);
      CHECK(r.J <= start);
      CHECK(r.exhausted);
    }
  }
  SUBCASE("config checks") {
    MinimizeConfig cfg;
    cfg.max_evals = 10;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.basis_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}

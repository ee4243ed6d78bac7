#include "psifrac/special_functions.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "psifrac/error.hpp"

namespace psifrac {
namespace {

// Lanczos approximation, g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_sum(double xm1) {
  double acc = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) acc += kLanczos[i] / (xm1 + static_cast<double>(i));
  return acc;
}

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// Exact (n-1)! for small positive integers.
bool exact_factorial(double x, double& out) {
  if (x < 1.0 || x > 30.0 || x != std::floor(x)) return false;
  double f = 1.0;
  for (int k = 2; k < static_cast<int>(x); ++k) f *= k;
  out = f;
  return true;
}

double rgamma(double x) {
  if (is_nonpositive_integer(x)) return 0.0;
  return 1.0 / gamma(x);
}

double ml_series(double alpha, double z) {
  constexpr int kMaxTerms = 5000;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const double log_abs_z = std::log(std::fabs(z));
  const bool negative = z < 0.0;

  // Kahan-compensated sum.
  double sum = 1.0;
  double comp = 0.0;
  double max_term = 1.0;
  double prev_abs = 1.0;
  int small_run = 0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double log_term = k * log_abs_z - log_gamma(alpha * k + 1.0);
    if (log_term > 700.0) {
      throw Error(ErrorCode::convergence,
                  "mittag_leffler: series terms overflow for alpha=" + std::to_string(alpha) +
                      " z=" + std::to_string(z));
    }
    double term = std::exp(log_term);
    const double abs_term = term;
    if (negative && (k % 2 == 1)) term = -term;
    max_term = std::max(max_term, abs_term);

    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;

    const bool decreasing = abs_term <= prev_abs;
    prev_abs = abs_term;
    if (decreasing && abs_term <= kEps * std::fabs(sum)) {
      if (++small_run >= 2) {
        if (max_term * kEps * 64.0 > 1e-10 * std::fabs(sum)) {
          throw Error(ErrorCode::convergence,
                      "mittag_leffler: catastrophic cancellation in series at z=" + std::to_string(z));
        }
        return sum;
      }
    } else {
      small_run = 0;
    }
  }
  throw Error(ErrorCode::convergence, "mittag_leffler: term cap reached before tolerance");
}

// Algebraic tail shared by all asymptotic branches: -sum_{k>=1} z^-k / Gamma(1 - alpha k).
double ml_algebraic_tail(double alpha, double z) {
  double tail = 0.0;
  double zpow = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 30; ++k) {
    zpow /= z;
    const double term = zpow * rgamma(1.0 - alpha * k);
    if (std::fabs(term) > prev && term != 0.0) break;  // asymptotic series starts diverging
    if (term != 0.0) prev = std::fabs(term);
    tail -= term;
    if (prev < 1e-18) break;
  }
  return tail;
}

double ml_asymptotic(double alpha, double z) {
  const double tail = ml_algebraic_tail(alpha, z);
  if (z > 0.0) {
    const double r = std::pow(z, 1.0 / alpha);
    if (r > 700.0) throw Error(ErrorCode::convergence, "mittag_leffler: result overflows");
    return std::exp(r) / alpha + tail;
  }
  if (alpha < 1.0) return tail;
  const double r = std::pow(-z, 1.0 / alpha);
  const double osc = (2.0 / alpha) * std::exp(r * std::cos(std::numbers::pi / alpha)) *
                     std::cos(r * std::sin(std::numbers::pi / alpha));
  return osc + tail;
}

// 0 < alpha < 1, z = -x < 0: E_alpha(-x) = sin(a pi)/(a pi) * int_0^inf exp(-(u x)^(1/a)) / (u^2 + 2u cos(a pi) + 1) du.
// The tail u > 1 is folded onto [0, 1] with v = 1/u.
double ml_negative_laplace(double alpha, double x) {
  using boost::math::quadrature::gauss_kronrod;
  const double c = std::cos(alpha * std::numbers::pi);
  const double inv = 1.0 / alpha;
  auto head = [&](double u) { return std::exp(-std::pow(u * x, inv)) / (u * u + 2.0 * u * c + 1.0); };
  auto tail = [&](double v) {
    if (v == 0.0) return 0.0;
    return std::exp(-std::pow(x / v, inv)) / (1.0 + 2.0 * v * c + v * v);
  };
  double err = 0.0;
  const double sum = gauss_kronrod<double, 61>::integrate(head, 0.0, 1.0, 20, 1e-14, &err) +
                     gauss_kronrod<double, 61>::integrate(tail, 0.0, 1.0, 20, 1e-14, &err);
  return std::sin(alpha * std::numbers::pi) / (alpha * std::numbers::pi) * sum;
}

}  // namespace

double gamma(double x) {
  if (std::isnan(x)) return x;
  if (is_nonpositive_integer(x)) {
    throw Error(ErrorCode::pole, "gamma: pole at x=" + std::to_string(x));
  }
  double exact = 0.0;
  if (exact_factorial(x, exact)) return exact;
  if (x < 0.5) {
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma(1.0 - x));
  }
  const double xm1 = x - 1.0;
  const double t = xm1 + kLanczosG + 0.5;
  // split the power so that t^(x-0.5) does not overflow before exp(-t) scales it
  const double half = std::pow(t, 0.5 * (xm1 + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half * (half * std::exp(-t)) * lanczos_sum(xm1);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::domain, "log_gamma: requires x > 0");
  if (x < 0.5) {
    return std::log(std::numbers::pi / std::fabs(std::sin(std::numbers::pi * x))) - log_gamma(1.0 - x);
  }
  const double xm1 = x - 1.0;
  const double t = xm1 + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (xm1 + 0.5) * std::log(t) - t +
         std::log(lanczos_sum(xm1));
}

double digamma(double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::domain, "digamma: requires x > 0");
  double shift = 0.0;
  while (x < 6.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // Bernoulli terms B2..B12
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double mittag_leffler(MLParams p) {
  if (!(p.alpha > 0.0) || p.alpha > 2.0) {
    throw Error(ErrorCode::domain, "mittag_leffler: alpha must lie in (0, 2]");
  }
  if (p.z == 0.0) return 1.0;
  if (p.alpha == 2.0) {
    return p.z > 0.0 ? std::cosh(std::sqrt(p.z)) : std::cos(std::sqrt(-p.z));
  }
  if (p.alpha < 1.0 && p.z < 0.0) return ml_negative_laplace(p.alpha, -p.z);
  if (std::fabs(p.z) <= 30.0) return ml_series(p.alpha, p.z);
  return ml_asymptotic(p.alpha, p.z);
}

}  // namespace psifrac

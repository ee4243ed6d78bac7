#include "psifrac/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "psifrac/error.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac {

namespace {

using Fn = std::function<double(double)>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kScanPieces = 48;

std::array<double, 2> bracket_or(const RootConfig& cfg, std::array<double, 2> fallback) {
  return cfg.bracket ? *cfg.bracket : fallback;
}

double checked(const Fn& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw Error(ErrorCode::domain, "non-finite function value at " + std::to_string(x));
  return v;
}

// TOMS 748 on [lo, hi] down to a width of 2 tol_x; returns the midpoint of the
// final bracket.
double refine(const Fn& f, double lo, double hi, double flo, double fhi, const RootConfig& cfg) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = static_cast<std::uintmax_t>(cfg.max_iter);
  auto tol = [&](double l, double h) { return std::fabs(h - l) <= 2.0 * cfg.tol_x; };
  const auto r = boost::math::tools::toms748_solve([&](double x) { return checked(f, x); }, lo, hi, flo, fhi, tol, iters);
  const double mid = 0.5 * (r.first + r.second);
  if (!tol(r.first, r.second) && r.first != r.second) {
    if (iters >= static_cast<std::uintmax_t>(cfg.max_iter)) {
      throw Error(ErrorCode::max_iter, "root finder hit max_iter=" + std::to_string(cfg.max_iter));
    }
  }
  const double fm = checked(f, mid);
  if (std::fabs(fm) > cfg.tol_f && r.first != r.second) {
    // the bracket collapsed onto a jump rather than a root
    const double fa = f(r.first);
    const double fb = f(r.second);
    const double best = std::fabs(fa) < std::fabs(fb) ? r.first : r.second;
    if (std::min(std::fabs(fa), std::fabs(fb)) <= cfg.tol_f) return best;
    throw Error(ErrorCode::convergence,
                "bracket collapsed at " + std::to_string(mid) + " with |f| = " + std::to_string(std::fabs(fm)));
  }
  return mid;
}

// First sign change of f on [lo, hi] sampled at kScanPieces + 1 points.
double scan_root(const Fn& f, std::array<double, 2> br, const RootConfig& cfg, const char* what) {
  const double lo = br[0];
  const double hi = br[1];
  double x0 = lo;
  double f0 = checked(f, x0);
  if (f0 == 0.0) return x0;
  for (int k = 1; k <= kScanPieces; ++k) {
    const double x1 = k == kScanPieces ? hi : lo + (hi - lo) * k / kScanPieces;
    const double f1 = checked(f, x1);
    if (f1 == 0.0) return x1;
    if ((f0 < 0.0) != (f1 < 0.0)) return refine(f, x0, x1, f0, f1, cfg);
    x0 = x1;
    f0 = f1;
  }
  throw Error(ErrorCode::no_sign_change, std::string(what) + " does not change sign on [" + std::to_string(lo) + ", " +
                                              std::to_string(hi) + "]");
}

double gk_integral(const Fn& f, double lo, double hi) {
  if (hi <= lo) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-11, &err);
}

ProblemSpec with_lagrangian(const ProblemSpec& p, const LagrangianDef& L) {
  ProblemSpec q = p;
  q.lagrangian = L;
  return q;
}

double phi_at(const ProblemSpec& p, double T) {
  if (p.phi) return p.phi(T);
  return gk_integral(p.dphi, p.a(), T);
}

double dphi_at(const ProblemSpec& p, double T) {
  if (p.dphi) return p.dphi(T);
  const double h = 1e-6 * std::max(1.0, p.b() - p.a());
  return T + h <= p.b() ? (p.phi(T + h) - p.phi(T - h)) / (2.0 * h) : (p.phi(T) - p.phi(T - h)) / h;
}

Path power_path(const PsiMap& psi, double x_a, std::vector<double> c) {
  const double ua = psi(psi.a());
  auto value = [psi, ua, x_a, c](double t) {
    const double s = psi(t) - ua;
    double v = x_a;
    double sk = 1.0;
    for (double ck : c) {
      sk *= s;
      v += ck * sk;
    }
    return v;
  };
  auto slope = [psi, ua, c](double t) {
    const double s = psi(t) - ua;
    double v = 0.0;
    double sk = 1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      v += static_cast<double>(k + 1) * c[k] * sk;
      sk *= s;
    }
    return v;
  };
  Path x(value);
  x.with_derivative(slope);
  return x;
}

}  // namespace

void RootConfig::validate() const {
  if (bracket && !((*bracket)[0] < (*bracket)[1])) throw Error(ErrorCode::validation, "bracket needs lo < hi");
  if (!(tol_x > 0.0) || !(tol_f > 0.0)) throw Error(ErrorCode::validation, "tolerances must be positive");
  if (max_iter < 1) throw Error(ErrorCode::validation, "max_iter must be positive");
}

void MinimizeConfig::validate() const {
  if (basis_size < 1) throw Error(ErrorCode::validation, "basis_size must be >= 1");
  if (max_evals < 100) throw Error(ErrorCode::validation, "max_evals must be >= 100");
  if (!(simplex_scale > 0.0)) throw Error(ErrorCode::validation, "simplex_scale must be positive");
  if (T_bracket && !((*T_bracket)[0] < (*T_bracket)[1])) throw Error(ErrorCode::validation, "T bracket needs lo < hi");
}

std::array<double, 2> default_time_bracket(const ProblemSpec& p) {
  return {p.a() + 0.01 * (p.b() - p.a()), p.b()};
}

double find_terminal_time(const ProblemSpec& p, const Path& x, const RootConfig& cfg, const QuadGrid& grid) {
  cfg.validate();
  const auto br = bracket_or(cfg, default_time_bracket(p));
  if (!(br[0] > p.a() && br[1] <= p.b())) throw Error(ErrorCode::ordering, "T bracket must lie in (a, b]");
  return scan_root([&](double T) { return lagrangian_at(p, x, T, grid); }, br, cfg, "L[x](t)");
}

IsoperimetricSolution solve_isoperimetric(const ProblemSpec& p, const Path& x, const RootConfig& cfg,
                                          const QuadGrid& grid) {
  cfg.validate();
  if (!p.constraint || !p.constraint->value) throw Error(ErrorCode::validation, "isoperimetric problem needs M");
  if (!p.phi && !p.dphi) throw Error(ErrorCode::validation, "isoperimetric problem needs Phi or Phi'");
  const auto br = bracket_or(cfg, default_time_bracket(p));
  if (!(br[0] > p.a() && br[1] <= p.b())) throw Error(ErrorCode::ordering, "T bracket must lie in (a, b]");

  const auto m_spec = with_lagrangian(p, *p.constraint);
  auto defect = [&](double T) { return objective(m_spec, x, T, grid) - phi_at(p, T); };
  auto L_at = [&](double T) { return lagrangian_at(p, x, T, grid); };
  auto slack = [&](double T) { return lagrangian_at(m_spec, x, T, grid) - dphi_at(p, T); };

  // F(T) - lambda Phi'(T) = L(T) + lambda (M(T) - Phi'(T)) is linear in lambda,
  // so the inner T-solve and the outer lambda-solve decouple.
  double worst = 0.0;
  double scale = 1.0;
  for (int k = 0; k <= 8; ++k) {
    const double T = br[0] + (br[1] - br[0]) * k / 8.0;
    worst = std::max(worst, std::fabs(defect(T)));
    scale = std::max(scale, std::fabs(phi_at(p, T)));
  }
  IsoperimetricSolution sol;
  if (worst <= 1e-8 * scale) {
    if (!p.lambda) {
      throw Error(ErrorCode::validation, "the constraint holds for every T; a lambda hint is required");
    }
    const double lambda = *p.lambda;
    sol.lambda = lambda;
    sol.lambda_from_hint = true;
    sol.T = scan_root([&](double T) { return L_at(T) + lambda * slack(T); }, br, cfg, "F[x](T) - lambda Phi'(T)");
  } else {
    RootConfig c = cfg;
    sol.T = scan_root(defect, br, c, "constraint defect");
    const double den = slack(sol.T);
    const double num = L_at(sol.T);
    if (std::fabs(den) <= 1e-12 * std::max(1.0, std::fabs(num))) {
      if (!p.lambda) throw Error(ErrorCode::singular, "M(T) = Phi'(T) at the root; lambda is undetermined");
      sol.lambda = *p.lambda;
      sol.lambda_from_hint = true;
    } else {
      sol.lambda = -num / den;
    }
  }
  sol.constraint_defect = std::fabs(defect(sol.T));
  return sol;
}

// --- best fractional order ----------------------------------------------

const char* to_string(StationarityForm form) {
  return form == StationarityForm::derived ? "derived" : "printed";
}

double order_terminal_gap(double alpha) { return std::pow(40.0, 1.0 / (alpha + 2.0)); }

double order_terminal_time(const PsiMap& psi, double alpha) {
  const double target = psi(psi.a()) + order_terminal_gap(alpha);
  if (target > psi(psi.b())) {
    throw Error(ErrorCode::domain, "terminal time for alpha=" + std::to_string(alpha) + " lies beyond b");
  }
  return psi.inverse(target);
}

double order_stationarity_integral(const PsiMap& psi, double alpha, double T, StationarityForm form) {
  const double ua = psi(psi.a());
  const double g = psifrac::gamma(alpha + 2.0);
  const double dg = psifrac::digamma(alpha + 2.0);
  auto f = [&](double t) {
    const double s = psi(t) - ua;
    if (s <= 0.0) return g * dg * 20.0;
    const double p = std::pow(s, alpha + 2.0);
    const double w = form == StationarityForm::printed ? psi.derivative(t) : 1.0;
    return g * (dg * (20.0 - 0.5 * p) - 0.5 * std::log(s) * w * p);
  };
  return gk_integral(f, psi.a(), T);
}

double order_objective(const PsiMap& psi, double alpha, double T) {
  const double ua = psi(psi.a());
  const double g = psifrac::gamma(alpha + 2.0);
  return gk_integral([&](double t) { return g * (20.0 - 0.5 * std::pow(psi(t) - ua, alpha + 2.0)); }, psi.a(), T);
}

LagrangianDef order_family_lagrangian(double alpha) {
  const double g = psifrac::gamma(alpha + 2.0);
  LagrangianDef L;
  L.value = [alpha, g](const LagPoint& p) {
    const double d = p.d[0];
    return std::pow(p.s, alpha) / (2.0 * g) * d * d - std::pow(p.s, alpha + 1.0) * d + 20.0 * g;
  };
  L.dx = {[](const LagPoint&) { return 0.0; }};
  L.dd = {[alpha, g](const LagPoint& p) { return std::pow(p.s, alpha) / g * p.d[0] - std::pow(p.s, alpha + 1.0); }};
  L.dxtau = [](const LagPoint&) { return 0.0; };
  L.dxx = [](const LagPoint&) { return 0.0; };
  L.dxd = [](const LagPoint&) { return 0.0; };
  L.ddd = [alpha, g](const LagPoint& p) { return std::pow(p.s, alpha) / g; };
  return L;
}

Path order_family_candidate(const PsiMap& psi, double alpha) {
  const double ua = psi(psi.a());
  Path x([psi, ua, alpha](double t) { return std::pow(psi(t) - ua, alpha + 1.0); });
  x.with_derivative([psi, ua, alpha](double t) { return (alpha + 1.0) * std::pow(psi(t) - ua, alpha); });
  return x;
}

OptimalOrderSolution solve_optimal_order(const ProblemSpec& p, const RootConfig& cfg, StationarityForm form) {
  cfg.validate();
  if (p.kind != ProblemKind::optimal_order) throw Error(ErrorCode::validation, "problem kind must be optimal-order");
  const auto br = bracket_or(cfg, kDefaultOrderBracket);
  if (!(br[0] > 0.0 && br[1] < 1.0)) throw Error(ErrorCode::validation, "alpha bracket must lie in (0,1)");
  const PsiMap& psi = p.psi;
  auto integral = [&psi](StationarityForm f) {
    return [&psi, f](double al) { return order_stationarity_integral(psi, al, order_terminal_time(psi, al), f); };
  };

  OptimalOrderSolution sol;
  sol.form = form;
  sol.alpha = scan_root(integral(form), br, cfg, "stationarity integral");
  sol.T = order_terminal_time(psi, sol.alpha);
  sol.integral = integral(form)(sol.alpha);
  sol.T_as_printed = psi(psi.a()) + order_terminal_gap(sol.alpha);
  sol.printed_matches = std::fabs(sol.T_as_printed - sol.T) <= 1e-9 * std::max(1.0, std::fabs(sol.T));
  const auto other = form == StationarityForm::derived ? StationarityForm::printed : StationarityForm::derived;
  try {
    sol.alpha_other_form = scan_root(integral(other), br, cfg, "stationarity integral");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::no_sign_change) throw;
  }
  return sol;
}

// --- direct minimization ------------------------------------------------

Path DirectMinimum::path(const PsiMap& psi) const { return power_path(psi, x_a, coefficients); }

DirectMinimum direct_minimize(const ProblemSpec& p, const MinimizeConfig& cfg, const QuadGrid& grid) {
  cfg.validate();
  const auto tb = cfg.T_bracket ? *cfg.T_bracket : default_time_bracket(p);
  if (!(tb[0] > p.a() && tb[1] <= p.b())) throw Error(ErrorCode::ordering, "T bracket must lie in (a, b]");
  const int K = cfg.basis_size;
  const int n = K + 1;
  const double x_a = p.x_a.value_or(0.0);

  DirectMinimum best;
  best.x_a = x_a;
  auto J = [&](const std::vector<double>& y) {
    ++best.evaluations;
    const double T = y[K];
    if (!(T >= tb[0] && T <= tb[1])) return kInf;
    try {
      const double v = objective(p, power_path(p.psi, x_a, {y.begin(), y.begin() + K}), T, grid);
      return std::isfinite(v) ? v : kInf;
    } catch (const Error& e) {
      if (is_validation(e.code())) throw;
      return kInf;
    }
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(0.75, 1.25);
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(n, 0.0));
  simplex[0][K] = std::clamp(0.5 * (p.a() + p.b()), tb[0], tb[1]);
  for (int i = 1; i <= n; ++i) {
    simplex[i] = simplex[0];
    const int axis = i - 1;
    double step = cfg.simplex_scale * jitter(rng);
    if (axis == K) {
      step *= tb[1] - tb[0];
      if (simplex[i][K] + step > tb[1]) step = -step;
    }
    simplex[i][axis] += step;
  }
  std::vector<double> fv(n + 1);
  for (int i = 0; i <= n; ++i) fv[i] = J(simplex[i]);

  std::vector<int> order(n + 1);
  auto affine = [n](const std::vector<double>& base, const std::vector<double>& toward, double c) {
    std::vector<double> y(n);
    for (int j = 0; j < n; ++j) y[j] = base[j] + c * (toward[j] - base[j]);
    return y;
  };
  bool converged = false;
  while (best.evaluations < cfg.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return fv[l] < fv[r]; });
    const int lo = order.front();
    const int hi = order.back();
    const int nh = order[n - 1];

    double diameter = 0.0;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j < n; ++j) diameter = std::max(diameter, std::fabs(simplex[i][j] - simplex[lo][j]));
    }
    if (std::isfinite(fv[hi]) && fv[hi] - fv[lo] <= 1e-12 * (1.0 + std::fabs(fv[lo])) && diameter <= 1e-8) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (int j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;
    }
    const auto xr = affine(centroid, simplex[hi], -1.0);
    const double fr = J(xr);
    if (fr < fv[lo]) {
      const auto xe = affine(centroid, simplex[hi], -2.0);
      const double fe = J(xe);
      if (fe < fr) {
        simplex[hi] = xe;
        fv[hi] = fe;
      } else {
        simplex[hi] = xr;
        fv[hi] = fr;
      }
      continue;
    }
    if (fr < fv[nh]) {
      simplex[hi] = xr;
      fv[hi] = fr;
      continue;
    }
    const bool outside = fr < fv[hi];
    const auto xc = outside ? affine(centroid, xr, 0.5) : affine(centroid, simplex[hi], 0.5);
    const double fc = J(xc);
    if (fc < (outside ? fr : fv[hi])) {
      simplex[hi] = xc;
      fv[hi] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == lo) continue;
      simplex[i] = affine(simplex[lo], simplex[i], 0.5);
      fv[i] = J(simplex[i]);
    }
  }

  const int lo = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  best.coefficients.assign(simplex[lo].begin(), simplex[lo].begin() + K);
  best.T = simplex[lo][K];
  best.J = fv[lo];
  best.exhausted = !converged;
  return best;
}

}  // namespace psifrac

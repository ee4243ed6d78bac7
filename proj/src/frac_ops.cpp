#include "psifrac/frac_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "product_rule.hpp"
#include "psifrac/error.hpp"
#include "psifrac/parallel.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac {
namespace {

constexpr int kProbeNodes = 1024;

double interval_tol(double a, double b) { return 1e-12 * std::max(1.0, b - a); }

void check_point(const PsiMap& psi, double t, const char* op) {
  const double tol = interval_tol(psi.a(), psi.b());
  if (!(t >= psi.a() - tol && t <= psi.b() + tol)) {
    throw Error(ErrorCode::domain, std::string(op) + ": t=" + std::to_string(t) + " outside [a, b]");
  }
}

std::vector<double> map_nodes(const PsiMap& psi, std::span<const double> nodes) {
  std::vector<double> u(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) u[i] = psi(nodes[i]);
  return u;
}

std::vector<double> path_values(const Path& x, std::span<const double> nodes) {
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = x.value(nodes[i]);
  return v;
}

std::vector<double> derivative_values(const Path& x, int k, const PsiMap& psi, std::span<const double> nodes) {
  if (k == 0) return path_values(x, nodes);
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = x.psi_derivative(k, nodes[i], psi);
  return v;
}

// Node values of the n-th derivative used for the linear part of each cell.
// Sampled paths get secant-only cells.
std::vector<double> correction_values(const Path& x, int n, const PsiMap& psi, std::span<const double> nodes) {
  if (n == 1 && x.is_sampled()) return {};
  return derivative_values(x, n, psi, nodes);
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void require_unit_order(Order alpha, const char* op) {
  if (!(alpha.alpha > 0.0 && alpha.alpha < 1.0)) {
    throw Error(ErrorCode::domain, std::string(op) + " requires alpha in (0,1)");
  }
}

}  // namespace

// --- PsiMap -------------------------------------------------------------

PsiMap::PsiMap(RealFn psi, RealFn dpsi, double a, double b, RealFn inverse)
    : psi_(std::move(psi)), dpsi_(std::move(dpsi)), inverse_(std::move(inverse)), a_(a), b_(b) {
  if (!psi_ || !dpsi_) throw Error(ErrorCode::validation, "psi and dpsi must be callable");
  if (!(a_ < b_)) throw Error(ErrorCode::validation, "psi interval requires a < b");
  double prev = psi_(a_);
  for (int i = 0; i <= kProbeNodes; ++i) {
    const double t = a_ + (b_ - a_) * i / kProbeNodes;
    const double v = psi_(t);
    const double dv = dpsi_(t);
    if (!std::isfinite(v) || !std::isfinite(dv) || !(dv > 0.0)) {
      throw Error(ErrorCode::validation, "psi' must be finite and positive on [a, b] (fails at t=" +
                                             std::to_string(t) + ")");
    }
    if (i > 0 && !(v > prev)) {
      throw Error(ErrorCode::validation, "psi must be strictly increasing (fails at t=" + std::to_string(t) + ")");
    }
    prev = v;
  }
}

PsiMap PsiMap::identity(double a, double b) {
  return PsiMap([](double t) { return t; }, [](double) { return 1.0; }, a, b, [](double u) { return u; });
}

double PsiMap::inverse(double u) const {
  if (inverse_) return inverse_(u);
  double lo = a_;
  double hi = b_;
  const double ulo = psi_(lo);
  const double uhi = psi_(hi);
  const double tol = 1e-12 * std::max(1.0, std::fabs(uhi - ulo));
  if (u < ulo - tol || u > uhi + tol) {
    throw Error(ErrorCode::domain, "psi inverse: value " + std::to_string(u) + " outside psi([a, b])");
  }
  if (u <= ulo) return lo;
  if (u >= uhi) return hi;
  // bisect to machine resolution
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (psi_(mid) < u) lo = mid; else hi = mid;
  }
  return std::fabs(psi_(lo) - u) <= std::fabs(psi_(hi) - u) ? lo : hi;
}

// --- Path ---------------------------------------------------------------

Path::Path(RealFn x) : x_(std::move(x)) {
  if (!x_) throw Error(ErrorCode::validation, "path function must be callable");
}

Path Path::from_samples(Samples samples) {
  if (samples.nodes.size() < 2 || samples.nodes.size() != samples.values.size()) {
    throw Error(ErrorCode::validation, "samples need at least two nodes and matching value count");
  }
  for (std::size_t i = 0; i + 1 < samples.nodes.size(); ++i) {
    if (!(samples.nodes[i + 1] > samples.nodes[i])) {
      throw Error(ErrorCode::validation, "sample nodes must be strictly increasing");
    }
  }
  Path p;
  p.samples_ = std::move(samples);
  return p;
}

Path Path::with_samples(RealFn x, Samples samples) {
  Path p = from_samples(std::move(samples));
  if (!x) throw Error(ErrorCode::validation, "path function must be callable");
  for (std::size_t i = 0; i < p.samples_->nodes.size(); ++i) {
    const double diff = std::fabs(x(p.samples_->nodes[i]) - p.samples_->values[i]);
    if (!(diff <= 1e-10)) {
      throw Error(ErrorCode::validation,
                  "analytic and sampled path disagree at t=" + std::to_string(p.samples_->nodes[i]));
    }
  }
  p.x_ = std::move(x);
  return p;
}

Path& Path::with_derivative(RealFn dx_psi) {
  dx_psi_ = std::move(dx_psi);
  return *this;
}

Path& Path::with_higher_derivatives(std::vector<RealFn> higher) {
  higher_ = std::move(higher);
  return *this;
}

double Path::value(double t) const { return x_ ? x_(t) : sample_value(t); }

double Path::sample_value(double t) const {
  const auto& n = samples_->nodes;
  const auto& v = samples_->values;
  if (t <= n.front()) return v.front();
  if (t >= n.back()) return v.back();
  const auto it = std::upper_bound(n.begin(), n.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - n.begin()) - 1;
  const double w = (t - n[j]) / (n[j + 1] - n[j]);
  return (1.0 - w) * v[j] + w * v[j + 1];
}

double Path::sample_slope_u(double t, const PsiMap& psi) const {
  const auto& n = samples_->nodes;
  const auto u = map_nodes(psi, n);
  const auto d = detail::fd_derivative(u, samples_->values);
  if (t <= n.front()) return d.front();
  if (t >= n.back()) return d.back();
  const auto it = std::upper_bound(n.begin(), n.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - n.begin()) - 1;
  const double w = (t - n[j]) / (n[j + 1] - n[j]);
  return (1.0 - w) * d[j] + w * d[j + 1];
}

double Path::fd_step(const PsiMap& psi) { return std::max(1e-6, 1e-8 * (psi.b() - psi.a())); }

double Path::psi_derivative(int k, double t, const PsiMap& psi) const {
  if (k < 0) throw Error(ErrorCode::domain, "derivative order must be non-negative");
  if (k == 0) return value(t);
  if (k == 1) {
    if (dx_psi_) return dx_psi_(t);
    if (!x_) return sample_slope_u(t, psi);
    const double h = fd_step(psi);
    double slope;
    if (t - h < psi.a()) {
      slope = (-3.0 * x_(t) + 4.0 * x_(t + h) - x_(t + 2 * h)) / (2 * h);
    } else if (t + h > psi.b()) {
      slope = (3.0 * x_(t) - 4.0 * x_(t - h) + x_(t - 2 * h)) / (2 * h);
    } else {
      slope = (x_(t + h) - x_(t - h)) / (2 * h);
    }
    return slope / psi.derivative(t);
  }
  const std::size_t idx = static_cast<std::size_t>(k - 2);
  if (idx >= higher_.size() || !higher_[idx]) {
    throw Error(ErrorCode::missing_derivative,
                "path lacks the psi-derivative of order " + std::to_string(k));
  }
  return higher_[idx](t);
}

bool Path::has_analytic(int k) const {
  if (k == 0) return static_cast<bool>(x_);
  if (k == 1) return static_cast<bool>(dx_psi_);
  const std::size_t idx = static_cast<std::size_t>(k - 2);
  return k > 1 && idx < higher_.size() && static_cast<bool>(higher_[idx]);
}

int Path::highest_available_order() const {
  int k = 1;  // order 1 is always available by differencing
  while (has_analytic(k + 1)) ++k;
  return k;
}

// --- Order / grids -------------------------------------------------------

Order Order::of(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::domain, "order alpha must be positive");
  const double fl = std::floor(alpha);
  return {alpha, fl == alpha ? static_cast<int>(fl) : static_cast<int>(fl) + 1};
}

bool Order::is_integer() const { return alpha == std::floor(alpha); }

const char* to_string(GridScheme scheme) {
  return scheme == GridScheme::uniform_in_t ? "uniform-in-t" : "uniform-in-psi";
}

QuadGrid QuadGrid::uniform_in_t(double lo, double hi, int cells) {
  if (cells < 1 || !(lo < hi)) throw Error(ErrorCode::grid, "grid needs lo < hi and at least one cell");
  QuadGrid g;
  g.scheme = GridScheme::uniform_in_t;
  g.nodes.resize(static_cast<std::size_t>(cells) + 1);
  for (int j = 0; j <= cells; ++j) g.nodes[j] = lo + (hi - lo) * j / cells;
  g.nodes.back() = hi;
  return g;
}

QuadGrid QuadGrid::uniform_in_psi(const PsiMap& psi, double lo, double hi, int cells) {
  if (cells < 1 || !(lo < hi)) throw Error(ErrorCode::grid, "grid needs lo < hi and at least one cell");
  QuadGrid g;
  g.scheme = GridScheme::uniform_in_psi;
  g.nodes.resize(static_cast<std::size_t>(cells) + 1);
  const double ulo = psi(lo);
  const double uhi = psi(hi);
  g.nodes.front() = lo;
  g.nodes.back() = hi;
  parallel_for(static_cast<std::size_t>(cells) - 1, [&](std::size_t i) {
    const int j = static_cast<int>(i) + 1;
    g.nodes[j] = psi.inverse(ulo + (uhi - ulo) * j / cells);
  });
  return g;
}

QuadGrid QuadGrid::rebuilt(const PsiMap& psi, double lo, double hi) const {
  return scheme == GridScheme::uniform_in_t ? uniform_in_t(lo, hi, cells()) : uniform_in_psi(psi, lo, hi, cells());
}

std::vector<double> span_nodes(const QuadGrid& grid, double lo, double hi) {
  if (grid.nodes.size() < 2) throw Error(ErrorCode::grid, "grid has fewer than two nodes");
  const double tol = interval_tol(grid.front(), grid.back());
  if (lo < grid.front() - tol || hi > grid.back() + tol || lo > hi) {
    throw Error(ErrorCode::grid, "grid [" + std::to_string(grid.front()) + ", " + std::to_string(grid.back()) +
                                     "] does not span [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  std::vector<double> out{lo};
  if (hi - lo <= tol) return out;
  for (double t : grid.nodes) {
    if (t > lo + tol && t < hi - tol) out.push_back(t);
  }
  out.push_back(hi);
  return out;
}

// --- single-point operators ------------------------------------------------

double frac_integral_left(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid) {
  check_point(psi, t, "frac_integral_left");
  const auto nodes = span_nodes(grid, psi.a(), t);
  if (nodes.size() < 2) return 0.0;
  const auto u = map_nodes(psi, nodes);
  const auto cells = detail::linear_cells(path_values(x, nodes));
  return detail::left_product(u, cells, alpha.alpha);
}

double frac_integral_right(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid) {
  check_point(psi, t, "frac_integral_right");
  const auto nodes = span_nodes(grid, t, psi.b());
  if (nodes.size() < 2) return 0.0;
  const auto u = map_nodes(psi, nodes);
  const auto cells = detail::linear_cells(path_values(x, nodes));
  return detail::right_product(u, cells, alpha.alpha);
}

double caputo_left(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid) {
  check_point(psi, t, "caputo_left");
  if (alpha.is_integer()) return x.psi_derivative(alpha.n, t, psi);
  if (alpha.n > 1) return caputo_left_highorder(x, alpha, psi, t, grid);
  const auto nodes = span_nodes(grid, psi.a(), t);
  if (nodes.size() < 2) return 0.0;
  const auto u = map_nodes(psi, nodes);
  const auto cells =
      detail::derivative_cells(u, path_values(x, nodes), correction_values(x, 1, psi, nodes), 1.0,
                               detail::Terminal::front);
  return detail::left_product(u, cells, 1.0 - alpha.alpha);
}

double caputo_left_highorder(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid) {
  check_point(psi, t, "caputo_left_highorder");
  if (alpha.is_integer()) return x.psi_derivative(alpha.n, t, psi);
  if (!x.has_analytic(alpha.n)) {
    throw Error(ErrorCode::missing_derivative,
                "order " + std::to_string(alpha.alpha) + " needs the psi-derivative of order " +
                    std::to_string(alpha.n));
  }
  const auto nodes = span_nodes(grid, psi.a(), t);
  if (nodes.size() < 2) return 0.0;
  const auto u = map_nodes(psi, nodes);
  const auto cells = detail::derivative_cells(u, derivative_values(x, alpha.n - 1, psi, nodes),
                                              derivative_values(x, alpha.n, psi, nodes), 1.0,
                                              detail::Terminal::front);
  return detail::left_product(u, cells, alpha.n - alpha.alpha);
}

double caputo_right(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid) {
  check_point(psi, t, "caputo_right");
  require_unit_order(alpha, "caputo_right");
  const auto nodes = span_nodes(grid, t, psi.b());
  if (nodes.size() < 2) return 0.0;
  const auto u = map_nodes(psi, nodes);
  const auto cells =
      detail::derivative_cells(u, path_values(x, nodes), correction_values(x, 1, psi, nodes), -1.0,
                               detail::Terminal::back);
  return detail::right_product(u, cells, 1.0 - alpha.alpha);
}

double singular_guard(const PsiMap& psi, double T) { return (psi(T) - psi(psi.a())) * 1e-6; }

double rl_right(const Path& f, Order alpha, const PsiMap& psi, double T, double t, const QuadGrid& grid) {
  require_unit_order(alpha, "rl_right");
  check_point(psi, T, "rl_right");
  check_point(psi, t, "rl_right");
  const double gap = psi(T) - psi(t);
  if (!(gap >= singular_guard(psi, T))) {
    throw Error(ErrorCode::singular, "rl_right: t=" + std::to_string(t) + " is within the singular guard of T=" +
                                         std::to_string(T));
  }
  const auto nodes = span_nodes(grid, t, T);
  const auto u = map_nodes(psi, nodes);
  const auto cells =
      detail::derivative_cells(u, path_values(f, nodes), correction_values(f, 1, psi, nodes), -1.0,
                               detail::Terminal::back);
  const double caputo = detail::right_product(u, cells, 1.0 - alpha.alpha);
  return caputo + f.value(T) * std::pow(gap, -alpha.alpha) / gamma(1.0 - alpha.alpha);
}

// --- whole-grid evaluation -------------------------------------------------

std::vector<double> caputo_left_nodes(const Path& x, Order alpha, const PsiMap& psi, std::span<const double> nodes) {
  if (nodes.size() < 2) return std::vector<double>(nodes.size(), 0.0);
  if (alpha.is_integer()) return derivative_values(x, alpha.n, psi, nodes);
  if (alpha.n > 1 && !x.has_analytic(alpha.n)) {
    throw Error(ErrorCode::missing_derivative,
                "order " + std::to_string(alpha.alpha) + " needs the psi-derivative of order " +
                    std::to_string(alpha.n));
  }
  const auto u = map_nodes(psi, nodes);
  const auto cells = detail::derivative_cells(u, derivative_values(x, alpha.n - 1, psi, nodes),
                                              correction_values(x, alpha.n, psi, nodes), 1.0,
                                              detail::Terminal::front);
  return detail::left_product_all(u, cells, alpha.n - alpha.alpha);
}

std::vector<double> frac_integral_left_sampled(std::span<const double> u, std::span<const double> values,
                                               double order) {
  return detail::left_product_all(u, detail::linear_cells(values), order);
}

std::vector<double> frac_integral_right_sampled(std::span<const double> u, std::span<const double> values,
                                                double order) {
  return detail::right_product_all(u, detail::linear_cells(values), order);
}

std::vector<double> rl_right_sampled(std::span<const double> u, std::span<const double> f, double alpha) {
  const Order ord = Order::of(alpha);
  const std::size_t size = u.size();
  if (size < 3) throw Error(ErrorCode::grid, "sampled right derivative needs at least three nodes");
  // (-d/du)^k f for k = 0..n
  std::vector<std::vector<double>> derivs{std::vector<double>(f.begin(), f.end())};
  for (int k = 1; k <= ord.n; ++k) {
    auto d = detail::fd_derivative(u, derivs.back());
    for (double& v : d) v = -v;
    derivs.push_back(std::move(d));
  }
  if (ord.is_integer()) return derivs.back();

  const auto& top = derivs[ord.n - 1];
  auto slope = detail::fd_derivative(u, top);
  const auto cells = detail::derivative_cells(u, top, slope, -1.0, detail::Terminal::back);
  auto out = detail::right_product_all(u, cells, ord.n - alpha);
  const double uT = u.back();
  for (std::size_t i = 0; i + 1 < size; ++i) {
    double boundary = 0.0;
    for (int k = 0; k < ord.n; ++k) {
      boundary += derivs[k].back() * std::pow(uT - u[i], k - alpha) / gamma(k + 1 - alpha);
    }
    out[i] += boundary;
  }
  out.back() = NAN;
  return out;
}

std::vector<double> caputo_right_sampled(std::span<const double> u, std::span<const double> f, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::domain, "caputo_right_sampled requires alpha in (0,1)");
  if (u.size() < 3) throw Error(ErrorCode::grid, "sampled right derivative needs at least three nodes");
  const auto slope = detail::fd_derivative(u, f);
  const auto cells = detail::derivative_cells(u, f, slope, -1.0, detail::Terminal::back);
  return detail::right_product_all(u, cells, 1.0 - alpha);
}

// --- identity residuals ------------------------------------------------------

double composition_residual_left(const Path& x, Order alpha, const PsiMap& psi, const QuadGrid& grid) {
  const auto nodes = span_nodes(grid, psi.a(), grid.back());
  const auto u = map_nodes(psi, nodes);
  const auto derivative = caputo_left_nodes(x, alpha, psi, nodes);
  // the derivative's limit at a is not resolved by the node value (an empty
  // integral), so the first cell carries its neighbour's value
  auto cells = detail::linear_cells(derivative);
  cells.front().left = cells.front().right;
  const auto recovered = detail::left_product_all(u, cells, alpha.alpha);

  std::vector<double> taylor(static_cast<std::size_t>(alpha.n));
  for (int k = 0; k < alpha.n; ++k) taylor[k] = x.psi_derivative(k, psi.a(), psi) / factorial(k);

  double worst = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double s = u[i] - u[0];
    double poly = 0.0;
    for (int k = alpha.n - 1; k >= 0; --k) poly = poly * s + taylor[k];
    worst = std::max(worst, std::fabs(recovered[i] - (x.value(nodes[i]) - poly)));
  }
  return worst;
}

double integration_by_parts_residual(const Path& x, const Path& y, Order alpha, const PsiMap& psi,
                                     const QuadGrid& grid) {
  require_unit_order(alpha, "integration_by_parts_residual");
  const auto nodes = span_nodes(grid, psi.a(), psi.b());
  const auto u = map_nodes(psi, nodes);
  const std::size_t size = nodes.size();

  std::vector<double> f(size);  // x / psi'
  std::vector<double> yv(size);
  for (std::size_t i = 0; i < size; ++i) {
    f[i] = x.value(nodes[i]) / psi.derivative(nodes[i]);
    yv[i] = y.value(nodes[i]);
  }

  // Leading terms of both derivatives at their terminals behave like
  // c (distance)^(1 - alpha); they are integrated exactly and the trapezoid
  // sees only the smoother remainder.
  const double g2 = gamma(2.0 - alpha.alpha);
  double dy_a = y.psi_derivative(1, psi.a(), psi);
  if (!std::isfinite(dy_a)) dy_a = 0.0;
  const double df_b = detail::fd_derivative(u, f).back();

  // LHS: int x * cD_{a+} y dt = int (x/psi') * cD y du
  const auto dy = caputo_left_nodes(y, alpha, psi, nodes);
  std::vector<double> lhs_integrand(size);
  for (std::size_t i = 0; i < size; ++i) {
    lhs_integrand[i] = f[i] * (dy[i] - dy_a * std::pow(u[i] - u.front(), 1.0 - alpha.alpha) / g2);
  }
  const double lhs = detail::trapezoid(u, lhs_integrand) +
                     dy_a * detail::right_product(u, detail::linear_cells(f), 2.0 - alpha.alpha);

  // RHS: D_{b-} f = cD_{b-} f + f(b) (u_b - u)^{-alpha} / Gamma(1 - alpha)
  const auto cf = caputo_right_sampled(u, f, alpha.alpha);
  std::vector<double> rhs_integrand(size);
  for (std::size_t i = 0; i < size; ++i) {
    rhs_integrand[i] = (cf[i] + df_b * std::pow(u.back() - u[i], 1.0 - alpha.alpha) / g2) * yv[i];
  }
  const double regular = detail::trapezoid(u, rhs_integrand) -
                         df_b * detail::left_product(u, detail::linear_cells(yv), 2.0 - alpha.alpha);
  const double singular =
      f.back() * detail::left_product(u, detail::linear_cells(yv), 1.0 - alpha.alpha);
  const double i_right_at_a = detail::right_product(u, detail::linear_cells(f), 1.0 - alpha.alpha);
  const double bracket = -i_right_at_a * yv.front();
  return std::fabs(lhs - (regular + singular + bracket));
}

}  // namespace psifrac

#include "psifrac/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "product_rule.hpp"
#include "psifrac/error.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct NodeSet {
  std::vector<double> t;
  std::vector<double> u;
  std::vector<double> dpsi;
};

NodeSet make_nodes(const PsiMap& psi, std::vector<double> t) {
  NodeSet ns;
  ns.u.resize(t.size());
  ns.dpsi.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    ns.u[i] = psi(t[i]);
    ns.dpsi[i] = psi.derivative(t[i]);
  }
  ns.t = std::move(t);
  return ns;
}

void check_terminal(const ProblemSpec& p, double T) {
  const double tol = 1e-12 * std::max(1.0, p.b() - p.a());
  if (!(T > p.a() && T <= p.b() + tol)) {
    throw Error(ErrorCode::ordering, "terminal time T=" + std::to_string(T) + " outside (a, b]");
  }
}

// Grid of the same scheme and size rebuilt on [a, T], with extra nodes merged in.
std::vector<double> terminal_nodes(const ProblemSpec& p, const QuadGrid& grid, double T,
                                   std::initializer_list<double> extra = {}) {
  if (grid.cells() < 4) throw Error(ErrorCode::grid, "residual evaluation needs at least four grid cells");
  auto nodes = grid.rebuilt(p.psi, p.a(), T).nodes;
  const double tol = 1e-12 * std::max(1.0, T - p.a());
  for (double e : extra) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), e);
    const bool near_next = it != nodes.end() && std::fabs(*it - e) <= tol;
    const bool near_prev = it != nodes.begin() && std::fabs(*(it - 1) - e) <= tol;
    if (near_next) {
      *it = e;
    } else if (near_prev) {
      *(it - 1) = e;
    } else {
      nodes.insert(it, e);
    }
  }
  return nodes;
}

std::size_t index_of(std::span<const double> t, double value) {
  auto it = std::lower_bound(t.begin(), t.end(), value);
  if (it == t.end()) return t.size() - 1;
  if (it != t.begin() && std::fabs(*(it - 1) - value) < std::fabs(*it - value)) --it;
  return static_cast<std::size_t>(it - t.begin());
}

struct DerivSpec {
  std::size_t path;
  Order order;
};

double delayed_value(const ProblemSpec& p, const Path& x, double t) {
  if (!p.tau) return 0.0;
  const double s = t - *p.tau;
  if (s < p.a()) {
    if (!p.history) throw Error(ErrorCode::validation, "delay problem needs a history function");
    return p.history(s);
  }
  return x.value(s);
}

std::vector<LagPoint> lag_points(const ProblemSpec& p, const NodeSet& ns, const std::vector<const Path*>& paths,
                                 const std::vector<DerivSpec>& derivs) {
  std::vector<std::vector<double>> d;
  d.reserve(derivs.size());
  for (const auto& spec : derivs) d.push_back(caputo_left_nodes(*paths[spec.path], spec.order, p.psi, ns.t));
  const double ua = p.psi(p.a());
  std::vector<LagPoint> pts(ns.t.size());
  for (std::size_t i = 0; i < ns.t.size(); ++i) {
    LagPoint& pt = pts[i];
    pt.t = ns.t[i];
    pt.s = ns.u[i] - ua;
    pt.alpha = derivs.front().order.alpha;
    pt.x.resize(paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) pt.x[k] = paths[k]->value(pt.t);
    pt.d.resize(derivs.size());
    for (std::size_t k = 0; k < derivs.size(); ++k) pt.d[k] = d[k][i];
    pt.xtau = delayed_value(p, *paths.front(), pt.t);
  }
  return pts;
}

// Layout of a single-path problem: one derivative, or one per order for
// high-order problems.
std::vector<DerivSpec> single_layout(const ProblemSpec& p) {
  if (p.orders.empty()) throw Error(ErrorCode::validation, "problem has no fractional order");
  if (p.kind == ProblemKind::high_order) {
    std::vector<DerivSpec> out;
    for (const auto& o : p.orders) out.push_back({0, o});
    return out;
  }
  return {{0, p.orders.front()}};
}

const LagFn& require_fn(const LagFn& fn, const char* name) {
  if (!fn) throw Error(ErrorCode::missing_derivative, std::string("Lagrangian partial ") + name + " not supplied");
  return fn;
}

const LagFn& partial(const std::vector<LagFn>& fns, std::size_t i, const char* name) {
  if (i >= fns.size()) {
    throw Error(ErrorCode::missing_derivative, std::string("Lagrangian partial ") + name + "[" + std::to_string(i) +
                                                   "] not supplied");
  }
  return require_fn(fns[i], name);
}

std::vector<double> eval(const LagFn& fn, const std::vector<LagPoint>& pts) {
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = fn(pts[i]);
  return out;
}

std::vector<double> over_dpsi(std::vector<double> v, const NodeSet& ns) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= ns.dpsi[i];
  return v;
}

// D_{T-}^alpha f at every node, T = last node.
std::vector<double> right_rl(std::span<const double> u, std::span<const double> f, double alpha, ElMode mode) {
  if (mode == ElMode::riemann_liouville || alpha >= 1.0) return rl_right_sampled(u, f, alpha);
  auto out = caputo_right_sampled(u, f, alpha);
  const double uT = u.back();
  const double scale = f.back() / gamma(1.0 - alpha);
  for (std::size_t i = 0; i + 1 < u.size(); ++i) out[i] += scale * std::pow(uT - u[i], -alpha);
  out.back() = kNaN;
  return out;
}

// Limit of values at the last node from the nodes nearest end - delta and
// end - delta/2, assuming values ~ v0 + c * (u_end - u)^p.
double terminal_limit(std::span<const double> t, std::span<const double> u, std::span<const double> values,
                      double delta, double p) {
  const std::size_t last = t.size() - 1;
  if (last < 2) return kNaN;
  std::size_t i1 = index_of(t, t.back() - delta);
  std::size_t i2 = index_of(t, t.back() - 0.5 * delta);
  i2 = std::min(i2, last - 1);
  if (i1 >= i2) i1 = i2 - 1;
  const double e1 = std::pow(u.back() - u[i1], p);
  const double e2 = std::pow(u.back() - u[i2], p);
  if (e1 == e2) return values[i2];
  return (values[i2] * e1 - values[i1] * e2) / (e1 - e2);
}

double fd_step_of(const Path& x, const PsiMap& psi) {
  return x.has_analytic(1) || x.is_sampled() ? 0.0 : Path::fd_step(psi);
}

ResidualReport assemble(const NodeSet& ns, const std::vector<double>& residual, double lo, double hi,
                        const std::vector<char>& excluded, const QuadGrid& grid, double h_fd) {
  ResidualReport r;
  r.window = {lo, hi};
  r.grid_meta = {grid.cells(), grid.scheme, h_fd};
  r.el_nodes.resize(ns.t.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < ns.t.size(); ++i) {
    const bool in = ns.t[i] >= lo && ns.t[i] <= hi && std::isfinite(residual[i]) && (excluded.empty() || !excluded[i]);
    r.el_nodes[i] = {ns.t[i], ns.u[i], residual[i], in};
    if (in) worst = std::max(worst, std::fabs(residual[i]));
  }
  r.el_max = worst;
  return r;
}

double window_delta(double a, double T) { return kWindowFraction * (T - a); }

// Integral of values dt over the nodes, computed in u with 1/psi'.
double integrate_dt(const NodeSet& ns, std::span<const double> values) {
  std::vector<double> g(values.begin(), values.end());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] /= ns.dpsi[i];
  const std::size_t cells = g.size() - 1;
  if (cells % 2 != 0) return detail::trapezoid(ns.u, g);
  double acc = 0.0;
  for (std::size_t j = 0; j + 2 < g.size(); j += 2) {
    // Simpson on the uneven pair [u_j, u_{j+2}]
    const double h0 = ns.u[j + 1] - ns.u[j];
    const double h1 = ns.u[j + 2] - ns.u[j + 1];
    const double hs = h0 + h1;
    acc += hs / 6.0 *
           ((2.0 - h1 / h0) * g[j] + hs * hs / (h0 * h1) * g[j + 1] + (2.0 - h0 / h1) * g[j + 2]);
  }
  return acc;
}

struct ElCore {
  NodeSet ns;
  std::vector<LagPoint> pts;
  std::vector<std::vector<double>> f;  // dL/dd_i / psi'
  std::vector<std::vector<double>> rl;  // D_{T-}^{alpha_i} f_i * psi'
};

ElCore el_core(const ProblemSpec& p, const LagrangianDef& L, std::vector<double> nodes,
               const std::vector<const Path*>& paths, const std::vector<DerivSpec>& derivs, ElMode mode) {
  ElCore core;
  core.ns = make_nodes(p.psi, std::move(nodes));
  core.pts = lag_points(p, core.ns, paths, derivs);
  for (std::size_t k = 0; k < derivs.size(); ++k) {
    core.f.push_back(over_dpsi(eval(partial(L.dd, k, "dL/dd"), core.pts), core.ns));
    auto d = right_rl(core.ns.u, core.f.back(), derivs[k].order.alpha, mode);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= core.ns.dpsi[i];
    core.rl.push_back(std::move(d));
  }
  return core;
}

double transversality(const ElCore& core, std::size_t k, double order, double a, double T) {
  const auto I = frac_integral_right_sampled(core.ns.u, core.f[k], order);
  return terminal_limit(core.ns.t, core.ns.u, I, window_delta(a, T), order);
}

std::vector<ResidualReport> multi_reports(const ProblemSpec& p, const LagrangianDef& L, const std::vector<Path>& xs,
                                          const std::vector<Order>& alphas, double T, const QuadGrid& grid,
                                          ElMode mode) {
  if (xs.empty() || xs.size() != alphas.size()) {
    throw Error(ErrorCode::arity, "need one order per dependent variable (got " + std::to_string(xs.size()) +
                                      " paths, " + std::to_string(alphas.size()) + " orders)");
  }
  for (const auto& o : alphas) {
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw Error(ErrorCode::validation, "orders must lie in (0,1)");
  }
  check_terminal(p, T);
  std::vector<const Path*> paths;
  std::vector<DerivSpec> derivs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    paths.push_back(&xs[i]);
    derivs.push_back({i, alphas[i]});
  }
  const auto core = el_core(p, L, terminal_nodes(p, grid, T), paths, derivs, mode);
  const double delta = window_delta(p.a(), T);
  const double lagrangian_T = require_fn(L.value, "L")(core.pts.back());
  std::vector<ResidualReport> reports;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto res = eval(partial(L.dx, i, "dL/dx"), core.pts);
    for (std::size_t j = 0; j < res.size(); ++j) res[j] += core.rl[i][j];
    auto r = assemble(core.ns, res, p.a() + delta, T - delta, {}, grid, fd_step_of(xs[i], p.psi));
    r.trans_integral = transversality(core, i, 1.0 - alphas[i].alpha, p.a(), T);
    r.trans_lagrangian = lagrangian_T;
    reports.push_back(std::move(r));
  }
  return reports;
}

Path sum_path(const Path& x, const Path& v, const PsiMap& psi) {
  Path out([x, v](double t) { return x.value(t) + v.value(t); });
  if (x.has_analytic(1) && v.has_analytic(1)) {
    out.with_derivative([x, v, psi](double t) { return x.psi_derivative(1, t, psi) + v.psi_derivative(1, t, psi); });
  }
  return out;
}

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

double lerp(const std::array<double, 2>& range, double q) { return range[0] + (range[1] - range[0]) * q; }

LagPoint scalar_point(double t, double s, double alpha, double x, double d, double xtau) {
  LagPoint pt;
  pt.t = t;
  pt.s = s;
  pt.alpha = alpha;
  pt.x = {x};
  pt.d = {d};
  pt.xtau = xtau;
  return pt;
}

}  // namespace

// --- LagrangianDef -----------------------------------------------------------

LagrangianDef LagrangianDef::scalar(std::function<double(double, double, double)> L,
                                    std::function<double(double, double, double)> dL_dx,
                                    std::function<double(double, double, double)> dL_dd) {
  LagrangianDef def;
  def.value = [L](const LagPoint& p) { return L(p.t, p.x[0], p.d[0]); };
  def.dx = {[dL_dx](const LagPoint& p) { return dL_dx(p.t, p.x[0], p.d[0]); }};
  def.dd = {[dL_dd](const LagPoint& p) { return dL_dd(p.t, p.x[0], p.d[0]); }};
  return def;
}

LagrangianDef LagrangianDef::combine(const LagrangianDef& l1, double c, const LagrangianDef& l2) {
  auto mix = [c](const LagFn& f1, const LagFn& f2) -> LagFn {
    if (!f1 || !f2) return {};
    return [f1, f2, c](const LagPoint& p) { return f1(p) + c * f2(p); };
  };
  auto mix_all = [&](const std::vector<LagFn>& v1, const std::vector<LagFn>& v2) {
    std::vector<LagFn> out(std::min(v1.size(), v2.size()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mix(v1[i], v2[i]);
    return out;
  };
  LagrangianDef def;
  def.value = mix(l1.value, l2.value);
  def.dx = mix_all(l1.dx, l2.dx);
  def.dd = mix_all(l1.dd, l2.dd);
  def.dxtau = mix(l1.dxtau, l2.dxtau);
  def.dxx = mix(l1.dxx, l2.dxx);
  def.dxd = mix(l1.dxd, l2.dxd);
  def.ddd = mix(l1.ddd, l2.ddd);
  return def;
}

double partials_defect(const LagrangianDef& L, const ProbeBox& box, int samples, std::uint64_t seed) {
  require_fn(L.value, "L");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  // central difference in one argument, step relative to its magnitude
  auto check = [&](const LagFn& fn, const LagPoint& pt, auto arg) {
    LagPoint plus = pt;
    LagPoint minus = pt;
    const double step = 1e-6 * std::max(1.0, std::fabs(arg(plus)));
    arg(plus) += step;
    arg(minus) -= step;
    const double fd = (L.value(plus) - L.value(minus)) / (2.0 * step);
    worst = std::max(worst, std::fabs(fn(pt) - fd) / std::max(1.0, std::fabs(fd)));
  };
  for (int i = 0; i < samples; ++i) {
    const double t = lerp(box.t, unit(rng));
    // s is measured from the start of the box
    const LagPoint pt = scalar_point(t, t - box.t[0], box.alpha, lerp(box.x, unit(rng)), lerp(box.d, unit(rng)),
                                     lerp(box.x, unit(rng)));
    if (!L.dx.empty() && L.dx[0]) check(L.dx[0], pt, [](LagPoint& q) -> double& { return q.x[0]; });
    if (!L.dd.empty() && L.dd[0]) check(L.dd[0], pt, [](LagPoint& q) -> double& { return q.d[0]; });
    if (L.dxtau) check(L.dxtau, pt, [](LagPoint& q) -> double& { return q.xtau; });
  }
  return worst;
}

// --- ProblemSpec -----------------------------------------------------------------

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::fundamental: return "fundamental";
    case ProblemKind::extended: return "extended";
    case ProblemKind::isoperimetric: return "isoperimetric";
    case ProblemKind::delay: return "delay";
    case ProblemKind::high_order: return "high_order";
    case ProblemKind::optimal_order: return "optimal_order";
  }
  return "fundamental";
}

ProblemKind problem_kind_from(const std::string& name) {
  for (auto k : {ProblemKind::fundamental, ProblemKind::extended, ProblemKind::isoperimetric, ProblemKind::delay,
                 ProblemKind::high_order, ProblemKind::optimal_order}) {
    if (name == to_string(k)) return k;
  }
  if (name == "high-order") return ProblemKind::high_order;
  if (name == "optimal-order") return ProblemKind::optimal_order;
  throw Error(ErrorCode::validation, "unknown problem kind '" + name + "'");
}

void ProblemSpec::validate() const {
  if (!lagrangian.value) throw Error(ErrorCode::validation, "Lagrangian L is required");
  if (orders.empty()) throw Error(ErrorCode::validation, "at least one fractional order is required");
  if (kind == ProblemKind::high_order) {
    for (std::size_t n = 1; n <= orders.size(); ++n) {
      const double al = orders[n - 1].alpha;
      if (!(al > static_cast<double>(n) - 1.0 && al < static_cast<double>(n))) {
        throw Error(ErrorCode::validation, "high-order problems need alpha_" + std::to_string(n) + " in (" +
                                               std::to_string(n - 1) + ", " + std::to_string(n) + ")");
      }
    }
  } else {
    for (const auto& o : orders) {
      if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw Error(ErrorCode::validation, "alpha must lie in (0,1)");
    }
  }
  if (kind != ProblemKind::extended && !x_a) throw Error(ErrorCode::validation, "x(a) may only be free for extended problems");
  if (kind == ProblemKind::extended) {
    if (!A) throw Error(ErrorCode::validation, "extended problems need the lower limit A");
    if (!(*A > a() && *A < b())) throw Error(ErrorCode::ordering, "extended problems need a < A < b");
  } else if (A || x_A_free) {
    throw Error(ErrorCode::validation, "A is only allowed for extended problems");
  }
  if (kind == ProblemKind::isoperimetric) {
    if (!constraint || !constraint->value) throw Error(ErrorCode::validation, "isoperimetric problems need M");
    if (!phi && !dphi) throw Error(ErrorCode::validation, "isoperimetric problems need Phi or Phi'");
  } else if (constraint) {
    throw Error(ErrorCode::validation, "a constraint is only allowed for isoperimetric problems");
  }
  if (kind == ProblemKind::delay) {
    if (!tau) throw Error(ErrorCode::validation, "delay problems need tau");
    if (!(*tau > 0.0 && *tau < b() - a())) throw Error(ErrorCode::validation, "delay needs 0 < tau < b - a");
    if (!history) throw Error(ErrorCode::validation, "delay problems need the history theta");
  } else if (tau) {
    throw Error(ErrorCode::validation, "tau is only allowed for delay problems");
  }
}

// --- residuals ---------------------------------------------------------------

std::vector<ResidualReport> el_residual_multi(const ProblemSpec& p, const std::vector<Path>& xs,
                                              const std::vector<Order>& alphas, double T, const QuadGrid& grid,
                                              ElMode mode) {
  return multi_reports(p, p.lagrangian, xs, alphas, T, grid, mode);
}

ResidualReport el_residual(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid, ElMode mode) {
  if (p.orders.empty()) throw Error(ErrorCode::validation, "problem has no fractional order");
  return multi_reports(p, p.lagrangian, {x}, {p.orders.front()}, T, grid, mode).front();
}

ResidualReport extended_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid) {
  if (!p.A) throw Error(ErrorCode::validation, "extended problem needs A");
  const double A = *p.A;
  if (!(p.a() < A && A < T)) throw Error(ErrorCode::ordering, "extended problem needs a < A < T");
  check_terminal(p, T);
  const Order alpha = p.orders.front();
  const auto core = el_core(p, p.lagrangian, terminal_nodes(p, grid, T, {A}), {&x}, {{0, alpha}},
                            ElMode::riemann_liouville);
  const auto& ns = core.ns;
  const std::size_t iA = index_of(ns.t, A);
  const double delta = window_delta(p.a(), T);

  // D_{T-} - D_{A-} on [a, A] (no psi' factor), standard equation on [A, T]
  const std::span<const double> uA(ns.u.data(), iA + 1);
  const std::span<const double> fA(core.f[0].data(), iA + 1);
  const auto rlA = iA >= 2 ? rl_right_sampled(uA, fA, alpha.alpha) : std::vector<double>(iA + 1, kNaN);
  const auto dx = eval(partial(p.lagrangian.dx, 0, "dL/dx"), core.pts);
  std::vector<double> res(ns.t.size());
  std::vector<char> excluded(ns.t.size(), 0);
  for (std::size_t i = 0; i < ns.t.size(); ++i) {
    if (i < iA) {
      res[i] = core.rl[0][i] / ns.dpsi[i] - rlA[i];
      excluded[i] = A - ns.t[i] < delta;
    } else {
      res[i] = dx[i] + core.rl[0][i];
    }
  }
  auto r = assemble(ns, res, p.a() + delta, T - delta, excluded, grid, fd_step_of(x, p.psi));
  r.trans_integral = transversality(core, 0, 1.0 - alpha.alpha, p.a(), T);
  r.trans_lagrangian = require_fn(p.lagrangian.value, "L")(core.pts.back());

  const auto IT = frac_integral_right_sampled(ns.u, core.f[0], 1.0 - alpha.alpha);
  const auto IA = frac_integral_right_sampled(uA, fA, 1.0 - alpha.alpha);
  r.extras["trans_free_a"] = IT.front() - IA.front();
  const std::span<const double> tA(ns.t.data(), iA + 1);
  r.extras["trans_free_A"] = terminal_limit(tA, uA, IA, window_delta(p.a(), A), 1.0 - alpha.alpha);
  return r;
}

ResidualReport isoperimetric_residuals(const ProblemSpec& p, const Path& x, double T, double lambda,
                                       const QuadGrid& grid) {
  if (!p.constraint || !p.constraint->value) throw Error(ErrorCode::validation, "isoperimetric problem needs M");
  if (!p.phi && !p.dphi) throw Error(ErrorCode::validation, "isoperimetric problem needs Phi or Phi'");
  if (!std::isfinite(lambda)) throw Error(ErrorCode::validation, "lambda must be finite");
  const auto F = LagrangianDef::combine(p.lagrangian, lambda, *p.constraint);
  auto r = multi_reports(p, F, {x}, {p.orders.front()}, T, grid, ElMode::riemann_liouville).front();

  // constraint pieces on the same nodes
  const Order alpha = p.orders.front();
  const auto core = el_core(p, *p.constraint, terminal_nodes(p, grid, T), {&x}, {{0, alpha}},
                            ElMode::riemann_liouville);
  const auto M = eval(p.constraint->value, core.pts);
  const double G = integrate_dt(core.ns, M);
  double phiT = 0.0;
  double dphiT = 0.0;
  if (p.phi) {
    phiT = p.phi(T);
  } else {
    std::vector<double> dp(core.ns.t.size());
    for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = p.dphi(core.ns.t[i]);
    phiT = integrate_dt(core.ns, dp);
  }
  if (p.dphi) {
    dphiT = p.dphi(T);
  } else {
    const double h = 1e-6 * std::max(1.0, p.b() - p.a());
    dphiT = T + h <= p.b() ? (p.phi(T + h) - p.phi(T - h)) / (2.0 * h) : (p.phi(T) - p.phi(T - h)) / h;
  }
  r.trans_lagrangian -= lambda * dphiT;
  r.extras["constraint_defect"] = std::fabs(G - phiT);
  r.extras["lambda"] = lambda;
  r.extras["dphi_T"] = dphiT;

  const auto dMx = eval(partial(p.constraint->dx, 0, "dM/dx"), core.pts);
  double nondeg = 0.0;
  for (std::size_t i = 0; i < dMx.size(); ++i) {
    if (!r.el_nodes[i].in_window) continue;
    nondeg = std::max(nondeg, std::fabs(dMx[i] + core.rl[0][i]));
  }
  r.extras["nondegeneracy"] = nondeg;
  return r;
}

LegendreResult legendre_check(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid) {
  const auto& ddd = require_fn(p.lagrangian.ddd, "d2L/dd2");
  check_terminal(p, T);
  const auto ns = make_nodes(p.psi, terminal_nodes(p, grid, T));
  const auto pts = lag_points(p, ns, {&x}, single_layout(p));
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& pt : pts) lo = std::min(lo, ddd(pt));
  return {lo, lo >= -kLegendreTol};
}

ResidualReport delay_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid) {
  if (!p.tau || !p.history) throw Error(ErrorCode::validation, "delay problem needs tau and a history");
  const double tau = *p.tau;
  check_terminal(p, T);
  if (!(tau > 0.0 && tau < T - p.a())) throw Error(ErrorCode::validation, "delay needs 0 < tau < T - a");
  const Order alpha = p.orders.front();
  const double Ts = T - tau;
  const auto core = el_core(p, p.lagrangian, terminal_nodes(p, grid, T, {Ts}), {&x}, {{0, alpha}},
                            ElMode::riemann_liouville);
  const auto& ns = core.ns;
  const std::size_t is = index_of(ns.t, Ts);
  const std::size_t last = ns.t.size() - 1;
  const double ga = gamma(1.0 - alpha.alpha);

  const auto d2 = eval(partial(p.lagrangian.dx, 0, "dL/dx"), core.pts);
  const auto d3 = eval(require_fn(p.lagrangian.dxtau, "dL/dxtau"), core.pts);
  const auto& f = core.f[0];

  // D_{(T-tau)-} on [a, T - tau]
  const std::span<const double> us(ns.u.data(), is + 1);
  const auto rls = rl_right_sampled(us, std::span<const double>(f.data(), is + 1), alpha.alpha);

  // tail(u) = int_{u(T-tau)}^{u(T)} (v - u)^{-alpha} f(v) dv: the right integral of f with the part
  // below T - tau masked out; its derivative by central differences
  auto masked = detail::linear_cells(f);
  for (std::size_t j = 0; j < is; ++j) masked[j] = {0.0, 0.0};
  auto tail = detail::right_product_all(ns.u, masked, 1.0 - alpha.alpha);
  tail.resize(is + 1);
  for (double& v : tail) v *= ga;
  const auto dtail = detail::fd_derivative(us, tail);

  const double delta = window_delta(p.a(), T);
  std::vector<double> res(ns.t.size());
  std::vector<char> excluded(ns.t.size(), 0);
  double split = 0.0;
  for (std::size_t i = 0; i < ns.t.size(); ++i) {
    if (i < is) {
      // dL/dxtau at t + tau, interpolated linearly in u between nodes
      const double target = ns.t[i] + tau;
      std::size_t k = static_cast<std::size_t>(std::upper_bound(ns.t.begin(), ns.t.end(), target) - ns.t.begin());
      k = std::clamp<std::size_t>(k, 1, last);
      const double ut_i = p.psi(target);
      const double w = (ut_i - ns.u[k - 1]) / (ns.u[k] - ns.u[k - 1]);
      const double shifted = (1.0 - w) * d3[k - 1] + w * d3[k];
      const double split_rl = rls[i] - dtail[i] / ga;
      res[i] = d2[i] + shifted + split_rl * ns.dpsi[i];
      // the tail derivative is singular as t -> T - tau
      excluded[i] = Ts - ns.t[i] < delta;
      if (!excluded[i] && ns.t[i] >= p.a() + delta) {
        split = std::max(split, std::fabs(core.rl[0][i] / ns.dpsi[i] - split_rl));
      }
    } else {
      res[i] = d2[i] + core.rl[0][i];
    }
  }
  auto r = assemble(ns, res, p.a() + delta, T - delta, excluded, grid, fd_step_of(x, p.psi));
  r.trans_integral = transversality(core, 0, 1.0 - alpha.alpha, p.a(), T);
  r.trans_lagrangian = require_fn(p.lagrangian.value, "L")(core.pts.back());
  r.extras["split_defect"] = split;
  return r;
}

ResidualReport high_order_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid) {
  const std::size_t m = p.orders.size();
  if (m == 0) throw Error(ErrorCode::validation, "high-order problem needs at least one order");
  if (p.lagrangian.dd.size() < m) {
    throw Error(ErrorCode::arity, "high-order problem with " + std::to_string(m) + " orders needs " +
                                      std::to_string(m) + " derivative partials");
  }
  for (std::size_t n = 1; n <= m; ++n) {
    const double al = p.orders[n - 1].alpha;
    if (!(al > static_cast<double>(n) - 1.0 && al < static_cast<double>(n))) {
      throw Error(ErrorCode::validation, "alpha_" + std::to_string(n) + " must lie in (n-1, n)");
    }
  }
  check_terminal(p, T);
  std::vector<DerivSpec> derivs;
  for (const auto& o : p.orders) derivs.push_back({0, o});
  const auto core = el_core(p, p.lagrangian, terminal_nodes(p, grid, T), {&x}, derivs, ElMode::riemann_liouville);
  const auto& ns = core.ns;

  auto res = eval(partial(p.lagrangian.dx, 0, "dL/dx"), core.pts);
  for (std::size_t n = 0; n < m; ++n) {
    for (std::size_t i = 0; i < res.size(); ++i) res[i] += core.rl[n][i];
  }
  const double delta = window_delta(p.a(), T);
  auto r = assemble(ns, res, p.a() + delta, T - delta, {}, grid, fd_step_of(x, p.psi));

  // sum_{n>=k} (-d/du)^{n-k} I_{T-}^{n-alpha_n} f_n at T, term by term
  for (std::size_t k = 1; k <= m; ++k) {
    double total = 0.0;
    for (std::size_t n = k; n <= m; ++n) {
      const double al = p.orders[n - 1].alpha;
      auto values = frac_integral_right_sampled(ns.u, core.f[n - 1], static_cast<double>(n) - al);
      for (std::size_t j = 0; j < n - k; ++j) {
        values = detail::fd_derivative(ns.u, values);
        for (double& v : values) v = -v;
      }
      total += terminal_limit(ns.t, ns.u, values, delta, static_cast<double>(k) - al);
    }
    r.extras["trans_" + std::to_string(k)] = total;
    if (k == 1) r.trans_integral = total;
  }
  r.trans_lagrangian = require_fn(p.lagrangian.value, "L")(core.pts.back());
  r.extras["h_nested_fd"] = (ns.u.back() - ns.u.front()) / grid.cells();
  return r;
}

double optimal_order_stationarity(const ProblemSpec& p, const Path& x, double T, Order alpha, const QuadGrid& grid) {
  if (!(alpha.alpha - kOrderStep > 0.0 && alpha.alpha + kOrderStep < 1.0)) {
    throw Error(ErrorCode::domain, "alpha +- h_alpha must stay inside (0,1)");
  }
  check_terminal(p, T);
  const auto ns = make_nodes(p.psi, terminal_nodes(p, grid, T));
  const auto pts = lag_points(p, ns, {&x}, {{0, alpha}});
  const auto dd = eval(partial(p.lagrangian.dd, 0, "dL/dd"), pts);
  const auto up = caputo_left_nodes(x, Order::of(alpha.alpha + kOrderStep), p.psi, ns.t);
  const auto down = caputo_left_nodes(x, Order::of(alpha.alpha - kOrderStep), p.psi, ns.t);
  std::vector<double> integrand(ns.t.size());
  for (std::size_t i = 0; i < integrand.size(); ++i) {
    integrand[i] = dd[i] * (up[i] - down[i]) / (2.0 * kOrderStep);
  }
  return integrate_dt(ns, integrand);
}

ConvexityReport convexity_probe(const LagrangianDef& L, const ProbeBox& box, int samples) {
  const auto& value = require_fn(L.value, "L");
  const auto& dx = partial(L.dx, 0, "dL/dx");
  const auto& dd = partial(L.dd, 0, "dL/dd");
  ConvexityReport r;
  for (int i = 1; i <= samples; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    const double t = lerp(box.t, halton(k, 2));
    const double x = lerp(box.x, halton(k, 3));
    const double d = lerp(box.d, halton(k, 5));
    const double v = lerp(box.v, halton(k, 7));
    const double w = lerp(box.w, halton(k, 11));
    const auto base = scalar_point(t, t - box.t[0], box.alpha, x, d, 0.0);
    const auto moved = scalar_point(t, t - box.t[0], box.alpha, x + v, d + w, 0.0);
    const double gap = value(moved) - value(base) - dx(base) * v - dd(base) * w;
    if (i == 1 || gap < r.worst_gap) r.worst_gap = gap;
    if (gap < -1e-9) ++r.violations;
  }
  return r;
}

SufficiencyReport sufficiency_epsilon_check(const ProblemSpec& p, const Path& x, double T,
                                            const std::vector<Perturbation>& perturbations, const QuadGrid& grid) {
  SufficiencyReport r;
  const double base = objective(p, x, T, grid);
  r.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& pert : perturbations) {
    const double va = pert.v.value(p.a());
    if (std::fabs(va) > 1e-12) {
      throw Error(ErrorCode::validation, "perturbation must vanish at a (v(a)=" + std::to_string(va) + ")");
    }
    const double gap = objective(p, sum_path(x, pert.v, p.psi), T + pert.dT, grid) - base;
    r.gaps.push_back(gap);
    r.min_gap = std::min(r.min_gap, gap);
  }
  if (perturbations.empty()) r.min_gap = 0.0;
  return r;
}

double objective(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid) {
  check_terminal(p, T);
  const auto ns = make_nodes(p.psi, terminal_nodes(p, grid, T));
  const auto pts = lag_points(p, ns, {&x}, single_layout(p));
  return integrate_dt(ns, eval(require_fn(p.lagrangian.value, "L"), pts));
}

double lagrangian_at(const ProblemSpec& p, const Path& x, double t, const QuadGrid& grid) {
  const auto layout = single_layout(p);
  LagPoint pt;
  pt.t = t;
  pt.s = p.psi(t) - p.psi(p.a());
  pt.alpha = layout.front().order.alpha;
  pt.x = {x.value(t)};
  for (const auto& spec : layout) pt.d.push_back(caputo_left(x, spec.order, p.psi, t, grid));
  pt.xtau = delayed_value(p, x, t);
  return require_fn(p.lagrangian.value, "L")(pt);
}

}  // namespace psifrac

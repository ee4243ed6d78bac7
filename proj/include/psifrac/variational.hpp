#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psifrac/frac_ops.hpp"

namespace psifrac {

/// Arguments of a Lagrangian at one time t.
struct LagPoint {
  double t = 0.0;
  double s = 0.0;      // psi(t) - psi(a)
  double alpha = 0.0;  // first order of the problem
  std::vector<double> x;  // one entry per dependent variable
  std::vector<double> d;  // Caputo derivatives (per variable, or per order)
  double xtau = 0.0;      // x(t - tau)
};

using LagFn = std::function<double(const LagPoint&)>;

/// L with its partial derivatives. Empty callables mean "not supplied".
struct LagrangianDef {
  LagFn value;
  std::vector<LagFn> dx;  // dL/dx_i
  std::vector<LagFn> dd;  // dL/dd_i
  LagFn dxtau;            // dL/dx(t - tau)
  LagFn dxx;              // second partials of scalar problems
  LagFn dxd;
  LagFn ddd;

  /// Scalar L(t, x, d) from plain closures.
  static LagrangianDef scalar(std::function<double(double, double, double)> L,
                              std::function<double(double, double, double)> dL_dx,
                              std::function<double(double, double, double)> dL_dd);

  /// L1 + c * L2, partial by partial (missing partials stay missing).
  static LagrangianDef combine(const LagrangianDef& l1, double c, const LagrangianDef& l2);
};

/// Box for random probing of a Lagrangian: t, x, d, v, w ranges. Probe points
/// use s = t - t_lo and the fixed order `alpha`.
struct ProbeBox {
  double alpha = 0.5;
  std::array<double, 2> t{0.0, 1.0};
  std::array<double, 2> x{-1.0, 1.0};
  std::array<double, 2> d{-1.0, 1.0};
  std::array<double, 2> v{-1.0, 1.0};
  std::array<double, 2> w{-1.0, 1.0};
};

/// Largest relative defect between the supplied first partials of a scalar
/// Lagrangian and central differences of L at `samples` random points.
double partials_defect(const LagrangianDef& L, const ProbeBox& box, int samples = 100, std::uint64_t seed = 7);

enum class ProblemKind { fundamental, extended, isoperimetric, delay, high_order, optimal_order };

const char* to_string(ProblemKind kind);
ProblemKind problem_kind_from(const std::string& name);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::fundamental;
  PsiMap psi = PsiMap::identity(0.0, 1.0);
  LagrangianDef lagrangian;
  std::vector<Order> orders;  // per variable, or alpha_1..alpha_m for high_order
  std::optional<double> x_a;  // nullopt: x(a) free
  std::optional<double> A;
  bool x_A_free = false;
  std::optional<LagrangianDef> constraint;  // M
  RealFn phi;
  RealFn dphi;
  std::optional<double> tau;
  RealFn history;  // theta on [a - tau, a]
  std::optional<double> lambda;

  /// Kind-dependent field checks; throws Error(validation) or Error(ordering).
  void validate() const;

  double a() const { return psi.a(); }
  double b() const { return psi.b(); }
};

struct NodeResidual {
  double t;
  double psi_t;
  double residual;
  bool in_window;
};

struct GridMeta {
  int N = 0;
  GridScheme scheme = GridScheme::uniform_in_psi;
  double h_fd = 0.0;
};

struct ResidualReport {
  double el_max = 0.0;
  std::vector<NodeResidual> el_nodes;
  double trans_integral = 0.0;
  double trans_lagrangian = 0.0;
  std::optional<double> legendre_min;
  std::array<double, 2> window{0.0, 0.0};
  GridMeta grid_meta;
  std::map<std::string, double> extras;
};

/// How the right derivative in the Euler-Lagrange residual is assembled.
enum class ElMode { riemann_liouville, caputo };

/// Fraction of T - a trimmed from each end of the report window.
inline constexpr double kWindowFraction = 0.02;
inline constexpr double kLegendreTol = 1e-9;

ResidualReport el_residual(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid,
                           ElMode mode = ElMode::riemann_liouville);

std::vector<ResidualReport> el_residual_multi(const ProblemSpec& p, const std::vector<Path>& xs,
                                              const std::vector<Order>& alphas, double T, const QuadGrid& grid,
                                              ElMode mode = ElMode::riemann_liouville);

ResidualReport extended_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid);

ResidualReport isoperimetric_residuals(const ProblemSpec& p, const Path& x, double T, double lambda,
                                       const QuadGrid& grid);

struct LegendreResult {
  double min;
  bool pass;
};

LegendreResult legendre_check(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid);

ResidualReport delay_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid);

ResidualReport high_order_residuals(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid);

inline constexpr double kOrderStep = 1e-4;

/// int_a^T dL/dd [x](t) * dLambda_t/dalpha dt with a central difference in alpha.
double optimal_order_stationarity(const ProblemSpec& p, const Path& x, double T, Order alpha, const QuadGrid& grid);

struct ConvexityReport {
  int violations = 0;
  double worst_gap = 0.0;
};

/// Samples L(t,x+v,d+w) - L(t,x,d) - dL/dx v - dL/dd w at Halton points.
ConvexityReport convexity_probe(const LagrangianDef& L, const ProbeBox& box, int samples);

struct Perturbation {
  Path v;
  double dT;
};

struct SufficiencyReport {
  double min_gap = 0.0;
  std::vector<double> gaps;
};

SufficiencyReport sufficiency_epsilon_check(const ProblemSpec& p, const Path& x, double T,
                                            const std::vector<Perturbation>& perturbations, const QuadGrid& grid);

/// J(x, T) = int_a^T L[x](t) dt on a grid of the same scheme and size over [a, T].
double objective(const ProblemSpec& p, const Path& x, double T, const QuadGrid& grid);

/// L[x](t) at a single time (Caputo derivative by quadrature on `grid`).
double lagrangian_at(const ProblemSpec& p, const Path& x, double t, const QuadGrid& grid);

}  // namespace psifrac

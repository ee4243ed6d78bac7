#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace psifrac {

using RealFn = std::function<double(double)>;

/// Monotone kernel function psi on [a, b] together with psi'.
///
/// Construction probes 1024 nodes and rejects maps that are not strictly
/// increasing or whose derivative is not positive.
class PsiMap {
 public:
  PsiMap(RealFn psi, RealFn dpsi, double a, double b, RealFn inverse = {});

  static PsiMap identity(double a, double b);

  double operator()(double t) const { return psi_(t); }
  double derivative(double t) const { return dpsi_(t); }
  /// psi^{-1}(u); bisection on [a, b] to 1e-13 unless an inverse was supplied.
  double inverse(double u) const;

  double a() const { return a_; }
  double b() const { return b_; }

 private:
  RealFn psi_;
  RealFn dpsi_;
  RealFn inverse_;
  double a_;
  double b_;
};

/// Sampled representation of a path: nodes in t and values.
struct Samples {
  std::vector<double> nodes;
  std::vector<double> values;
};

/// A trajectory x, either analytic or sampled, with optional psi-directional
/// derivatives ((1/psi') d/dt)^k x.
class Path {
 public:
  explicit Path(RealFn x);
  static Path from_samples(Samples samples);
  /// Both forms; throws Error(validation) unless they agree at the nodes to 1e-10.
  static Path with_samples(RealFn x, Samples samples);

  /// Analytic ((1/psi') d/dt) x.
  Path& with_derivative(RealFn dx_psi);
  /// Analytic ((1/psi') d/dt)^k x for k = 2, 3, ... (index 0 holds k = 2).
  Path& with_higher_derivatives(std::vector<RealFn> higher);

  double value(double t) const;

  /// ((1/psi') d/dt)^k x at t. k = 1 falls back to central differences when
  /// no analytic derivative was supplied; k >= 2 must be supplied.
  double psi_derivative(int k, double t, const PsiMap& psi) const;

  bool has_analytic(int k) const;
  int highest_available_order() const;
  bool is_sampled() const { return samples_.has_value() && !x_; }

  /// Central-difference step used when dx_psi is synthesized.
  static double fd_step(const PsiMap& psi);

 private:
  Path() = default;
  double sample_value(double t) const;
  double sample_slope_u(double t, const PsiMap& psi) const;

  RealFn x_;
  RealFn dx_psi_;
  std::vector<RealFn> higher_;
  std::optional<Samples> samples_;
};

/// Fractional order alpha with n = floor(alpha) + 1 (n = alpha for integers).
struct Order {
  double alpha;
  int n;

  static Order of(double alpha);
  bool is_integer() const;
};

enum class GridScheme { uniform_in_t, uniform_in_psi };

const char* to_string(GridScheme scheme);

/// Quadrature nodes t_0 < ... < t_N.
struct QuadGrid {
  std::vector<double> nodes;
  GridScheme scheme = GridScheme::uniform_in_psi;

  static QuadGrid uniform_in_t(double lo, double hi, int cells);
  static QuadGrid uniform_in_psi(const PsiMap& psi, double lo, double hi, int cells);

  /// Same scheme and cell count on a new interval.
  QuadGrid rebuilt(const PsiMap& psi, double lo, double hi) const;

  int cells() const { return static_cast<int>(nodes.size()) - 1; }
  double front() const { return nodes.front(); }
  double back() const { return nodes.back(); }
};

/// Grid nodes inside [lo, hi] with lo and hi present as nodes. Throws
/// Error(grid) when the grid does not span the interval.
std::vector<double> span_nodes(const QuadGrid& grid, double lo, double hi);

// --- operators at a single point ---------------------------------------

double frac_integral_left(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid);
double frac_integral_right(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid);

/// Left Caputo derivative; dispatches to the n-fold form when alpha > 1 and to
/// the classical iterated derivative when alpha is an integer.
double caputo_left(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid);
double caputo_right(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid);
double caputo_left_highorder(const Path& x, Order alpha, const PsiMap& psi, double t, const QuadGrid& grid);

/// Right Riemann-Liouville derivative D_{T-}^{alpha} f(t), alpha in (0,1),
/// as the right Caputo derivative on [t, T] plus the boundary term.
/// Throws Error(singular) when psi(T) - psi(t) is below singular_guard.
double rl_right(const Path& f, Order alpha, const PsiMap& psi, double T, double t, const QuadGrid& grid);

double singular_guard(const PsiMap& psi, double T);

// --- whole-grid evaluation ----------------------------------------------

/// Left Caputo derivative at every node of `nodes` (nodes.front() is the
/// lower terminal).
std::vector<double> caputo_left_nodes(const Path& x, Order alpha, const PsiMap& psi, std::span<const double> nodes);

/// Left fractional integral at every node of sampled values.
std::vector<double> frac_integral_left_sampled(std::span<const double> u, std::span<const double> values,
                                               double order);
/// Right fractional integral at every node (upper terminal u.back()).
std::vector<double> frac_integral_right_sampled(std::span<const double> u, std::span<const double> values,
                                                double order);

/// Right Riemann-Liouville derivative of order alpha (any alpha > 0) of
/// sampled data f(u), upper terminal u.back(), evaluated at every node. The
/// last entry is NaN (boundary terms diverge there). Derivatives of f come
/// from nonuniform central differences.
std::vector<double> rl_right_sampled(std::span<const double> u, std::span<const double> f, double alpha);

/// Right Caputo derivative (alpha in (0,1)) of sampled data at every node.
std::vector<double> caputo_right_sampled(std::span<const double> u, std::span<const double> f, double alpha);

// --- identity residuals -------------------------------------------------

/// max_t |I^alpha (C D^alpha x)(t) - [x(t) - Taylor_{n-1}(t)]| over the grid.
double composition_residual_left(const Path& x, Order alpha, const PsiMap& psi, const QuadGrid& grid);

/// |LHS - RHS| of the fractional integration-by-parts identity, n = 1.
double integration_by_parts_residual(const Path& x, const Path& y, Order alpha, const PsiMap& psi,
                                     const QuadGrid& grid);

}  // namespace psifrac

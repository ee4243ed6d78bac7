#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "psifrac/frac_ops.hpp"
#include "psifrac/variational.hpp"

namespace psifrac {

struct RootConfig {
  std::optional<std::array<double, 2>> bracket;  // nullopt: solver default
  double tol_x = 1e-12;
  double tol_f = 1e-10;
  int max_iter = 200;

  void validate() const;
};

struct MinimizeConfig {
  int basis_size = 3;
  double simplex_scale = 0.25;
  int max_evals = 5000;
  std::uint64_t seed = 1;
  std::optional<std::array<double, 2>> T_bracket;  // nullopt: [a + 0.01 (b - a), b]

  void validate() const;
};

/// Default T bracket [a + 0.01 (b - a), b].
std::array<double, 2> default_time_bracket(const ProblemSpec& p);
inline constexpr std::array<double, 2> kDefaultOrderBracket{0.02, 0.98};

/// Root of t -> L[x](t) on the bracket.
double find_terminal_time(const ProblemSpec& p, const Path& x, const RootConfig& cfg, const QuadGrid& grid);

struct IsoperimetricSolution {
  double lambda = 0.0;
  double T = 0.0;
  double constraint_defect = 0.0;
  bool lambda_from_hint = false;  // constraint holds for every T in the bracket
};

/// Solves F[x](T) = lambda Phi'(T) together with G(x, T) = Phi(T).
IsoperimetricSolution solve_isoperimetric(const ProblemSpec& p, const Path& x, const RootConfig& cfg,
                                          const QuadGrid& grid);

// --- best fractional order ----------------------------------------------
//
// Family: L = s^alpha/(2 Gamma(alpha+2)) d^2 - s^(alpha+1) d + 20 Gamma(alpha+2),
// x(a) = 0, candidate x* = s^(alpha+1), s = psi(t) - psi(a).

/// How the alpha-derivative of J(x*, T, alpha) is written.
///   derived: Gamma(alpha+2) [Psi(alpha+2) (20 - s^(alpha+2)/2) - ln(s)/2 s^(alpha+2)]
///   printed: the same with an extra psi'(t) on the logarithmic term
enum class StationarityForm { derived, printed };

const char* to_string(StationarityForm form);

/// psi(T*) - psi(a) = 40^(1/(alpha+2)).
double order_terminal_gap(double alpha);
/// T*(alpha) from the terminal relation, psi inverted.
double order_terminal_time(const PsiMap& psi, double alpha);

/// int_a^T of the stationarity integrand (adaptive Gauss-Kronrod, 1e-9).
double order_stationarity_integral(const PsiMap& psi, double alpha, double T, StationarityForm form);
/// J(x*, T, alpha) = int_a^T Gamma(alpha+2) [20 - s^(alpha+2)/2] dt.
double order_objective(const PsiMap& psi, double alpha, double T);

/// LagrangianDef of the family for a fixed alpha, with exact partials.
LagrangianDef order_family_lagrangian(double alpha);
/// x* = s^(alpha+1) with its psi-directional derivative.
Path order_family_candidate(const PsiMap& psi, double alpha);

struct OptimalOrderSolution {
  double alpha = 0.0;
  double T = 0.0;           // psi(T) = psi(a) + 40^(1/(alpha+2))
  double integral = 0.0;    // stationarity integral at the root
  StationarityForm form = StationarityForm::derived;
  double T_as_printed = 0.0;       // psi(a) + 40^(1/(alpha+2)) read as a time
  bool printed_matches = false;    // T_as_printed satisfies the terminal relation
  std::optional<double> alpha_other_form;  // root of the other form, if any
};

/// Root of the stationarity integral on the alpha bracket (default [0.02, 0.98]).
/// Scans for the first sign change, then refines.
OptimalOrderSolution solve_optimal_order(const ProblemSpec& p, const RootConfig& cfg,
                                         StationarityForm form = StationarityForm::derived);

// --- direct minimization ------------------------------------------------

struct DirectMinimum {
  double x_a = 0.0;
  std::vector<double> coefficients;  // x = x_a + sum_k c_k s^k
  double T = 0.0;
  double J = 0.0;
  int evaluations = 0;
  bool exhausted = false;  // max_evals reached before the simplex collapsed

  Path path(const PsiMap& psi) const;
};

/// Nelder-Mead over (c_1..c_K, T) from zero coefficients and T = (a + b)/2.
DirectMinimum direct_minimize(const ProblemSpec& p, const MinimizeConfig& cfg, const QuadGrid& grid);

}  // namespace psifrac

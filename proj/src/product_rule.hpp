#pragma once

// Product-integration kernels in psi-space. Every operator is reduced to
//   (1/Gamma(g)) * int (distance to target)^(g-1) * h(u) du
// with h linear on each cell. Cells carry their own endpoint values so that
// callers can feed discontinuous piecewise-linear data.

#include <span>
#include <vector>

namespace psifrac::detail {

struct Cell {
  double left;   // value at u_j
  double right;  // value at u_{j+1}
  // > 0 on a terminal cell: value is left * power * (v / h)^(power - 1), v the
  // distance from the operator's terminal node
  double power = 0.0;
};

enum class Terminal { none, front, back };

/// Cells interpolating node values.
std::vector<Cell> linear_cells(std::span<const double> values);

/// Cells approximating the derivative of `primitive`. Each cell integrates to
/// the exact primitive increment; `derivative` node values add the linear part
/// when both are finite and consistent with the secant. An inconsistent cell at
/// `terminal` gets a power model fitted to the primitive.
std::vector<Cell> derivative_cells(std::span<const double> u, std::span<const double> primitive,
                                   std::span<const double> derivative, double sign = 1.0,
                                   Terminal terminal = Terminal::none);

/// Target u.back().
double left_product(std::span<const double> u, std::span<const Cell> cells, double order);
/// Target u.front().
double right_product(std::span<const double> u, std::span<const Cell> cells, double order);

/// Left product integral with target at every node (entry 0 is 0).
std::vector<double> left_product_all(std::span<const double> u, std::span<const Cell> cells, double order);
/// Right product integral with target at every node (last entry is 0).
std::vector<double> right_product_all(std::span<const double> u, std::span<const Cell> cells, double order);

/// Nonuniform three-point derivative d/du at every node.
std::vector<double> fd_derivative(std::span<const double> u, std::span<const double> f);

/// Trapezoid rule of values over u.
double trapezoid(std::span<const double> u, std::span<const double> values);

}  // namespace psifrac::detail

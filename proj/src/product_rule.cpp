#include "product_rule.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "psifrac/error.hpp"
#include "psifrac/parallel.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac::detail {
namespace {

// Weights of the two endpoints of a cell whose endpoints sit at distances
// far > near >= 0 from the target, for the kernel distance^(g-1) and unit
// cell width scaling already divided out (i.e. divided by far - near).
struct EndpointWeights {
  long double near_node;
  long double far_node;
};

EndpointWeights cell_weights(long double far, long double near, long double g) {
  const long double m0 = (powl(far, g) - powl(near, g)) / g;
  const long double m1 = (powl(far, g + 1) - powl(near, g + 1)) / (g + 1);
  const long double width = far - near;
  return {(far * m0 - m1) / width, (m1 - near * m0) / width};
}

struct UniformTable {
  std::vector<double> near_node;  // index k = 1..K, distance k*h / (k-1)*h
  std::vector<double> far_node;
  double scale;  // h^g / Gamma(g)
};

UniformTable uniform_table(std::size_t cells, double h, double order) {
  UniformTable table;
  table.near_node.resize(cells + 1, 0.0);
  table.far_node.resize(cells + 1, 0.0);
  const long double g = order;
  for (std::size_t k = 1; k <= cells; ++k) {
    const auto w = cell_weights(static_cast<long double>(k), static_cast<long double>(k - 1), g);
    table.near_node[k] = static_cast<double>(w.near_node);
    table.far_node[k] = static_cast<double>(w.far_node);
  }
  table.scale = std::pow(h, order) / gamma(order);
  return table;
}

// int_0^1 (m - v)^(g-1) v^(p-1) dv for m >= 1
double terminal_moment(double m, double g, double p) {
  if (std::fabs(m - 1.0) <= 1e-12) {
    return std::exp(log_gamma(g) + log_gamma(p) - log_gamma(g + p));
  }
  const double r = 1.0 / m;
  double coeff = 1.0;
  double pw = 1.0;
  double sum = 1.0 / p;
  for (int k = 1; k < 20000; ++k) {
    coeff *= (k - g) / k;
    pw *= r;
    const double term = coeff * pw / (p + k);
    sum += term;
    if (std::fabs(term) <= 1e-17 * std::fabs(sum)) break;
  }
  return std::pow(m, g - 1.0) * sum;
}

// Contribution of a power-model terminal cell, in units of h^g.
double terminal_cell(const Cell& c, double m, double g) {
  return c.left * c.power * terminal_moment(m, g, c.power);
}

// Exponent of primitive ~ w^p from three nodes at distances 0 < w1 < w2 from
// the terminal.
double fit_power(double p0, double p1, double p2, double w1, double w2) {
  const double r = (p2 - p0) / (p1 - p0);
  if (!(r > 0.0) || !std::isfinite(r)) return 0.0;
  const double power = std::log(r) / std::log(w2 / w1);
  return power > 0.02 && power < 0.98 ? power : 0.0;
}

void check_order(double order) {
  if (!(order > 0.0)) throw Error(ErrorCode::domain, "product integration requires a positive order");
}

}  // namespace

std::vector<Cell> linear_cells(std::span<const double> values) {
  std::vector<Cell> cells;
  if (values.size() < 2) return cells;
  cells.reserve(values.size() - 1);
  for (std::size_t j = 0; j + 1 < values.size(); ++j) cells.push_back({values[j], values[j + 1]});
  return cells;
}

std::vector<Cell> derivative_cells(std::span<const double> u, std::span<const double> primitive,
                                   std::span<const double> derivative, double sign, Terminal terminal) {
  std::vector<Cell> cells;
  if (u.size() < 2) return cells;
  const std::size_t last = u.size() - 2;
  cells.reserve(u.size() - 1);
  for (std::size_t j = 0; j + 1 < u.size(); ++j) {
    const double secant = sign * (primitive[j + 1] - primitive[j]) / (u[j + 1] - u[j]);
    const double gl = derivative.empty() ? NAN : derivative[j];
    const double gr = derivative.empty() ? NAN : derivative[j + 1];
    // node derivatives that disagree with the secant (singular data, e.g. a
    // finite-difference estimate at a cusp) fall back to the secant
    const bool consistent = std::isfinite(gl) && std::isfinite(gr) &&
                            std::fabs(secant - sign * 0.5 * (gl + gr)) <= 0.25 * (std::fabs(secant) + std::fabs(gr - gl));
    if (consistent) {
      const double half_jump = 0.5 * sign * (gr - gl);
      cells.push_back({secant - half_jump, secant + half_jump});
    } else {
      double power = 0.0;
      if (u.size() >= 3 && terminal == Terminal::front && j == 0) {
        power = fit_power(primitive[0], primitive[1], primitive[2], u[1] - u[0], u[2] - u[0]);
      } else if (u.size() >= 3 && terminal == Terminal::back && j == last) {
        const std::size_t n = u.size() - 1;
        power = fit_power(primitive[n], primitive[n - 1], primitive[n - 2], u[n] - u[n - 1], u[n] - u[n - 2]);
      }
      cells.push_back({secant, secant, power});
    }
  }
  return cells;
}

double left_product(std::span<const double> u, std::span<const Cell> cells, double order) {
  check_order(order);
  if (u.size() < 2) return 0.0;
  const long double target = u.back();
  const long double g = order;
  long double acc = 0.0L;
  for (std::size_t j = 0; j + 1 < u.size(); ++j) {
    if (cells[j].power > 0.0) {
      const double h = u[j + 1] - u[j];
      acc += std::pow(h, order) * terminal_cell(cells[j], (u.back() - u[j]) / h, order);
      continue;
    }
    const auto w = cell_weights(target - u[j], target - u[j + 1], g);
    acc += w.far_node * cells[j].left + w.near_node * cells[j].right;
  }
  return static_cast<double>(acc) / gamma(order);
}

double right_product(std::span<const double> u, std::span<const Cell> cells, double order) {
  check_order(order);
  if (u.size() < 2) return 0.0;
  const long double target = u.front();
  const long double g = order;
  long double acc = 0.0L;
  for (std::size_t j = 0; j + 1 < u.size(); ++j) {
    if (cells[j].power > 0.0) {
      const double h = u[j + 1] - u[j];
      acc += std::pow(h, order) * terminal_cell(cells[j], (u[j + 1] - u.front()) / h, order);
      continue;
    }
    const auto w = cell_weights(u[j + 1] - target, u[j] - target, g);
    acc += w.near_node * cells[j].left + w.far_node * cells[j].right;
  }
  return static_cast<double>(acc) / gamma(order);
}

namespace {

// Nodes on the lattice u_0 + k h (index k) plus off-lattice extras (index -1),
// as produced by a uniform grid with a few inserted nodes.
struct Lattice {
  double h = 0.0;
  std::vector<long> index;
  long extent = 0;
};

bool lattice_of(std::span<const double> u, Lattice& lat) {
  if (u.size() < 2) return false;
  std::vector<double> gaps(u.size() - 1);
  for (std::size_t j = 0; j + 1 < u.size(); ++j) gaps[j] = u[j + 1] - u[j];
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double typical = gaps[gaps.size() / 2];
  if (!(typical > 0.0)) return false;
  // spacing from the whole span; a single gap carries too much rounding
  const double span = u.back() - u.front();
  lat.h = span / std::max(1.0, std::round(span / typical));
  lat.index.assign(u.size(), -1);
  std::size_t on = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double k = std::round((u[j] - u[0]) / lat.h);
    if (std::fabs(u[j] - u[0] - k * lat.h) <= 1e-9 * lat.h) {
      lat.index[j] = static_cast<long>(k);
      lat.extent = std::max(lat.extent, lat.index[j]);
      ++on;
    }
  }
  // mostly off-lattice data gains nothing from the table
  return 4 * (u.size() - on) <= u.size();
}

bool lattice_cell(const Lattice& lat, std::size_t j) {
  return lat.index[j] >= 0 && lat.index[j + 1] == lat.index[j] + 1;
}

}  // namespace

std::vector<double> left_product_all(std::span<const double> u, std::span<const Cell> cells, double order) {
  check_order(order);
  std::vector<double> out(u.size(), 0.0);
  if (u.size() < 2) return out;
  Lattice lat;
  if (!lattice_of(u, lat)) {
    parallel_for(u.size(), [&](std::size_t m) {
      out[m] = m == 0 ? 0.0 : left_product(u.subspan(0, m + 1), cells.subspan(0, m), order);
    });
    return out;
  }
  const auto table = uniform_table(static_cast<std::size_t>(lat.extent), lat.h, order);
  const double inv_gamma = 1.0 / gamma(order);
  parallel_for(u.size(), [&](std::size_t m) {
    if (m == 0) return;
    if (lat.index[m] < 0) {
      out[m] = left_product(u.subspan(0, m + 1), cells.subspan(0, m), order);
      return;
    }
    const long km = lat.index[m];
    double acc = 0.0;         // units of h^g / Gamma(g)
    long double loose = 0.0L;  // absolute units before 1 / Gamma(g)
    for (std::size_t j = 0; j < m; ++j) {
      if (cells[j].power > 0.0) {
        const double hj = u[j + 1] - u[j];
        loose += std::pow(hj, order) * terminal_cell(cells[j], (u[m] - u[j]) / hj, order);
      } else if (lattice_cell(lat, j)) {
        const auto k = static_cast<std::size_t>(km - lat.index[j]);
        acc += table.far_node[k] * cells[j].left + table.near_node[k] * cells[j].right;
      } else {
        const auto w = cell_weights(static_cast<long double>(u[m]) - u[j], static_cast<long double>(u[m]) - u[j + 1],
                                    static_cast<long double>(order));
        loose += w.far_node * cells[j].left + w.near_node * cells[j].right;
      }
    }
    out[m] = table.scale * acc + static_cast<double>(loose) * inv_gamma;
  });
  return out;
}

std::vector<double> right_product_all(std::span<const double> u, std::span<const Cell> cells, double order) {
  check_order(order);
  std::vector<double> out(u.size(), 0.0);
  if (u.size() < 2) return out;
  const std::size_t last = u.size() - 1;
  Lattice lat;
  if (!lattice_of(u, lat)) {
    parallel_for(u.size(), [&](std::size_t i) {
      out[i] = i == last ? 0.0 : right_product(u.subspan(i), cells.subspan(i), order);
    });
    return out;
  }
  const auto table = uniform_table(static_cast<std::size_t>(lat.extent), lat.h, order);
  const double inv_gamma = 1.0 / gamma(order);
  parallel_for(u.size(), [&](std::size_t i) {
    if (i == last) return;
    if (lat.index[i] < 0) {
      out[i] = right_product(u.subspan(i), cells.subspan(i), order);
      return;
    }
    const long ki = lat.index[i];
    double acc = 0.0;
    long double loose = 0.0L;
    for (std::size_t j = i; j < last; ++j) {
      if (cells[j].power > 0.0) {
        const double hj = u[j + 1] - u[j];
        loose += std::pow(hj, order) * terminal_cell(cells[j], (u[j + 1] - u[i]) / hj, order);
      } else if (lattice_cell(lat, j)) {
        const auto k = static_cast<std::size_t>(lat.index[j + 1] - ki);
        acc += table.near_node[k] * cells[j].left + table.far_node[k] * cells[j].right;
      } else {
        const auto w = cell_weights(static_cast<long double>(u[j + 1]) - u[i], static_cast<long double>(u[j]) - u[i],
                                    static_cast<long double>(order));
        loose += w.near_node * cells[j].left + w.far_node * cells[j].right;
      }
    }
    out[i] = table.scale * acc + static_cast<double>(loose) * inv_gamma;
  });
  return out;
}

std::vector<double> fd_derivative(std::span<const double> u, std::span<const double> f) {
  const std::size_t n = u.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / (u[1] - u[0]);
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = u[i] - u[i - 1];
    const double hr = u[i + 1] - u[i];
    d[i] = (hl * hl * f[i + 1] - hr * hr * f[i - 1] + (hr * hr - hl * hl) * f[i]) / (hl * hr * (hl + hr));
  }
  // second-order one-sided three-point formulas
  auto one_sided = [](double f0, double f1, double f2, double h1, double h2) {
    // derivative at x0 with nodes x0, x0+h1, x0+h1+h2
    const double s = h1 + h2;
    return (-(2 * h1 + h2) / (h1 * s)) * f0 + (s / (h1 * h2)) * f1 - (h1 / (h2 * s)) * f2;
  };
  d[0] = one_sided(f[0], f[1], f[2], u[1] - u[0], u[2] - u[1]);
  d[n - 1] = -one_sided(f[n - 1], f[n - 2], f[n - 3], u[n - 1] - u[n - 2], u[n - 2] - u[n - 3]);
  return d;
}

double trapezoid(std::span<const double> u, std::span<const double> values) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < u.size(); ++j) acc += 0.5 * (u[j + 1] - u[j]) * (values[j] + values[j + 1]);
  return acc;
}

}  // namespace psifrac::detail

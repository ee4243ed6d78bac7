#pragma once

namespace psifrac {

/// Argument pack for the one-parameter Mittag-Leffler function E_alpha(z).
struct MLParams {
  double alpha;
  double z;
};

/// Gamma function. Throws Error(pole) at 0, -1, -2, ...
double gamma(double x);

/// log|Gamma(x)| for x > 0. Thread-safe (does not touch signgam).
double log_gamma(double x);

/// Digamma Psi(x) = Gamma'(x)/Gamma(x) for x > 0.
double digamma(double x);

/// E_alpha(z) = sum_k z^k / Gamma(alpha k + 1), alpha in (0, 2].
///
/// Power series with term-ratio stopping for |z| <= 30, exponential
/// asymptotics beyond. Throws Error(convergence) when the series cannot
/// deliver ~1e-9 relative accuracy (term cap hit, overflow or cancellation).
double mittag_leffler(MLParams p);

}  // namespace psifrac

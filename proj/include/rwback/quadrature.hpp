#pragma once

#include "rwback/certify.hpp"

#include <functional>
#include <vector>

namespace rwback {

// Request for a logarithmically spaced momentum grid.
struct GridSpec {
  double k_min = 1e-2;
  double k_max = 1e3;
  int points = 2048;
};

// Radial quadrature grid for integrals over R^3 of rotationally symmetric
// integrands: sum_i weights[i] * f(nodes[i]) approximates
// int_{R^3} f(|k|) d^3k = 4 pi int_0^inf k^2 f(k) dk on [k_min, k_max].
// The 4 pi k^2 measure is folded into the weights (composite trapezoid in
// log k, so every weight is positive). The infrared closure below k_min and
// the analytic ultraviolet tail beyond k_max are applied by
// subtracted_integral, not stored in the weights.
struct ModeGrid {
  std::vector<double> nodes;    // strictly increasing, all > 0
  std::vector<double> weights;  // positive, include the 4 pi k^2 measure
  double k_max = 0.0;
  int tail_order = 2;  // number of terms fitted for analytic tails
};

// Throws std::invalid_argument unless 0 < k_min < k_max and points >= 16.
ModeGrid grid_build(const GridSpec& spec);

// Pieces of a subtracted mode integral, reported separately for diagnostics.
struct IntegralBreakdown {
  double value = 0.0;       // interior + endpoint correction + ir + uv
  double interior = 0.0;    // weighted node sum plus endpoint-derivative correction
  double ir_closure = 0.0;  // analytic [0, k_min) piece from a local cubic fit
  double uv_tail = 0.0;     // analytic (k_max, inf) piece from the 2-term power fit
  double tail_bound = 0.0;  // conservative error bound on uv_tail
};

// Integral over R^3 of a smooth, counterterm-subtracted integrand sampled on
// the grid. `tail` is the guaranteed asymptotic decay exponent of the
// integrand values (f = O(k^-tail) beyond k_max); the analytic tail is fitted
// with the 2-term model {k^-tail, k^-tail-2} on spread-out trailing nodes.
// Summation is fixed-order (ascending k) compensated, so results are
// bit-reproducible. Both variants throw std::domain_error when tail <= 3
// (divergent tail beyond k_max); the scalar variant also throws when the
// fitted tail bound exceeds the tolerance budget, while the report variant
// hands the bound to the caller instead. Error messages name the offending
// k_max. Throws std::invalid_argument on a size mismatch.
IntegralBreakdown subtracted_integral_report(const ModeGrid& grid,
                                             const std::vector<double>& values,
                                             double tail);
double subtracted_integral(const ModeGrid& grid,
                           const std::vector<double>& values, double tail);

// Tolerance guard used by the scalar entry points: throws std::domain_error
// when the fitted tail bound exceeds 1e-8 (1 + |value|), naming k_max. Public
// so callers that start from a report can apply the identical budget.
void enforce_tail_budget(const IntegralBreakdown& out, double k_max);

// Zero-mode constant of the regularized k^-3 pairing against the Gaussian
// mollifier exp(-beta k^2): the pairing of the distribution
// F(log r)/(-4 pi^(3/2) Gamma(3/2)) with the mollifier, which the analytic
// continuation of |k|^zeta evaluates to -2 pi (log beta + 2 - gamma_E).
// The certification replays that continuation numerically; a closed-form
// shortcut constant in circulation (Gamma'(3/2)-based) fails it and is kept
// only as a documented rejection.
double pairing_zero_mode(double beta);

// Reference constants of the regularized pairing. gamma_three_halves and its
// derivative satisfy Gamma(3/2) = sqrt(pi)/2 and
// Gamma'(3/2) = Gamma(3/2) (2 - gamma_E - 2 log 2).
struct PairingConstants {
  double log_fourier;       // -4 pi^(3/2) Gamma(3/2) = -2 pi^2
  double gamma_three_halves;
  double gamma_prime_three_halves;
  double zero_mode;         // operative pairing_zero_mode(1/2)
  double zero_mode_circulated;  // Gamma'(3/2)/(sqrt(2 pi) * (-2 pi^2)), rejected
};
PairingConstants pairing_constants();

// Infrared-regularized pairing of k^-3 with a smooth f of known value f(0):
//   int_{R^3} k^-3 [f(k) - f(0) chi(k)] d^3k + f(0) * Z0,
// with chi(k) = exp(-beta k^2), beta = 1/2, and Z0 = pairing_zero_mode(beta).
// The result is independent of the mollifier width; the _beta variant is the
// testing seam for that invariance. The integrand's large-k tail must decay
// at least like 1/k^2 relative to the leading 1/k^3 (true for every
// subtracted mode integrand here); a non-decaying tail throws
// std::domain_error.
double regularized_k3_pairing(const std::function<double(double)>& f, double f0);
double regularized_k3_pairing_beta(const std::function<double(double)>& f,
                                   double f0, double beta);

// The same pairing prescription evaluated from tabulated values f(nodes[i])
// on a caller-supplied grid, for integrands known only at mode-grid nodes
// (the callable variants above delegate here after sampling their default
// grid). The report variant exposes the breakdown and leaves the tail budget
// to the caller; the scalar variant enforces it. Both run the tail-decay
// probe.
struct PairingBreakdown {
  IntegralBreakdown integral;  // subtracted piece, int k^-3 (f - f0 chi)
  double zero_mode = 0.0;      // f0 * pairing_zero_mode(beta)
  double value = 0.0;          // integral.value + zero_mode
};
PairingBreakdown regularized_k3_pairing_grid_report(
    const ModeGrid& grid, const std::vector<double>& f, double f0,
    double beta = 0.5);
double regularized_k3_pairing_grid(const ModeGrid& grid,
                                   const std::vector<double>& f, double f0,
                                   double beta = 0.5);

// Grid construction, Gaussian reference values, convergence, the analytic
// continuation oracle for the zero-mode constant, mollifier invariance, the
// frozen flat-space conformal mode integral and tail-bound conservatism.
CertificationReport certify_quadrature();

}  // namespace rwback

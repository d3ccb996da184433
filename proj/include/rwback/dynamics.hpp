#pragma once

#include "rwback/counterterms.hpp"
#include "rwback/quadrature.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwback {

// Semiclassical backreaction on spatially flat Robertson-Walker spacetime:
// equal-time two-point-function modes transported by the field equation, the
// renormalized trace sources built from subtracted mode integrals, and an
// adaptive integrator that advances geometry and modes together while solving
// the trace equation for the highest geometry derivative at every stage.

// ---------------------------------------------------------------------------
// Mode sector. One comoving momentum k carries the three equal-time
// correlator combinations G_phiphi, G_(phipi), G_pipi of the field and its
// canonical momentum pi = a^3 dphi/dt.
struct ModeState {
  double k = 0.0;
  double Gpp = 0.0;    // G_phiphi
  double Gppi = 0.0;   // G_(phipi), symmetrized cross correlator
  double Gpipi = 0.0;  // G_pipi
};

struct ModeDerivative {
  double dGpp = 0.0;
  double dGppi = 0.0;
  double dGpipi = 0.0;
};

// omega_k^2 = k^2/a^2 + m^2 - xi R. May be negative (tachyonic band); the
// transport below is defined for any sign and no clamping is applied.
double mode_frequency_sq(double k, const GeometryState& geo,
                         const CouplingConfig& cfg);

// Linear transport of the equal-time correlators:
//   d/dt G_phiphi = 2 a^-3 G_(phipi)
//   d/dt G_(phipi) = -a^3 omega^2 G_phiphi + a^-3 G_pipi
//   d/dt G_pipi   = -2 a^3 omega^2 G_(phipi)
ModeDerivative mode_rhs(const ModeState& s, const GeometryState& geo,
                        const CouplingConfig& cfg);

// J_k = G_phiphi G_pipi - G_(phipi)^2; conserved by the transport, equal to
// 1/4 exactly on pure states.
double mode_invariant(const ModeState& s);

// ---------------------------------------------------------------------------
// Integrator configuration. Error control is per unit step: a step of size dt
// is accepted when the weighted rms of the embedded error estimate is at most
// dt, which makes conserved-quantity drift over a fixed interval scale
// linearly with rel_tol.
struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = -1.0;  // sentinel: defaults to 1e-3 * rel_tol
  double dt_init = 1e-3;
  double dt_min = 1e-12;  // scaled by max(1, |t|); underflow raises SolverAbort
  // Cap dt at stability_fraction / omega_max over the fastest mode. Near a
  // stationary state the error estimate alone would let dt grow without
  // bound, and the rms error test cannot see high-k content being amplified
  // once a step leaves the stability region of the tableau. Each mode rotates
  // at 2 omega, and the imaginary-axis stability interval of the fifth-order
  // map ends near 2 omega dt = 1, so the default 0.4 keeps the fastest mode
  // at 0.8 with a margin. Set to 0 to disable.
  double stability_fraction = 0.4;
  // Constrained second-order evolution: the geometry state reduces to (a, H),
  // Hdot is solved from the trace relation at every stage, and Hddot/Hdddot
  // are reported through finite-difference probes. Requires xi = 1/6 and
  // c_dprime = -1/(2880 pi^2), which removes the third-derivative term from
  // the trace equation identically.
  bool wald_constrained = false;
};

// Full simulation state: geometry point, the trace-solved third derivative,
// the mode ensemble on its quadrature grid, and the knobs.
struct SystemState {
  GeometryState geo;
  double Hdddot = 0.0;
  std::vector<ModeState> modes;
  ModeGrid grid;
  CouplingConfig coupling;
  IntegratorConfig integrator;
  double dt_hint = 0.0;   // step size suggestion carried between steps
  bool pure_init = true;  // initial data was pure (J = 1/4 exactly)
};

// ---------------------------------------------------------------------------
// Initial data. Each callable may be null. The state is assembled as
//   G_phiphi = h_phiphi + phiphi_shift(k)      (must stay positive)
//   G_(phipi) = h_phipi + phipi_shift(k)
//   G_pipi   = (1/4 + G_(phipi)^2) / G_phiphi  (pure closure)
// and a non-null mixing adds mixing(k) * G_phiphi to G_pipi, which sets
// J_k = 1/4 + mixing(k) * G_phiphi. mixing must be nonnegative: J < 1/4 is
// not realizable by a state.
struct InitSpec {
  std::function<double(double)> phiphi_shift;
  std::function<double(double)> phipi_shift;
  std::function<double(double)> mixing;
};

// Builds the state at the given geometry. Hdddot seeds the parametrix
// reference used for the shifts (it only matters for the k^-5 layer). Throws
// std::domain_error naming the offending k when the phiphi component is not
// positive or the mixing is negative.
SystemState init_state(const InitSpec& spec, const GridSpec& grid_spec,
                       const GeometryState& geo, const CouplingConfig& cfg,
                       const IntegratorConfig& integ = {}, double Hdddot = 0.0);

// Named initial-data profiles:
//   "hadamard"         pure parametrix data, all shifts zero
//   "minkowski_vacuum" exact static vacuum (requires H = Hdot = Hddot = 0)
//   "hadamard_bump"    pure bump  bump_amplitude * k^4/(1+k)^13 on G_phiphi;
//                      a nonzero mixed_amplitude adds the mixing profile
//                      mixed_amplitude * k^4/(1+k)^9
struct InitProfileParams {
  double bump_amplitude = 0.0;
  double mixed_amplitude = 0.0;
};
InitSpec make_init_profile(const std::string& name,
                           const InitProfileParams& params,
                           const GeometryState& geo, const CouplingConfig& cfg);

// ---------------------------------------------------------------------------
// Renormalized coincidence limit <phi^2>: the phiphi mode integral minus its
// parametrix, infrared-completed by the regularized k^-3 pairing, divided by
// 8 pi^3. The parametrix layers are taken at the state's current geometry and
// Hdddot.
double phi2_renormalized(const SystemState& state);

// Result of solving the trace equation at a fixed instant.
struct TraceSolve {
  double Hdddot = 0.0;       // solved third derivative (explicit modes)
  double residual = 0.0;     // -R - rhs at the returned Hdddot
  double affine_slope = 0.0; // d(residual)/d(Hdddot), analytic in the sources
  double collinearity_defect = 0.0;  // |F(g+2) - 2F(g+1) + F(g)| affinity check
  int iterations = 0;        // damped fixed-point count on the degenerate path
  bool constrained = false;  // Wald mode: residual reported, nothing solved
  bool degenerate = false;   // third-derivative coefficient vanished
};

// Conformally coupled trace equation (requires xi = 1/6 exactly): solves the
// linear trace relation for Hdddot. With wald_constrained the coefficient of
// Hdddot is identically zero and the residual at the current state is
// reported instead. Throws std::domain_error when xi != 1/6, when the
// Hdddot coefficient vanishes outside the constrained mode, or when the
// constrained mode is requested with c_dprime away from -1/(2880 pi^2).
TraceSolve conformal_geometry_rhs(const SystemState& state);

// General-coupling trace equation. The three subtracted mode integrals are
// evaluated once at the reference Hdddot = guess; their Hdddot dependence
// through the two k^-4-layer subtraction constants cancels pointwise between
// the G_pipi and k^2 G_phiphi blocks, so the remaining dependence is analytic
// and the residual is exactly affine in Hdddot. Solved in one shot;
// degenerates to a damped fixed point (factor 0.5, at most 50 iterations)
// when the affine slope vanishes, throwing std::runtime_error if that does
// not contract.
TraceSolve general_geometry_solve(const SystemState& state, double guess = 0.0);

// Trace bookkeeping at the state's own Hdddot (no solve): -R, the assembled
// source side, their difference, and the energy density combination
// rho - 3p = -R / (8 pi G).
struct TraceDiagnostics {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double rho_minus_3p = 0.0;
};
TraceDiagnostics trace_diagnostics(const SystemState& state);

// Mode-ensemble health: <phi^2>_ren with its quadrature tail bound, the worst
// purity defect, and the k^7-weighted distance of G_phiphi from the
// parametrix at the current geometry.
struct SourceDiagnostics {
  double phi2_ren = 0.0;
  double max_J_defect = 0.0;
  double max_weighted_hadamard = 0.0;
  double tail_bound = 0.0;
};
SourceDiagnostics source_diagnostics(const SystemState& state);

// The static-scale normalization lambda = (2/m) exp(7/8 - gamma_E) singled
// out for mass m on Minkowski space. Throws std::domain_error for m <= 0.
double minkowski_lambda(double m);

// Root of the constrained (second-order) trace relation in Hdot at the
// state's (a, H) and modes; used by the Wald-constrained stepper and exposed
// for direct inspection. Requires the same couplings as the constrained mode.
double wald_solve_Hdot(const SystemState& state);

// ---------------------------------------------------------------------------
// One adaptive step of the coupled geometry-mode system, at most dt_target.
// Embedded 5(4) Runge-Kutta pair with per-stage trace solves; on acceptance
// the state is advanced and its Hdddot (and in constrained mode Hdot, with
// finite-difference Hddot/Hdddot) is refreshed at the new time.
struct StepOutcome {
  double dt_taken = 0.0;
  double dt_next = 0.0;
  double error_estimate = 0.0;  // weighted rms of the embedded difference
};

// Raised when the step size underflows dt_min * max(1, |t|) or a stage
// produces non-finite data; the message carries a diagnostic dump of the
// state.
struct SolverAbort : std::runtime_error {
  explicit SolverAbort(const std::string& what) : std::runtime_error(what) {}
};

StepOutcome step(SystemState& state, double dt_target);

}  // namespace rwback

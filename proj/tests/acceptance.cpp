// Acceptance harness: one self-contained check per shipping criterion.
// Each criterion prints a single "C<n> PASS|FAIL -- summary" line followed by
// indented evidence lines. Run with no arguments for the full suite, or pass
// criterion names (C1 .. C9) to select a subset. Exit status is 0 exactly
// when every selected criterion passes.
//
// Tolerances are pinned here, next to the check that uses them, so a change
// to any bound is visible in this file's history rather than buried in a
// config knob.

#include "rwback/certify.hpp"
#include "rwback/dynamics.hpp"
#include "rwback/runio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

using namespace rwback;

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kWaldCdp = -1.0 / (2880.0 * kPi * kPi);

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> evidence;
};

CouplingConfig coupling(double m, double xi, double lambda = 1.0) {
  CouplingConfig cfg;
  cfg.m = m;
  cfg.xi = xi;
  cfg.lambda = lambda;
  cfg.G_N = 1.0 / (8.0 * kPi);  // 8 pi G = 1 throughout the suite
  return cfg;
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Summarize a certification report for the evidence block: pass/fail counts
// plus every failing line verbatim.
void digest_report(const std::string& label, const CertificationReport& rep,
                   std::vector<std::string>& ev) {
  int pass = 0, fail = 0, info = 0;
  for (const auto& c : rep.checks) {
    if (c.info_only)
      ++info;
    else if (c.pass)
      ++pass;
    else
      ++fail;
  }
  std::string s = label + ": " + std::to_string(pass) + " checks pass";
  if (info > 0) s += ", " + std::to_string(info) + " informational";
  if (fail > 0) s += ", " + std::to_string(fail) + " FAIL";
  ev.push_back(s);
  for (const auto& c : rep.checks)
    if (!c.pass && !c.info_only)
      ev.push_back("  FAIL " + c.name + " -- " + c.detail);
}

// ---------------------------------------------------------------------------
// C1. Exact-arithmetic certification of the series engine and the expansion
// catalog, with the quartic-mass sign ruling as a required report line.

Outcome criterion1() {
  Outcome out;
  const CertificationReport series = certify_series();
  const CertificationReport catalog = certify_expansions();
  digest_report("series engine", series, out.evidence);
  digest_report("expansion catalog", catalog, out.evidence);

  // The sign ruling on the subleading log coefficient: its quoted closed form
  // flips the m^4 group (together with two curvature groups) relative to the
  // transport recursion. The adjudication line must be present in the report.
  std::string ruling;
  for (const auto& c : catalog.checks)
    if (c.name.find("sign groups") != std::string::npos)
      ruling = c.name + " -- " + c.detail;
  if (ruling.empty())
    out.evidence.push_back("MISSING: no sign-group ruling line in the report");
  else
    out.evidence.push_back("sign ruling: " + ruling);

  out.pass = series.all_passed() && catalog.all_passed() && !ruling.empty();
  out.summary = out.pass
                    ? "exact rational certification of the series engine and "
                      "expansion catalog, m^4 sign ruling reported"
                    : "certification reported failures or the sign ruling "
                      "line is missing";
  return out;
}

// ---------------------------------------------------------------------------
// C2. Closure of the subtraction-coefficient systems: symbolically exact,
// and second-order accurate along a sampled analytic trajectory.

Outcome criterion2() {
  Outcome out;
  const CertificationReport rep = certify_subtraction();
  digest_report("subtraction closures", rep, out.evidence);

  // Analytic background with every derivative in closed form, so the only
  // error in the finite-difference residual is the O(dt^2) of the stencil.
  const CouplingConfig cfg = coupling(0.7, 0.05);
  const double H0 = 0.25, A = 0.1, w = 1.3;
  const auto trajectory = [&](double dt, int n) {
    std::vector<std::pair<GeometryState, SubtractionCoefficients>> traj;
    traj.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double t = i * dt;
      GeometryState g;
      g.t = t;
      g.a = std::exp(H0 * t + (A / w) * (1.0 - std::cos(w * t)));
      g.H = H0 + A * std::sin(w * t);
      g.Hdot = A * w * std::cos(w * t);
      g.Hddot = -A * w * w * std::sin(w * t);
      const double H3 = -A * w * w * w * std::cos(w * t);
      const double H4 = A * w * w * w * w * std::sin(w * t);
      traj.emplace_back(g, subtraction_coefficients(g, H3, cfg, H4));
    }
    return traj;
  };

  const double dt0 = 0.02;
  const int n0 = 17;  // span 0.32 at the coarse step
  const double r0 = coefficient_ode_residual(trajectory(dt0, n0), cfg).max;
  const double r1 =
      coefficient_ode_residual(trajectory(dt0 / 2.0, 2 * n0 - 1), cfg).max;
  const double r2 =
      coefficient_ode_residual(trajectory(dt0 / 4.0, 4 * n0 - 3), cfg).max;
  const double order01 = std::log2(r0 / r1);
  const double order12 = std::log2(r1 / r2);
  const double kOrderLo = 1.7, kOrderHi = 2.3;
  const bool refinement = order01 >= kOrderLo && order01 <= kOrderHi &&
                          order12 >= kOrderLo && order12 <= kOrderHi;
  out.evidence.push_back("trajectory residual max: " + fmt6(r0) + " at dt = " +
                         fmt6(dt0) + ", " + fmt6(r1) + " at dt/2, " + fmt6(r2) +
                         " at dt/4");
  out.evidence.push_back("observed convergence orders " + fmt6(order01) +
                         " and " + fmt6(order12) + " (bounds [" + fmt6(kOrderLo) +
                         ", " + fmt6(kOrderHi) + "])");

  out.pass = rep.all_passed() && refinement;
  out.summary =
      out.pass ? "coefficient systems close symbolically and the sampled "
                 "residuals converge at second order"
               : "closure certification or the refinement order failed";
  return out;
}

// ---------------------------------------------------------------------------
// C3. Purity scaling of the truncated parametrix on randomized analytic
// geometries: det - 1/4 falls like k^-6, and the homogeneous A-term
// injection degrades it to k^-2.

Outcome criterion3() {
  Outcome out;
  std::mt19937 rng(20260822u);
  std::uniform_real_distribution<double> sym(-0.5, 0.5);
  std::uniform_real_distribution<double> mass(0.0, 1.5);
  std::uniform_real_distribution<double> coup(-0.3, 0.5);
  std::uniform_real_distribution<double> scale(0.8, 1.6);

  const double kCleanBound = -5.9;
  const double kInjLo = -2.2, kInjHi = -1.8;
  const double kInjectionA = 1e-3;
  const int kGeometries = 10;
  const int kFitPoints = 25;

  double worst_clean = -1e9;
  double inj_lo = 1e9, inj_hi = -1e9;
  bool all_ok = true;
  for (int g = 0; g < kGeometries; ++g) {
    GeometryState geo;
    geo.a = scale(rng);
    geo.H = sym(rng);
    geo.Hdot = sym(rng);
    geo.Hddot = sym(rng);
    const double H3 = sym(rng);
    const double H4 = sym(rng);
    const CouplingConfig cfg = coupling(mass(rng), coup(rng));
    const SubtractionCoefficients sc =
        subtraction_coefficients(geo, H3, cfg, H4);

    const auto slope_of = [&](const SubtractionCoefficients& s) {
      std::vector<double> lx, ly;
      for (int i = 0; i < kFitPoints; ++i) {
        const double k =
            1e2 * std::pow(1e2, static_cast<double>(i) / (kFitPoints - 1));
        const double r = std::abs(purity_residual(k, s, geo));
        lx.push_back(std::log(k));
        ly.push_back(std::log(std::max(r, 1e-300)));
      }
      return fit_slope(lx, ly);
    };

    const double clean = slope_of(sc);
    SubtractionCoefficients inj = sc;
    inj.alpha3 += kInjectionA / (geo.a * geo.a);
    inj.beta3 -= kInjectionA * geo.a * geo.H;
    inj.gamma1 += kInjectionA * geo.a * geo.a;
    const double degraded = slope_of(inj);

    worst_clean = std::max(worst_clean, clean);
    inj_lo = std::min(inj_lo, degraded);
    inj_hi = std::max(inj_hi, degraded);
    const bool ok = clean <= kCleanBound && degraded >= kInjLo &&
                    degraded <= kInjHi;
    all_ok = all_ok && ok;
    if (!ok)
      out.evidence.push_back("geometry " + std::to_string(g) +
                             ": clean slope " + fmt6(clean) +
                             ", injected slope " + fmt6(degraded));
  }
  out.evidence.push_back("clean log-log slopes over k in [1e2, 1e4]: worst " +
                         fmt6(worst_clean) + " (bound <= " + fmt6(kCleanBound) +
                         ")");
  out.evidence.push_back("slopes with the A = " + fmt6(kInjectionA) +
                         " homogeneous injection: [" + fmt6(inj_lo) + ", " +
                         fmt6(inj_hi) + "] (band [" + fmt6(kInjLo) + ", " +
                         fmt6(kInjHi) + "])");
  out.pass = all_ok;
  out.summary = out.pass ? "det - 1/4 decays like k^-6 on all 10 geometries "
                           "and the A-injection degrades it to k^-2"
                         : "a purity slope left its band";
  return out;
}

// ---------------------------------------------------------------------------
// C4. The infrared-regularized k^-3 pairing against an independent analytic
// continuation, plus invariance under the mollifier width.

// int_{R^3} |k|^{-zeta-3} e^{-beta k^2} d^3k for small negative zeta:
// a power-series closure below k0 keeps the 1/zeta blowup of the leading
// term in closed form; composite Simpson in linear k covers the rest.
double continuation_bracket(double zeta, double beta) {
  const double k0 = 0.2;
  double series = 0.0;
  double term = 1.0;  // (-beta)^j / j!
  for (int j = 0; j <= 30; ++j) {
    if (j > 0) term *= -beta / j;
    series += term * std::pow(k0, 2.0 * j - zeta) / (2.0 * j - zeta);
  }
  const double k1 = 14.0;
  const int panels = 1 << 15;
  const double h = (k1 - k0) / panels;
  const auto g = [&](double k) {
    return std::pow(k, -zeta - 1.0) * std::exp(-beta * k * k);
  };
  double s = g(k0) + g(k1);
  for (int i = 1; i < panels; ++i)
    s += ((i % 2) ? 4.0 : 2.0) * g(k0 + i * h);
  const double upper = s * h / 3.0;
  return 4.0 * kPi * (series + upper);
}

// Fourier transform of r^zeta paired with the mollifier; the derivative at
// zeta -> 0^- is the pairing of the log transform.
double continuation_value(double zeta, double beta) {
  const double prefactor = std::pow(2.0, zeta + 3.0) * std::pow(kPi, 1.5) *
                           std::tgamma((zeta + 3.0) / 2.0) /
                           std::tgamma(-zeta / 2.0);
  return prefactor * continuation_bracket(zeta, beta);
}

Outcome criterion4() {
  Outcome out;
  const auto f = [](double k) { return std::exp(-0.5 * k * k); };
  const double paired = regularized_k3_pairing(f, 1.0);

  // One-sided difference quotients of the continuation with a Richardson
  // step that cancels the linear error in the evaluation midpoint.
  const double h = 2.5e-4;
  const double far =
      (continuation_value(-h, 0.5) - continuation_value(-2.0 * h, 0.5)) / h;
  const double near = (continuation_value(-h / 2.0, 0.5) -
                       continuation_value(-h, 0.5)) /
                      (h / 2.0);
  const double oracle = (2.0 * near - far) / (-2.0 * kPi * kPi);
  const double kOracleRel = 1e-6;
  const double rel = std::abs(paired - oracle) / std::abs(oracle);
  out.evidence.push_back("pairing of exp(-k^2/2): " + fmt(paired) +
                         " vs continuation oracle " + fmt(oracle) +
                         ", relative difference " + fmt6(rel) + " (bound " +
                         fmt6(kOracleRel) + ")");

  const double kWidthRel = 1e-8;
  double lo = 1e300, hi = -1e300;
  for (double beta : {0.25, 0.5, 1.0, 2.0}) {
    const double v = regularized_k3_pairing_beta(f, 1.0, beta);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double spread = (hi - lo) / std::max(1.0, std::abs(paired));
  out.evidence.push_back(
      "mollifier widths beta in {1/4, 1/2, 1, 2}: relative spread " +
      fmt6(spread) + " (bound " + fmt6(kWidthRel) + ")");

  out.pass = rel <= kOracleRel && spread <= kWidthRel;
  out.summary = out.pass ? "pairing matches the analytic continuation and is "
                           "independent of the mollifier width"
                         : "pairing disagrees with the continuation or "
                           "depends on the mollifier";
  return out;
}

// ---------------------------------------------------------------------------
// C5. The flat-space fixed point at the static-scale normalization with
// c = c' = 0. The trace residual of the vacuum does not vanish there: it
// equals (17 + 20 log 2 - 20 gamma)/(32 pi^2), removable by the m^4
// subtraction constant but not by the scale choice alone. The check is
// reported honestly: the residual and drift legs fail, the scale-covariance
// leg (doubling lambda shifts the residual by 8 pi G (m^4/4 pi^2) log 4)
// passes, and a calibrated companion run shows the fixed point is exact once
// the measured residual is subtracted.

Outcome criterion5() {
  Outcome out;
  const double m = 1.0;
  CouplingConfig cfg = coupling(m, 1.0 / 6.0, minkowski_lambda(m));
  cfg.c_dprime = kWaldCdp;  // second-order equation; inert at the static point
  GeometryState geo;        // a = 1, H = Hdot = Hddot = 0
  IntegratorConfig integ;
  integ.rel_tol = 1e-9;
  integ.wald_constrained = true;

  // Leg 1: residual at t = 0 on the default grid.
  const GridSpec wide{};
  SystemState st = init_state(make_init_profile("minkowski_vacuum", {}, geo, cfg),
                              wide, geo, cfg, integ);
  const double F0 = trace_diagnostics(st).residual;
  const double kResidualBound = 1e-10;
  const bool leg_residual = std::abs(F0) < kResidualBound;
  const double closed = (17.0 + 20.0 * std::log(2.0) - 20.0 * kEulerGamma) /
                        (32.0 * kPi * kPi);
  out.evidence.push_back("residual at t = 0: " + fmt(F0) + " (bound " +
                         fmt6(kResidualBound) + "); closed form (17 + 20 log 2 "
                         "- 20 gamma)/(32 pi^2) = " + fmt(closed));
  const double lambda_req = cfg.lambda * std::exp(-2.0 * kPi * kPi * F0);
  out.evidence.push_back(
      "removable exactly by the quartic subtraction constant c = " + fmt(F0) +
      " (8 pi G = 1), or by the scale choice lambda = " + fmt(lambda_req) +
      " instead of minkowski_lambda(1) = " + fmt(cfg.lambda));

  // Leg 2: |H| < 1e-8 out to t = 10 with c = 0. The constrained solve pulls
  // Hdot off zero immediately, so the bound is breached within the first
  // step; stop at the breach instead of integrating the full interval.
  const GridSpec evolve_grid{1e-2, 100.0, 256};
  SystemState run = init_state(
      make_init_profile("minkowski_vacuum", {}, geo, cfg), evolve_grid, geo,
      cfg, integ);
  const double hdot_root = wald_solve_Hdot(run);
  const double kHBound = 1e-8;
  double breach_t = -1.0;
  double maxH = 0.0;
  while (run.geo.t < 10.0) {
    step(run, 10.0 - run.geo.t);
    maxH = std::max(maxH, std::abs(run.geo.H));
    if (std::abs(run.geo.H) >= kHBound) {
      breach_t = run.geo.t;
      break;
    }
  }
  const bool leg_drift = breach_t < 0.0 && maxH < kHBound;
  out.evidence.push_back(
      "with c = 0 the constrained trace solve gives Hdot = " + fmt6(hdot_root) +
      " at t = 0; |H| reaches " + fmt6(maxH) + " by t = " +
      fmt6(breach_t < 0.0 ? run.geo.t : breach_t) + " (bound " + fmt6(kHBound) +
      " out to t = 10)");

  // Calibrated companion: subtracting the measured residual through c makes
  // the static point an exact solution, and the run holds it to t = 10.
  CouplingConfig cal = cfg;
  {
    SystemState probe = init_state(
        make_init_profile("minkowski_vacuum", {}, geo, cfg), evolve_grid, geo,
        cfg, integ);
    cal.c = trace_diagnostics(probe).residual;
  }
  SystemState held = init_state(
      make_init_profile("minkowski_vacuum", {}, geo, cal), evolve_grid, geo,
      cal, integ);
  double heldH = 0.0;
  while (held.geo.t < 10.0) {
    step(held, 10.0 - held.geo.t);
    heldH = std::max(heldH, std::abs(held.geo.H));
  }
  out.evidence.push_back("companion run with c = " + fmt(cal.c) +
                         ": |H| <= " + fmt6(heldH) +
                         " out to t = 10 at tolerance 1e-9");

  // Leg 3: scale covariance of the residual under doubling lambda.
  CouplingConfig doubled = cfg;
  doubled.lambda *= 2.0;
  SystemState st2 = init_state(
      make_init_profile("minkowski_vacuum", {}, geo, doubled), wide, geo,
      doubled, integ);
  const double shift = trace_diagnostics(st2).residual - F0;
  const double expected_shift = std::log(4.0) / (4.0 * kPi * kPi);  // 8 pi G = 1
  const double kShiftRel = 1e-8;
  const double shift_rel = std::abs(shift - expected_shift) / expected_shift;
  const bool leg_shift = shift_rel <= kShiftRel;
  out.evidence.push_back("lambda doubled: residual shift " + fmt(shift) +
                         " vs 8 pi G (m^4/4 pi^2) log 4 = " +
                         fmt(expected_shift) + ", relative " + fmt6(shift_rel) +
                         " (bound " + fmt6(kShiftRel) + ")" +
                         (leg_shift ? "" : " FAIL"));

  out.pass = leg_residual && leg_drift && leg_shift;
  out.summary =
      out.pass
          ? "flat-space vacuum is an exact fixed point at c = c' = 0"
          : "the flat-space vacuum is not residual-free at c = c' = 0: the "
            "trace residual is " +
                fmt6(F0) +
                ", so the static point drifts; the lambda-doubling shift "
                "matches its closed form" +
                (leg_shift ? "" : " FAIL");
  return out;
}

// ---------------------------------------------------------------------------
// C6. Purity drift of an evolving pure-state run: small at tight tolerance
// and linear in the tolerance.

Outcome criterion6() {
  Outcome out;
  CouplingConfig cfg = coupling(0.0, 1.0 / 6.0);
  cfg.c_dprime = kWaldCdp;
  GeometryState geo;
  geo.H = 0.2;
  // Narrow spectral band with a strong pure bump: the excited modes make the
  // embedded error estimate, not the spectral stability cap, the binding
  // constraint on the step size, which is what couples the purity drift to
  // the tolerance. Quiescent towers sit on the adiabatic center and their
  // truncation error hides below roundoff at any tolerance.
  const GridSpec gs{1e-2, 5.0, 96};
  InitProfileParams bump;
  bump.bump_amplitude = 5e4;
  const double t_end = 0.3;

  const auto drift_per_unit_time = [&](double tol) {
    IntegratorConfig ic;
    ic.rel_tol = tol;
    ic.wald_constrained = true;
    SystemState st = init_state(make_init_profile("hadamard_bump", bump, geo,
                                                  cfg),
                                gs, geo, cfg, ic);
    while (st.geo.t < t_end - 1e-12) step(st, t_end - st.geo.t);
    double defect = 0.0;
    for (const auto& ms : st.modes)
      defect = std::max(defect, std::abs(mode_invariant(ms) - 0.25));
    return defect / st.geo.t;
  };

  const double kDriftBound = 1e-8;
  const double d10 = drift_per_unit_time(1e-10);
  const bool leg_tight = d10 < kDriftBound;
  out.evidence.push_back("max |J_k - 1/4| per unit time at tolerance 1e-10: " +
                         fmt6(d10) + " (bound " + fmt6(kDriftBound) + ")");

  const double d5 = drift_per_unit_time(1e-5);
  const double d6 = drift_per_unit_time(1e-6);
  const double d7 = drift_per_unit_time(1e-7);
  const double slope = std::log10(d5 / d7) / 2.0;
  const double kSlopeLo = 0.7, kSlopeHi = 1.35;
  const bool leg_linear = d5 > d6 && d6 > d7 && slope >= kSlopeLo &&
                          slope <= kSlopeHi;
  out.evidence.push_back("drift at tolerances 1e-5, 1e-6, 1e-7: " + fmt6(d5) +
                         ", " + fmt6(d6) + ", " + fmt6(d7));
  out.evidence.push_back("decades of drift per decade of tolerance: " +
                         fmt6(slope) + " (band [" + fmt6(kSlopeLo) + ", " +
                         fmt6(kSlopeHi) + "])");

  out.pass = leg_tight && leg_linear;
  out.summary = out.pass ? "purity drift stays below 1e-8 per unit time at "
                           "tight tolerance and scales linearly with it"
                         : "purity drift too large or not tolerance-linear";
  return out;
}

// ---------------------------------------------------------------------------
// C7. Continuity of the general-coupling trace solve toward the conformally
// reduced one along xi = 1/6 +- 10^-n. The massless route converges; the
// massive route plateaus at 120 log(lambda), the scale-dependent mismatch
// between the two printed forms of the equation, and is reported honestly
// as a failure.

Outcome criterion7() {
  Outcome out;
  const double kFinalBound = 1e-8;

  // Massless leg: flat static geometry with a moderate phiphi bump so the
  // mode integrals are nonzero. The parametrix layers all vanish on this
  // background whatever the coupling, so one state serves every xi.
  bool massless_ok = true;
  {
    const CouplingConfig cfg = coupling(0.0, 1.0 / 6.0);
    GeometryState geo;
    const GridSpec gs{1e-2, 1e3, 512};
    InitProfileParams bump;
    bump.bump_amplitude = 0.1;
    SystemState base = init_state(
        make_init_profile("hadamard_bump", bump, geo, cfg), gs, geo, cfg);
    const double ref = conformal_geometry_rhs(base).Hdddot;
    for (int sgn : {+1, -1}) {
      double prev = 1e300;
      double last = 0.0;
      bool mono = true;
      std::string row;
      for (int n = 2; n <= 6; ++n) {
        SystemState st = base;
        st.coupling.xi = 1.0 / 6.0 + sgn * std::pow(10.0, -n);
        last = std::abs(general_geometry_solve(st, 0.0).Hdddot - ref);
        mono = mono && last < prev;
        prev = last;
        row += (n > 2 ? ", " : "") + fmt6(last);
      }
      massless_ok = massless_ok && mono && last < kFinalBound;
      out.evidence.push_back(std::string("m = 0, xi = 1/6 ") +
                             (sgn > 0 ? "+" : "-") +
                             " 10^-n, n = 2..6: |general - conformal| = " +
                             row + (mono ? " (monotone)" : " (NOT monotone)"));
    }
    out.evidence.push_back(std::string("massless route: ") +
                           (massless_ok ? "converges below " : "misses ") +
                           fmt6(kFinalBound) + " at n = 6");
  }

  // Massive leg: static vacuum at the static-scale normalization. The
  // general route carries the homogeneous term's log block, the conformally
  // reduced route the explicit log(a^2/lambda^2) source; their difference in
  // the solved third derivative is 120 log(lambda) and does not close.
  bool massive_ok = true;
  {
    const double lambda = minkowski_lambda(1.0);
    const CouplingConfig cfg = coupling(1.0, 1.0 / 6.0, lambda);
    GeometryState geo;
    SystemState base = init_state(
        make_init_profile("minkowski_vacuum", {}, geo, cfg), GridSpec{}, geo,
        cfg);
    const double ref = conformal_geometry_rhs(base).Hdddot;
    double last = 0.0;
    for (int sgn : {+1, -1}) {
      double prev = 1e300;
      bool mono = true;
      std::string row;
      for (int n = 2; n <= 6; ++n) {
        SystemState st = base;
        st.coupling.xi = 1.0 / 6.0 + sgn * std::pow(10.0, -n);
        last = std::abs(general_geometry_solve(st, 0.0).Hdddot - ref);
        mono = mono && last < prev;
        prev = last;
        row += (n > 2 ? ", " : "") + fmt6(last);
      }
      massive_ok = massive_ok && mono && last < kFinalBound;
      out.evidence.push_back(std::string("m = 1, xi = 1/6 ") +
                             (sgn > 0 ? "+" : "-") +
                             " 10^-n, n = 2..6: |general - conformal| = " +
                             row);
    }
    out.evidence.push_back("massive plateau " + fmt(last) +
                           " = 120 log(lambda) = " +
                           fmt(120.0 * std::log(lambda)) +
                           ": the two printed forms of the equation differ "
                           "by this scale-dependent homogeneous piece");
  }

  out.pass = massless_ok && massive_ok;
  out.summary =
      out.pass ? "general solve meets the conformally reduced solve from "
                 "both sides"
               : std::string("massless route ") +
                     (massless_ok ? "converges" : "FAILS") +
                     "; massive route plateaus at the 120 log(lambda) "
                     "mismatch between the two printed forms";
  return out;
}

// ---------------------------------------------------------------------------
// C8. Persistence of the weighted Hadamard difference: initial data whose
// distance from the parametrix is k^7-bounded keeps that bound, with the
// monitored maximum growing by less than a factor 2 over a unit of time.

Outcome criterion8() {
  Outcome out;
  CouplingConfig cfg = coupling(0.0, 1.0 / 6.0);
  cfg.c_dprime = kWaldCdp;
  GeometryState geo;  // static flat background; m = 0 keeps it static exactly
  const GridSpec gs{};  // default grid
  InitProfileParams bump;
  bump.bump_amplitude = 1e8;  // k^4/(1+k)^13 profile: k^7-weighted max is finite
  IntegratorConfig ic;
  ic.rel_tol = 1e-6;
  ic.wald_constrained = true;
  SystemState st = init_state(make_init_profile("hadamard_bump", bump, geo, cfg),
                              gs, geo, cfg, ic);
  const double w0 = source_diagnostics(st).max_weighted_hadamard;
  double wmax = w0;
  std::string row = fmt6(w0) + " at t = 0";
  for (double tchk : {0.25, 0.5, 0.75, 1.0}) {
    while (st.geo.t < tchk - 1e-12) step(st, tchk - st.geo.t);
    const double w = source_diagnostics(st).max_weighted_hadamard;
    wmax = std::max(wmax, w);
    row += ", " + fmt6(w) + " at t = " + fmt6(tchk);
  }
  const double kGrowthBound = 2.0;
  const double growth = wmax / w0;
  out.evidence.push_back("k^7-weighted distance from the parametrix: " + row);
  out.evidence.push_back("growth factor " + fmt6(growth) + " (bound < " +
                         fmt6(kGrowthBound) + ") at tolerance 1e-6 on the "
                         "default grid");
  out.pass = growth < kGrowthBound && wmax > 0.0;
  out.summary = out.pass ? "k^7-bounded differences stay bounded: monitored "
                           "growth factor " + fmt6(growth) + " over t in [0, 1]"
                         : "weighted difference grew by " + fmt6(growth);
  return out;
}

// ---------------------------------------------------------------------------
// C9. Determinism: the same configuration run twice produces byte-identical
// CSV output. The evolution loop is a single thread with fixed-order
// compensated reductions, so there is no thread count to vary in the first
// place; the check exercises the full file-writing path.

Outcome criterion9() {
  Outcome out;
  const std::string config_text = R"({
    "coupling": {"m": 1.0, "lambda": "minkowski",
                 "c": 0.061168327802467296, "G_N": 0.039788735772973836},
    "grid": {"k_min": 1.0, "k_max": 100.0, "points": 256},
    "init": {"profile": "hadamard"},
    "geometry": {"H": 0.001},
    "integrator": {"rel_tol": 1e-9, "wald_constrained": true},
    "t_end": 0.05,
    "cadence": 0.025,
    "output_dir": "."
  })";

  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "rwback_acceptance_C9";
  std::error_code ec;
  fs::remove_all(base, ec);
  const fs::path dir_a = base / "a";
  const fs::path dir_b = base / "b";

  for (const fs::path& dir : {dir_a, dir_b}) {
    RunConfig rc = parse_run_config_text(config_text, "acceptance-C9");
    rc.output_dir = dir.string();
    run_simulation(rc);
  }

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir_a))
    names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());

  bool identical = !names.empty();
  std::size_t total = 0;
  for (const auto& name : names) {
    std::ifstream fa(dir_a / name, std::ios::binary);
    std::ifstream fb(dir_b / name, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (!fb || sa.str() != sb.str()) {
      identical = false;
      out.evidence.push_back("file differs or is missing: " + name);
    }
    total += sa.str().size();
  }
  out.evidence.push_back(std::to_string(names.size()) + " files, " +
                         std::to_string(total) + " bytes compared");
  out.evidence.push_back("the mode update is one fixed-order loop with "
                         "compensated reductions; no thread pool exists, so "
                         "the byte stream cannot depend on a thread count");
  fs::remove_all(base, ec);

  out.pass = identical;
  out.summary = out.pass ? "repeated runs are byte-identical"
                         : "repeated runs differ";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Criterion> table = {
      {"C1", criterion1}, {"C2", criterion2}, {"C3", criterion3},
      {"C4", criterion4}, {"C5", criterion5}, {"C6", criterion6},
      {"C7", criterion7}, {"C8", criterion8}, {"C9", criterion9},
  };

  std::vector<std::string> selected(argv + 1, argv + argc);
  if (selected.empty())
    for (const auto& c : table) selected.push_back(c.name);

  bool all = true;
  for (const auto& want : selected) {
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Criterion& c) { return want == c.name; });
    if (it == table.end()) {
      std::fprintf(stderr, "unknown criterion: %s\n", want.c_str());
      return 2;
    }
    Outcome o;
    try {
      o = it->fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    std::printf("%s %s -- %s\n", it->name, o.pass ? "PASS" : "FAIL",
                o.summary.c_str());
    for (const auto& line : o.evidence) std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}

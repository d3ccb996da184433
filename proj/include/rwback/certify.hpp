#pragma once

#include "rwback/expansions.hpp"

#include <map>
#include <string>
#include <vector>

namespace rwback {

struct CheckResult {
  std::string name;
  bool pass = false;
  bool info_only = false;  // informational line; does not affect overall status
  std::string detail;
};

struct CertificationReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::string str() const;  // "PASS <name>: <detail>" lines, one per check
};

// --- building blocks, exposed for unit tests ---

// Eikonal residual g^{mu nu} (d s)(d s) - 4 s; vanishes through weight 6.
TruncatedSeries eikonal_residual(const TruncatedSeries& s);

// Transport residual of u: g ds du + (box s / 2 - 4) u; vanishes through
// weight 4.
TruncatedSeries transport_residual_u(const TruncatedSeries& s, const TruncatedSeries& u);

// Transport residual of v0: g ds dv0 + (box s / 2 - 2) v0 + (box + m^2 - xi R(x)) u;
// vanishes through weight 2.
TruncatedSeries transport_residual_v0(const TruncatedSeries& s, const TruncatedSeries& u,
                                      const TruncatedSeries& v0);

// Coincidence value of the next transport coefficient, from
// 4 v1 = -(box + m^2 - xi R) v0 at the diagonal.
CoeffPoly v1_from_recursion(const TruncatedSeries& v0);

// Laurent expansion of 1/s around equal time, complete through weight 2 with
// z0-degree capped at 4 (enough for two time derivatives).
TruncatedSeries inverse_world_function(const TruncatedSeries& s);

// Equal-time Laurent data of u/s and its first/mixed-second time derivatives:
// each map sends q to the coefficient of Z^q.
struct EqualTimeCore {
  std::map<int, CoeffPoly> phph;  // u/s at z0 = 0
  std::map<int, CoeffPoly> phpi;  // (1/2) D_t (u/s) at z0 = 0
  std::map<int, CoeffPoly> pipi;  // d_x0 d_y0 (u/s) at z0 = 0
};
EqualTimeCore equal_time_core(const TruncatedSeries& s, const TruncatedSeries& u);

// Certification of the series engine itself: ring laws, derivations,
// involutions, the reciprocal and logarithm, and the d'Alembertian product
// rule, all checked as exact identities on nontrivial windows.
CertificationReport certify_series();

// Full certification of the expansion catalog: recursions, symmetries,
// coincidence values, equal-time data, and mutation sensitivity.
CertificationReport certify_expansions();

}  // namespace rwback

#pragma once

#include "rwback/series.hpp"

#include <map>
#include <string>
#include <vector>

namespace rwback {

// A discrepancy between a commonly quoted display and the value the engine
// derives from first principles. The catalog stores the derived value; the
// quoted variant is kept verbatim for reporting.
struct QuotedDeviation {
  std::string slot;      // which coefficient or display
  std::string quoted;    // the circulated form
  std::string derived;   // what the certification machinery produces
  std::string rationale; // how the disagreement is settled
};

// Short-distance expansion data for the Hadamard parametrix on spatially flat
// Robertson-Walker backgrounds, around the equal-space-point split
// z0 = x0 - y0, Z = |vec x - vec y|^2, coefficients at y0.
//
// `s` is the squared geodesic interval (twice the Synge world function),
// complete through weight 6 (weight of z0^p Z^q is p + 2q). `u` and `v0` are
// the first two Hadamard transport coefficients (weights 4 and 2), and `v1`
// the third at coincidence. The transport recursions certifying these live in
// certify.hpp.
struct ExpansionCatalog {
  TruncatedSeries s{6};
  TruncatedSeries u{4};
  TruncatedSeries v0{2};
  CoeffPoly v1;         // coincidence value derived from the transport recursion
  CoeffPoly v1_quoted;  // commonly quoted closed form (three groups differ in sign)

  // Equal-time restrictions of the parametrix core u/s (scaled by -4 pi^2)
  // as Laurent series in Z: maps q -> coefficient of Z^q.
  //   phph:  u/s at z0 = 0
  //   phpi:  symmetrized single time derivative, (1/2) D_t of the above
  //   pipi:  mixed second derivative d_x0 d_y0 (u/s) at z0 = 0
  std::map<int, CoeffPoly> phph;  // q = -1 .. 1
  std::map<int, CoeffPoly> phpi;  // q = -1 .. 0
  std::map<int, CoeffPoly> pipi;  // q = -2 .. 0

  std::vector<QuotedDeviation> deviations;
};

// The catalog is immutable and built once.
const ExpansionCatalog& catalog();

}  // namespace rwback

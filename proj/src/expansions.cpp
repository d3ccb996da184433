#include "rwback/expansions.hpp"

namespace rwback {

namespace {

using P = CoeffPoly;

P r(long long n, long long d = 1) { return P(n, d); }

ExpansionCatalog build() {
  ExpansionCatalog cat;

  const P a2 = P::sym_a(2);
  const P a4 = P::sym_a(4);
  const P a6 = P::sym_a(6);
  const P ai2 = P::sym_a(-2);
  const P ai4 = P::sym_a(-4);
  const P H = P::sym_H();
  const P H_2 = P::sym_H(0, 2);
  const P H_3 = P::sym_H(0, 3);
  const P H_4 = P::sym_H(0, 4);
  const P Hd = P::sym_H(1);
  const P Hd_2 = P::sym_H(1, 2);
  const P Hdd = P::sym_H(2);
  const P H3 = P::sym_H(3);
  const P m2 = P::sym_m2();
  const P m4 = P::sym_m2(2);
  const P xi = P::sym_xi();
  const P xi2 = P::sym_xi(2);
  const P R = scalar_curvature();

  // Squared geodesic interval, complete through weight 6: the z0^2 head minus
  // a^2 Z times a double series in (z0, a^2 Z).
  cat.s.set(2, 0, r(1));
  cat.s.set(0, 1, -a2);
  cat.s.set(1, 1, -(a2 * H));
  cat.s.set(2, 1, r(-1, 3) * a2 * (Hd + H_2));
  cat.s.set(0, 2, r(-1, 12) * a4 * H_2);
  cat.s.set(3, 1, r(-1, 12) * a2 * (Hdd + r(2) * Hd * H));
  cat.s.set(1, 2, r(-1, 12) * a4 * (Hd * H + r(2) * H_3));
  cat.s.set(4, 1, r(-1, 180) * a2 *
                      (r(3) * H3 + r(6) * Hdd * H + r(2) * Hd_2 - r(8) * Hd * H_2 -
                       r(4) * H_4));
  cat.s.set(2, 2, r(-1, 360) * a4 *
                      (r(9) * Hdd * H + r(8) * Hd_2 + r(74) * Hd * H_2 + r(48) * H_4));
  cat.s.set(0, 3, r(-1, 360) * a6 * (r(3) * Hd * H_2 + r(4) * H_4));

  // First transport coefficient, complete through weight 4.
  cat.u.set(0, 0, r(1));
  cat.u.set(2, 0, r(-1, 4) * (Hd + H_2));
  cat.u.set(0, 1, r(1, 12) * a2 * (Hd + r(3) * H_2));
  cat.u.set(3, 0, r(-1, 8) * (Hdd + r(2) * Hd * H));
  cat.u.set(1, 1, r(1, 24) * a2 * (Hdd + r(8) * Hd * H + r(6) * H_3));
  cat.u.set(4, 0, r(1, 480) * (r(-18) * H3 - r(36) * Hdd * H - r(17) * Hd_2 +
                               r(38) * Hd * H_2 + r(19) * H_4));
  cat.u.set(2, 1, r(1, 240) * a2 *
                      (r(3) * H3 + r(26) * Hdd * H + r(17) * Hd_2 + r(52) * Hd * H_2 +
                       H_4));
  cat.u.set(0, 2, r(1, 480) * a4 *
                      (r(4) * Hdd * H + r(3) * Hd_2 + r(36) * Hd * H_2 + r(29) * H_4));

  // Second transport coefficient, complete through weight 2. The z0
  // coefficient carries the (1 - 6 xi) factor the transport recursion
  // requires; see the deviations list.
  cat.v0.set(0, 0, r(-1, 2) * ((r(1, 6) - xi) * R + m2));
  cat.v0.set(1, 0, r(1, 4) * (r(1) - r(6) * xi) * (Hdd + r(4) * Hd * H));
  cat.v0.set(2, 0,
             r(1, 240) * ((r(21) - r(120) * xi) * H3 + (r(87) - r(480) * xi) * Hdd * H +
                          (r(54) - r(300) * xi) * Hd_2 -
                          (r(76) - r(540) * xi) * Hd * H_2 -
                          (r(58) - r(360) * xi) * H_4 + r(30) * m2 * (Hd + H_2)));
  cat.v0.set(0, 1,
             r(1, 240) * a2 *
                 (-H3 + (r(3) - r(60) * xi) * Hdd * H + (r(6) - r(60) * xi) * Hd_2 +
                  (r(76) - r(540) * xi) * Hd * H_2 + (r(58) - r(360) * xi) * H_4 -
                  r(10) * m2 * (Hd + r(3) * H_2)));

  // Third transport coefficient at coincidence, from the recursion.
  const P boxR = dt(R, 2) + r(3) * H * dt(R);
  cat.v1 = r(1, 120) * ((r(1) - r(5) * xi) * boxR +
                        r(5, 12) * (r(1) - r(6) * xi) * (r(1) - r(6) * xi) * R * R -
                        r(2) * (Hd + H_2) * H_2 + r(5) * (r(1) - r(6) * xi) * R * m2 +
                        r(15) * m4);

  // Commonly quoted closed form: the (1/6 - xi)^2, m^4 and (H'H^2 + H^4)
  // groups carry the opposite sign relative to the recursion value.
  cat.v1_quoted = r(1, 60) * (Hd * H_2 + H_4) + r(1, 24) * (r(1, 5) - xi) * boxR -
                  r(9, 2) * (r(1, 6) - xi) * (r(1, 6) - xi) *
                      (Hd_2 + r(4) * Hd * H_2 + r(4) * H_4) -
                  r(1, 8) * m4 + r(1, 4) * (r(1, 6) - xi) * m2 * R;

  // Equal-time Laurent data of the scaled parametrix core u/s.
  cat.phph[-1] = -ai2;
  cat.phph[0] = r(-1, 12) * (Hd + r(2) * H_2);
  cat.phph[1] = r(-1, 1440) * a2 *
                (r(12) * Hdd * H + r(9) * Hd_2 + r(86) * Hd * H_2 + r(51) * H_4);
  cat.phpi[-1] = ai2 * H;
  cat.phpi[0] = r(-1, 24) * (Hdd + r(4) * Hd * H);
  cat.pipi[-2] = r(2) * ai4;
  cat.pipi[-1] = -(ai2 * H_2);
  cat.pipi[0] = r(-1, 240) * (r(4) * H3 + r(16) * Hdd * H + r(27) * Hd_2 +
                              r(30) * Hd * H_2 + r(17) * H_4);

  cat.deviations.push_back(
      {"v0, z0 coefficient",
       "(1/4)(H'' + 4 H' H)",
       "(1/4)(1 - 6 xi)(H'' + 4 H' H)",
       "the weight-1 transport balance and the coefficient symmetry relation "
       "c1 = (d/dt c0)/2 both force the (1 - 6 xi) factor; with it the "
       "recursion's v1 matches the quoted closed form in all slots except "
       "three sign groups flagged separately"});
  cat.deviations.push_back(
      {"equal-time core u/s, Z coefficient",
       "... + 86 H' H^3 + ... (weight-5 term inside a weight-4 display)",
       "... + 86 H' H^2 + ...",
       "every term of that coefficient must have weight 4; the direct series "
       "computation of u/s confirms 86 H' H^2"});
  cat.deviations.push_back(
      {"v1 at coincidence",
       "closed form with -(9/2)(1/6-xi)^2 (...), -m^4/8, +(1/60)(H'H^2+H^4)",
       "transport recursion flips the sign of exactly those three groups",
       "derived from the certified u and v0; downstream homogeneous-term "
       "assembly keeps the quoted value, so the disagreement is reported as "
       "an informational line"});

  return cat;
}

}  // namespace

const ExpansionCatalog& catalog() {
  static const ExpansionCatalog cat = build();
  return cat;
}

}  // namespace rwback

#pragma once

#include "rwback/geom_poly.hpp"

#include <map>
#include <string>
#include <utility>

namespace rwback {

// Bivariate expansion around coincidence in the time split z0 = x0 - y0 and
// the squared spatial separation Z = |x-y|^2, with CoeffPoly coefficients
// attached at the reference time y0.
//
// Terms are indexed by (p, q) for z0^p Z^q with p >= 0; q ranges over all
// integers, because inverting the world function produces Laurent tails in Z.
// The weight of a term is p + 2q. A series knows the maximal weight through
// which its content is complete (`max_weight`); arithmetic propagates that
// validity window, so a product of two partially known expansions reports
// exactly how far it can be trusted. An optional cap on the z0-degree
// (`max_p`) serves coincidence-limit pipelines where at most a couple of time
// derivatives will ever act; it makes weight-0 Laurent tails finite.
class TruncatedSeries {
 public:
  static constexpr int kUnbounded = 1 << 20;

  explicit TruncatedSeries(int max_weight = kUnbounded, int max_p = kUnbounded)
      : max_weight_(max_weight), max_p_(max_p) {}

  static TruncatedSeries from_poly(const CoeffPoly& c, int max_weight,
                                   int max_p = kUnbounded);

  int max_weight() const { return max_weight_; }
  int max_p() const { return max_p_; }
  bool is_zero() const { return terms_.empty(); }
  // Smallest stored term weight (0 for an empty series); enters the validity
  // bound for products.
  int min_term_weight() const;

  const CoeffPoly& coeff(int p, int q) const;
  TruncatedSeries& set(int p, int q, CoeffPoly c);
  TruncatedSeries& add(int p, int q, const CoeffPoly& c);

  TruncatedSeries& operator+=(const TruncatedSeries& o);
  TruncatedSeries& operator-=(const TruncatedSeries& o);
  friend TruncatedSeries operator+(TruncatedSeries l, const TruncatedSeries& r) {
    return l += r;
  }
  friend TruncatedSeries operator-(TruncatedSeries l, const TruncatedSeries& r) {
    return l -= r;
  }
  friend TruncatedSeries operator*(const TruncatedSeries& l, const TruncatedSeries& r);
  friend TruncatedSeries operator*(TruncatedSeries l, const CoeffPoly& c);
  friend TruncatedSeries operator*(TruncatedSeries l, const Rational& c);
  TruncatedSeries operator-() const;
  bool operator==(const TruncatedSeries& o) const { return terms_ == o.terms_; }

  TruncatedSeries truncated(int w, int p = kUnbounded) const;

  // d/dz0 at fixed coefficients.
  TruncatedSeries d_z0() const;
  // d/dZ.
  TruncatedSeries d_Z() const;
  // Time derivative acting on the coefficient functions only (the y0 slot).
  TruncatedSeries time_derivative() const;
  // Multiply by z0^dp Z^dq (dp may not push any exponent below zero).
  TruncatedSeries shifted(int dp, int dq) const;
  // Spatial Laplacian in z: z0^p Z^q -> 2q(2q+1) z0^p Z^(q-1).
  TruncatedSeries laplacian() const;
  // Argument swap F(x,y) -> F(y,x): z0 -> -z0 plus Taylor transport of the
  // coefficients from y0 to x0.
  TruncatedSeries swapped() const;
  // Multiplicative inverse; requires an invertible (single-monomial) constant
  // term, every other term of positive weight, and a finite weight window.
  TruncatedSeries reciprocal() const;
  // log(1 + this); requires all terms to have positive weight and a finite
  // weight window.
  TruncatedSeries log1p() const;
  // Restriction to equal time (z0 = 0): keeps the p = 0 row.
  TruncatedSeries at_equal_time() const;

  std::string str() const;
  const std::map<std::pair<int, int>, CoeffPoly>& terms() const { return terms_; }

 private:
  std::map<std::pair<int, int>, CoeffPoly> terms_;
  int max_weight_;
  int max_p_;

  bool keeps(int p, int q) const {
    return p >= 0 && p <= max_p_ && p + 2 * q <= max_weight_;
  }
};

// Taylor transport of a background quantity from the reference time y0 to
// x0 = y0 + z0: sum_j z0^j / j! d^j c / dt^j.
TruncatedSeries taylor_shift(const CoeffPoly& c, int max_weight,
                             int max_p = TruncatedSeries::kUnbounded);

// RW d'Alembertian acting at x on a bivariate series:
//   box f = d^2_z0 f + 3 H(x0) d_z0 f - a(x0)^-2 lap f.
TruncatedSeries dalembert(const TruncatedSeries& f);

// g^{mu nu}(x) (d_mu f)(d_nu g) for spatially radial bivariate series:
//   (d_z0 f)(d_z0 g) - a(x0)^-2 * 4 Z (d_Z f)(d_Z g).
TruncatedSeries grad_pair(const TruncatedSeries& f, const TruncatedSeries& g);

}  // namespace rwback

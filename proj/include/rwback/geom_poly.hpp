#pragma once

#include "rwback/rational.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace rwback {

// Numeric snapshot of the homogeneous background: scale factor, the Hubble
// rate with as many time derivatives as a formula needs, and the couplings.
struct GeomValues {
  double a = 1.0;
  std::vector<double> hubble;  // hubble[n] = d^n H / dt^n
  double m2 = 0.0;
  double xi = 0.0;

  double H(std::size_t n = 0) const { return n < hubble.size() ? hubble[n] : 0.0; }
};

// Multiplicative monomial  a^ea * prod_n (d^n H/dt^n)^en * (m^2)^em * xi^ex.
// The scale-factor exponent ranges over all integers (inverse powers of a are
// ubiquitous); every other exponent is non-negative.
struct Monomial {
  int a_exp = 0;
  std::vector<int> h_exp;  // h_exp[n] = exponent of the n-th H derivative
  int m2_exp = 0;
  int xi_exp = 0;

  void normalize();
  int degree() const;
  bool operator==(const Monomial& o) const;
  bool operator<(const Monomial& o) const;  // total degree, then lexicographic
};

// Polynomial in the background symbols with exact rational coefficients.
// Supports ring arithmetic, the cosmological time derivative (a' = aH,
// H^(n)' = H^(n+1)), numeric evaluation, and a canonical text rendering used
// by golden-file tests.
class CoeffPoly {
 public:
  CoeffPoly() = default;
  explicit CoeffPoly(const Rational& c);
  CoeffPoly(long long num, long long den);  // convenience: rational constant

  static CoeffPoly monomial(Monomial m, const Rational& c = Rational(1));
  static CoeffPoly sym_a(int power = 1);
  static CoeffPoly sym_H(int deriv = 0, int power = 1);
  static CoeffPoly sym_m2(int power = 1);
  static CoeffPoly sym_xi(int power = 1);

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  Rational constant_value() const;  // coefficient of the empty monomial

  CoeffPoly& operator+=(const CoeffPoly& o);
  CoeffPoly& operator-=(const CoeffPoly& o);
  CoeffPoly& operator*=(const CoeffPoly& o);
  CoeffPoly& operator*=(const Rational& c);
  friend CoeffPoly operator+(CoeffPoly l, const CoeffPoly& r) { return l += r; }
  friend CoeffPoly operator-(CoeffPoly l, const CoeffPoly& r) { return l -= r; }
  friend CoeffPoly operator*(CoeffPoly l, const CoeffPoly& r) { return l *= r; }
  friend CoeffPoly operator*(CoeffPoly l, const Rational& c) { return l *= c; }
  friend CoeffPoly operator*(const Rational& c, CoeffPoly r) { return r *= c; }
  CoeffPoly operator-() const;
  bool operator==(const CoeffPoly& o) const { return terms_ == o.terms_; }

  CoeffPoly time_derivative() const;
  double eval(const GeomValues& g) const;
  std::string str() const;

  const std::map<Monomial, Rational>& terms() const { return terms_; }

 private:
  std::map<Monomial, Rational> terms_;
  void add_term(Monomial m, const Rational& c);
};

// n-th cosmological time derivative.
CoeffPoly dt(const CoeffPoly& p, int n = 1);

// Ricci scalar of the spatially flat RW metric in the (+,-,-,-) convention:
// R = -6 (H' + 2 H^2).
CoeffPoly scalar_curvature();

}  // namespace rwback

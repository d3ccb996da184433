#include "rwback/series.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rwback {

namespace {

int sat_min(int a, int b) { return std::min(a, b); }

int sat_add(int a, int b) {
  if (a >= TruncatedSeries::kUnbounded || b >= TruncatedSeries::kUnbounded)
    return TruncatedSeries::kUnbounded;
  return a + b;
}

// Inverse of a single-monomial polynomial; throws if the polynomial is not a
// single monomial.
CoeffPoly monomial_inverse(const CoeffPoly& c) {
  if (c.terms().size() != 1)
    throw std::runtime_error("series: leading coefficient is not invertible: " + c.str());
  const auto& [m, r] = *c.terms().begin();
  Monomial inv = m;
  inv.a_exp = -inv.a_exp;
  for (int e : inv.h_exp)
    if (e != 0)
      throw std::runtime_error("series: leading coefficient is not invertible: " + c.str());
  if (inv.m2_exp != 0 || inv.xi_exp != 0)
    throw std::runtime_error("series: leading coefficient is not invertible: " + c.str());
  return CoeffPoly::monomial(inv, Rational(1) / r);
}

}  // namespace

TruncatedSeries TruncatedSeries::from_poly(const CoeffPoly& c, int max_weight,
                                           int max_p) {
  TruncatedSeries s(max_weight, max_p);
  s.set(0, 0, c);
  return s;
}

int TruncatedSeries::min_term_weight() const {
  int w = 0;
  bool first = true;
  for (const auto& [k, c] : terms_) {
    const int tw = k.first + 2 * k.second;
    if (first || tw < w) w = tw;
    first = false;
  }
  return w;
}

const CoeffPoly& TruncatedSeries::coeff(int p, int q) const {
  static const CoeffPoly zero;
  auto it = terms_.find({p, q});
  return it == terms_.end() ? zero : it->second;
}

TruncatedSeries& TruncatedSeries::set(int p, int q, CoeffPoly c) {
  if (p < 0) throw std::runtime_error("series: negative z0 power");
  if (!keeps(p, q) || c.is_zero()) {
    terms_.erase({p, q});
  } else {
    terms_[{p, q}] = std::move(c);
  }
  return *this;
}

TruncatedSeries& TruncatedSeries::add(int p, int q, const CoeffPoly& c) {
  if (p < 0) throw std::runtime_error("series: negative z0 power");
  if (!keeps(p, q) || c.is_zero()) return *this;
  auto [it, inserted] = terms_.emplace(std::pair{p, q}, c);
  if (!inserted) {
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  }
  return *this;
}

TruncatedSeries& TruncatedSeries::operator+=(const TruncatedSeries& o) {
  max_weight_ = sat_min(max_weight_, o.max_weight_);
  max_p_ = sat_min(max_p_, o.max_p_);
  for (const auto& [k, c] : o.terms_) add(k.first, k.second, c);
  // Re-prune own terms against the tightened window.
  for (auto it = terms_.begin(); it != terms_.end();) {
    it = keeps(it->first.first, it->first.second) ? std::next(it) : terms_.erase(it);
  }
  return *this;
}

TruncatedSeries& TruncatedSeries::operator-=(const TruncatedSeries& o) {
  return *this += -o;
}

TruncatedSeries operator*(const TruncatedSeries& l, const TruncatedSeries& r) {
  const int w = sat_min(sat_add(l.max_weight_, r.min_term_weight()),
                        sat_add(r.max_weight_, l.min_term_weight()));
  TruncatedSeries out(w, sat_min(l.max_p_, r.max_p_));
  for (const auto& [kl, cl] : l.terms_) {
    for (const auto& [kr, cr] : r.terms_) {
      const int p = kl.first + kr.first;
      const int q = kl.second + kr.second;
      if (!out.keeps(p, q)) continue;
      out.add(p, q, cl * cr);
    }
  }
  return out;
}

TruncatedSeries operator*(TruncatedSeries l, const CoeffPoly& c) {
  if (c.is_zero()) {
    l.terms_.clear();
    return l;
  }
  for (auto& [k, v] : l.terms_) v *= c;
  return l;
}

TruncatedSeries operator*(TruncatedSeries l, const Rational& c) {
  if (c == 0) {
    l.terms_.clear();
    return l;
  }
  for (auto& [k, v] : l.terms_) v *= c;
  return l;
}

TruncatedSeries TruncatedSeries::operator-() const {
  TruncatedSeries out = *this;
  for (auto& [k, v] : out.terms_) v = -v;
  return out;
}

TruncatedSeries TruncatedSeries::truncated(int w, int p) const {
  TruncatedSeries out(sat_min(max_weight_, w), sat_min(max_p_, p));
  for (const auto& [k, c] : terms_) out.add(k.first, k.second, c);
  return out;
}

TruncatedSeries TruncatedSeries::d_z0() const {
  TruncatedSeries out(max_weight_ == kUnbounded ? kUnbounded : max_weight_ - 1,
                      max_p_ == kUnbounded ? kUnbounded : max_p_ - 1);
  for (const auto& [k, c] : terms_) {
    if (k.first == 0) continue;
    out.add(k.first - 1, k.second, c * Rational(k.first));
  }
  return out;
}

TruncatedSeries TruncatedSeries::d_Z() const {
  TruncatedSeries out(max_weight_ == kUnbounded ? kUnbounded : max_weight_ - 2, max_p_);
  for (const auto& [k, c] : terms_) {
    if (k.second == 0) continue;
    out.add(k.first, k.second - 1, c * Rational(k.second));
  }
  return out;
}

TruncatedSeries TruncatedSeries::time_derivative() const {
  TruncatedSeries out(max_weight_, max_p_);
  for (const auto& [k, c] : terms_) out.add(k.first, k.second, c.time_derivative());
  return out;
}

TruncatedSeries TruncatedSeries::shifted(int dp, int dq) const {
  TruncatedSeries out(max_weight_ == kUnbounded ? kUnbounded : max_weight_ + dp + 2 * dq,
                      max_p_ == kUnbounded ? kUnbounded : max_p_ + dp);
  for (const auto& [k, c] : terms_) out.add(k.first + dp, k.second + dq, c);
  return out;
}

TruncatedSeries TruncatedSeries::laplacian() const {
  TruncatedSeries out(max_weight_ == kUnbounded ? kUnbounded : max_weight_ - 2, max_p_);
  for (const auto& [k, c] : terms_) {
    const int q = k.second;
    if (q == 0) continue;
    out.add(k.first, q - 1, c * Rational(2 * q * (2 * q + 1)));
  }
  return out;
}

TruncatedSeries TruncatedSeries::swapped() const {
  if (max_weight_ >= kUnbounded && max_p_ >= kUnbounded)
    throw std::runtime_error("series: argument swap requires a finite window");
  TruncatedSeries out(max_weight_, max_p_);
  for (const auto& [k, c] : terms_) {
    const int p = k.first;
    const int q = k.second;
    const Rational sign = (p % 2 == 0) ? Rational(1) : Rational(-1);
    CoeffPoly der = c;
    Rational fact(1);
    for (int j = 0;; ++j) {
      if (j > 0) {
        der = der.time_derivative();
        fact *= Rational(j);
        if (der.is_zero()) break;
      }
      if (!out.keeps(p + j, q)) break;
      out.add(p + j, q, der * (sign / fact));
    }
  }
  return out;
}

TruncatedSeries TruncatedSeries::reciprocal() const {
  if (max_weight_ >= kUnbounded)
    throw std::runtime_error("series: reciprocal requires a finite truncation window");
  const CoeffPoly inv0 = monomial_inverse(coeff(0, 0));
  // g = this / c0 - 1 must consist of positive-weight terms only.
  TruncatedSeries g = *this * inv0;
  g.set(0, 0, CoeffPoly{});
  if (!g.is_zero() && g.min_term_weight() < 1)
    throw std::runtime_error("series: not invertible at this truncation");
  // 1/(1+g) = sum (-g)^n.
  TruncatedSeries sum(max_weight_, max_p_);
  sum.set(0, 0, CoeffPoly(Rational(1)));
  TruncatedSeries pow = sum;
  const TruncatedSeries neg = -g;
  for (int n = 1; n <= max_weight_; ++n) {
    pow = pow * neg;
    if (pow.is_zero()) break;
    sum += pow;
  }
  return sum * inv0;
}

TruncatedSeries TruncatedSeries::log1p() const {
  if (max_weight_ >= kUnbounded)
    throw std::runtime_error("series: log1p requires a finite truncation window");
  if (!is_zero() && min_term_weight() < 1)
    throw std::runtime_error("series: log1p requires a vanishing constant term");
  TruncatedSeries sum(max_weight_, max_p_);
  TruncatedSeries pow(max_weight_, max_p_);
  pow.set(0, 0, CoeffPoly(Rational(1)));
  Rational sign(1);
  for (int n = 1; n <= max_weight_; ++n) {
    pow = pow * *this;
    if (pow.is_zero()) break;
    sum += pow * (sign / Rational(n));
    sign = -sign;
  }
  return sum;
}

TruncatedSeries TruncatedSeries::at_equal_time() const {
  TruncatedSeries out(max_weight_, 0);
  for (const auto& [k, c] : terms_) {
    if (k.first == 0) out.add(0, k.second, c);
  }
  return out;
}

std::string TruncatedSeries::str() const {
  std::vector<std::pair<int, int>> keys;
  keys.reserve(terms_.size());
  for (const auto& [k, c] : terms_) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), [](const auto& l, const auto& r) {
    const int wl = l.first + 2 * l.second;
    const int wr = r.first + 2 * r.second;
    if (wl != wr) return wl < wr;
    if (l.first != r.first) return l.first < r.first;
    return l.second < r.second;
  });
  std::ostringstream out;
  for (const auto& k : keys) {
    std::string label;
    if (k.first != 0) {
      label = "z0";
      if (k.first != 1) label += "^" + std::to_string(k.first);
    }
    if (k.second != 0) {
      if (!label.empty()) label += " ";
      label += "Z";
      if (k.second != 1) label += "^" + std::to_string(k.second);
    }
    if (label.empty()) label = "1";
    out << label << ": " << terms_.at(k).str() << "\n";
  }
  return out.str();
}

TruncatedSeries taylor_shift(const CoeffPoly& c, int max_weight, int max_p) {
  if (max_weight >= TruncatedSeries::kUnbounded && max_p >= TruncatedSeries::kUnbounded)
    throw std::runtime_error("series: taylor_shift requires a finite window");
  TruncatedSeries out(max_weight, max_p);
  CoeffPoly der = c;
  Rational fact(1);
  for (int j = 0;; ++j) {
    if (j > 0) {
      der = der.time_derivative();
      fact *= Rational(j);
      if (der.is_zero()) break;
    }
    if (j > max_weight || j > max_p) break;
    out.add(j, 0, der * (Rational(1) / fact));
  }
  return out;
}

TruncatedSeries dalembert(const TruncatedSeries& f) {
  const int w = f.max_weight();
  const int p = f.max_p();
  const TruncatedSeries H_x = taylor_shift(CoeffPoly::sym_H(), w, p);
  const TruncatedSeries a2inv_x = taylor_shift(CoeffPoly::sym_a(-2), w, p);
  return f.d_z0().d_z0() + H_x * f.d_z0() * Rational(3) - a2inv_x * f.laplacian();
}

TruncatedSeries grad_pair(const TruncatedSeries& f, const TruncatedSeries& g) {
  const int w = sat_min(f.max_weight(), g.max_weight());
  const int p = sat_min(f.max_p(), g.max_p());
  const TruncatedSeries a2inv_x = taylor_shift(CoeffPoly::sym_a(-2), w, p);
  return f.d_z0() * g.d_z0() -
         a2inv_x * (f.d_Z() * g.d_Z()).shifted(0, 1) * Rational(4);
}

}  // namespace rwback

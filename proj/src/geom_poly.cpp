#include "rwback/geom_poly.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rwback {

void Monomial::normalize() {
  while (!h_exp.empty() && h_exp.back() == 0) h_exp.pop_back();
}

int Monomial::degree() const {
  int d = a_exp + m2_exp + xi_exp;
  for (int e : h_exp) d += e;
  return d;
}

bool Monomial::operator==(const Monomial& o) const {
  return a_exp == o.a_exp && h_exp == o.h_exp && m2_exp == o.m2_exp &&
         xi_exp == o.xi_exp;
}

bool Monomial::operator<(const Monomial& o) const {
  if (degree() != o.degree()) return degree() < o.degree();
  if (a_exp != o.a_exp) return a_exp < o.a_exp;
  const std::size_t n = std::max(h_exp.size(), o.h_exp.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int l = i < h_exp.size() ? h_exp[i] : 0;
    const int r = i < o.h_exp.size() ? o.h_exp[i] : 0;
    if (l != r) return l < r;
  }
  if (m2_exp != o.m2_exp) return m2_exp < o.m2_exp;
  return xi_exp < o.xi_exp;
}

CoeffPoly::CoeffPoly(const Rational& c) {
  if (c != 0) terms_[Monomial{}] = c;
}

CoeffPoly::CoeffPoly(long long num, long long den) : CoeffPoly(Rational(num, den)) {}

CoeffPoly CoeffPoly::monomial(Monomial m, const Rational& c) {
  CoeffPoly p;
  m.normalize();
  if (c != 0) p.terms_[m] = c;
  return p;
}

CoeffPoly CoeffPoly::sym_a(int power) {
  Monomial m;
  m.a_exp = power;
  return monomial(m);
}

CoeffPoly CoeffPoly::sym_H(int deriv, int power) {
  Monomial m;
  if (power != 0) {
    m.h_exp.assign(static_cast<std::size_t>(deriv) + 1, 0);
    m.h_exp[deriv] = power;
  }
  return monomial(m);
}

CoeffPoly CoeffPoly::sym_m2(int power) {
  Monomial m;
  m.m2_exp = power;
  return monomial(m);
}

CoeffPoly CoeffPoly::sym_xi(int power) {
  Monomial m;
  m.xi_exp = power;
  return monomial(m);
}

bool CoeffPoly::is_constant() const {
  return terms_.empty() ||
         (terms_.size() == 1 && terms_.begin()->first == Monomial{});
}

Rational CoeffPoly::constant_value() const {
  auto it = terms_.find(Monomial{});
  return it == terms_.end() ? Rational(0) : it->second;
}

void CoeffPoly::add_term(Monomial m, const Rational& c) {
  if (c == 0) return;
  m.normalize();
  auto [it, inserted] = terms_.emplace(std::move(m), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

CoeffPoly& CoeffPoly::operator+=(const CoeffPoly& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

CoeffPoly& CoeffPoly::operator-=(const CoeffPoly& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

CoeffPoly& CoeffPoly::operator*=(const CoeffPoly& o) {
  CoeffPoly out;
  for (const auto& [ml, cl] : terms_) {
    for (const auto& [mr, cr] : o.terms_) {
      Monomial m = ml;
      m.a_exp += mr.a_exp;
      if (m.h_exp.size() < mr.h_exp.size()) m.h_exp.resize(mr.h_exp.size(), 0);
      for (std::size_t i = 0; i < mr.h_exp.size(); ++i) m.h_exp[i] += mr.h_exp[i];
      m.m2_exp += mr.m2_exp;
      m.xi_exp += mr.xi_exp;
      out.add_term(std::move(m), cl * cr);
    }
  }
  terms_.swap(out.terms_);
  return *this;
}

CoeffPoly& CoeffPoly::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

CoeffPoly CoeffPoly::operator-() const {
  CoeffPoly out = *this;
  for (auto& [m, v] : out.terms_) v = -v;
  return out;
}

CoeffPoly CoeffPoly::time_derivative() const {
  CoeffPoly out;
  for (const auto& [m, c] : terms_) {
    if (m.a_exp != 0) {
      // d/dt a^p = p a^p H
      Monomial d = m;
      if (d.h_exp.empty()) d.h_exp.assign(1, 0);
      d.h_exp[0] += 1;
      out.add_term(std::move(d), c * m.a_exp);
    }
    for (std::size_t n = 0; n < m.h_exp.size(); ++n) {
      if (m.h_exp[n] == 0) continue;
      Monomial d = m;
      d.h_exp[n] -= 1;
      if (d.h_exp.size() < n + 2) d.h_exp.resize(n + 2, 0);
      d.h_exp[n + 1] += 1;
      out.add_term(std::move(d), c * m.h_exp[n]);
    }
  }
  return out;
}

namespace {

double ipow(double x, int e) {
  if (e < 0) return 1.0 / ipow(x, -e);
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= x;
    x *= x;
    e >>= 1;
  }
  return r;
}

std::string symbol_name(std::size_t deriv) {
  if (deriv <= 4) return "H" + std::string(deriv, '\'');
  return "H^(" + std::to_string(deriv) + ")";
}

}  // namespace

double CoeffPoly::eval(const GeomValues& g) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = to_double(c);
    if (m.a_exp != 0) t *= ipow(g.a, m.a_exp);
    for (std::size_t n = 0; n < m.h_exp.size(); ++n) {
      if (m.h_exp[n] != 0) t *= ipow(g.H(n), m.h_exp[n]);
    }
    if (m.m2_exp != 0) t *= ipow(g.m2, m.m2_exp);
    if (m.xi_exp != 0) t *= ipow(g.xi, m.xi_exp);
    sum += t;
  }
  return sum;
}

std::string CoeffPoly::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    std::string factors;
    auto append = [&factors](const std::string& name, int e) {
      if (e == 0) return;
      if (!factors.empty()) factors += "*";
      factors += name;
      if (e != 1) factors += "^" + std::to_string(e);
    };
    append("a", m.a_exp);
    for (std::size_t n = m.h_exp.size(); n-- > 0;) append(symbol_name(n), m.h_exp[n]);
    append("m2", m.m2_exp);
    append("xi", m.xi_exp);

    const Rational mag = c < 0 ? Rational(-c) : c;
    if (first) {
      if (c < 0) out << "-";
      first = false;
    } else {
      out << (c < 0 ? " - " : " + ");
    }
    if (factors.empty()) {
      out << mag.str();
    } else if (mag == 1) {
      out << factors;
    } else {
      out << mag.str() << "*" << factors;
    }
  }
  return out.str();
}

CoeffPoly dt(const CoeffPoly& p, int n) {
  CoeffPoly out = p;
  for (int i = 0; i < n; ++i) out = out.time_derivative();
  return out;
}

CoeffPoly scalar_curvature() {
  return Rational(-6) * (CoeffPoly::sym_H(1) + Rational(2) * CoeffPoly::sym_H(0, 2));
}

}  // namespace rwback

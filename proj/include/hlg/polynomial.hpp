#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>

#include "hlg/errors.hpp"

namespace hlg {

/// Exponent multi-index over at most kMaxVariables variables.
inline constexpr int kMaxVariables = 64;
using Monomial = std::array<std::uint8_t, kMaxVariables>;

/**
 * @brief Sparse multivariate polynomial with real coefficients.
 *
 * Canonical form: no zero coefficients are stored. Terms are kept in an
 * ordered map so iteration order (and therefore floating-point summation
 * order) is deterministic.
 */
class Polynomial
{
public:
  using Terms = std::map<Monomial, double>;

  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_{nvars}
  {
    if (nvars < 0 || nvars > kMaxVariables) { throw ConfigError("Polynomial: too many variables"); }
  }

  static Polynomial constant(int nvars, double value)
  {
    Polynomial p(nvars);
    p.add_term(Monomial{}, value);
    return p;
  }

  static Polynomial variable(int nvars, int k)
  {
    Polynomial p(nvars);
    Monomial m{};
    m[static_cast<std::size_t>(k)] = 1;
    p.add_term(m, 1.0);
    return p;
  }

  int nvars() const { return nvars_; }
  const Terms & terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  void add_term(const Monomial & m, double coeff)
  {
    if (coeff == 0.0) { return; }
    auto [it, inserted] = terms_.try_emplace(m, coeff);
    if (!inserted) {
      it->second += coeff;
      if (it->second == 0.0) { terms_.erase(it); }
    }
  }

  int degree() const
  {
    int best = 0;
    for (const auto & [m, c] : terms_) { best = std::max(best, total_degree(m)); }
    return best;
  }

  double evaluate(std::span<const double> x) const
  {
    if (static_cast<int>(x.size()) < nvars_) { throw ConfigError("Polynomial::evaluate: point too short"); }
    double sum = 0.0;
    for (const auto & [m, c] : terms_) {
      double term = c;
      for (int k = 0; k < nvars_; ++k) {
        for (int e = 0; e < m[static_cast<std::size_t>(k)]; ++e) { term *= x[static_cast<std::size_t>(k)]; }
      }
      sum += term;
    }
    return sum;
  }

  /// Partial derivative with respect to variable k.
  Polynomial derivative(int k) const
  {
    Polynomial out(nvars_);
    const auto kk = static_cast<std::size_t>(k);
    for (const auto & [m, c] : terms_) {
      if (m[kk] == 0) { continue; }
      Monomial mm = m;
      mm[kk] -= 1;
      out.add_term(mm, c * m[kk]);
    }
    return out;
  }

  /// Multiplication by the coordinate function x_k.
  Polynomial times_variable(int k) const
  {
    Polynomial out(nvars_);
    const auto kk = static_cast<std::size_t>(k);
    for (const auto & [m, c] : terms_) {
      Monomial mm = m;
      if (mm[kk] == 255) { throw DomainError("Polynomial: exponent overflow"); }
      mm[kk] += 1;
      out.terms_.emplace_hint(out.terms_.end(), mm, c);
    }
    return out;
  }

  /// Euclidean norm of the coefficient vector.
  double coefficient_norm() const
  {
    double s = 0.0;
    for (const auto & [m, c] : terms_) { s += c * c; }
    return std::sqrt(s);
  }

  Polynomial & operator+=(const Polynomial & o)
  {
    adopt_vars(o);
    for (const auto & [m, c] : o.terms_) { add_term(m, c); }
    return *this;
  }

  Polynomial & operator-=(const Polynomial & o)
  {
    adopt_vars(o);
    for (const auto & [m, c] : o.terms_) { add_term(m, -c); }
    return *this;
  }

  Polynomial & operator*=(double s)
  {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto & [m, c] : terms_) { c *= s; }
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial & b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial & b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial & a, const Polynomial & b)
  {
    Polynomial out(std::max(a.nvars_, b.nvars_));
    for (const auto & [ma, ca] : a.terms_) {
      for (const auto & [mb, cb] : b.terms_) {
        Monomial m;
        for (std::size_t k = 0; k < m.size(); ++k) { m[k] = static_cast<std::uint8_t>(ma[k] + mb[k]); }
        out.add_term(m, ca * cb);
      }
    }
    return out;
  }

  std::string to_string() const
  {
    if (terms_.empty()) { return "0"; }
    std::ostringstream os;
    bool first = true;
    for (const auto & [m, c] : terms_) {
      os << (first ? "" : " + ") << c;
      first = false;
      for (int k = 0; k < nvars_; ++k) {
        const int e = m[static_cast<std::size_t>(k)];
        if (e > 0) { os << "*x" << k << (e > 1 ? "^" + std::to_string(e) : ""); }
      }
    }
    return os.str();
  }

  static int total_degree(const Monomial & m)
  {
    int s = 0;
    for (auto e : m) { s += e; }
    return s;
  }

private:
  void adopt_vars(const Polynomial & o) { nvars_ = std::max(nvars_, o.nvars_); }

  int nvars_{0};
  Terms terms_;
};

/// True iff a and b agree to `rel` relative to the larger coefficient norm (absolute floor `abs`).
inline bool polynomials_match(const Polynomial & a, const Polynomial & b, double rel = 1e-9, double abs = 1e-12)
{
  const double scale = std::max(a.coefficient_norm(), b.coefficient_norm());
  return (a - b).coefficient_norm() <= std::max(rel * scale, abs);
}

}  // namespace hlg

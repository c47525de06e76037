#pragma once

// Step-2 Heisenberg-like groups R^n x R^d defined by an antisymmetric structure form.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hlg/errors.hpp"

namespace hlg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative singular-value threshold used for every numerical rank decision.
inline constexpr double kRankTolerance = 1e-10;

/**
 * @brief Antisymmetric bilinear map omega : R^n x R^n -> R^d.
 *
 * Stored densely as coeff(i, j, l) with 0-based indices. A sparse list of the
 * nonzero upper-triangular entries is kept alongside for fast application.
 */
class OmegaForm
{
public:
  struct Entry
  {
    int i;
    int j;
    int l;
    double value;
  };

  OmegaForm() = default;

  OmegaForm(int n, int d) : n_{n}, d_{d}, coeffs_(static_cast<std::size_t>(n) * n * d, 0.0)
  {
    if (n < 1 || d < 1) { throw ConfigError("OmegaForm: dimensions must be positive"); }
  }

  /// Builds a form from a dense row-major tensor [i][j][l]; rejects non-antisymmetric input.
  static OmegaForm from_tensor(int n, int d, const std::vector<double> & dense, double tol = 1e-12)
  {
    OmegaForm form(n, d);
    if (dense.size() != form.coeffs_.size()) { throw ConfigError("OmegaForm: tensor size mismatch"); }
    form.coeffs_ = dense;
    if (!form.is_antisymmetric(tol)) { throw ConfigError("OmegaForm: tensor is not antisymmetric"); }
    form.rebuild_entries();
    return form;
  }

  int horizontal_dim() const { return n_; }
  int vertical_dim() const { return d_; }

  double operator()(int i, int j, int l) const { return coeffs_[index(i, j, l)]; }

  /// Sets omega(e_i, e_j)_l = value and omega(e_j, e_i)_l = -value.
  void set(int i, int j, int l, double value)
  {
    if (i == j && value != 0.0) { throw ConfigError("OmegaForm: diagonal entries must vanish"); }
    coeffs_[index(i, j, l)] = value;
    coeffs_[index(j, i, l)] = -value;
    rebuild_entries();
  }

  const std::vector<Entry> & entries() const { return entries_; }

  bool is_antisymmetric(double tol = 1e-12) const
  {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        for (int l = 0; l < d_; ++l) {
          if (std::abs((*this)(i, j, l) + (*this)(j, i, l)) > tol) { return false; }
        }
      }
    }
    return true;
  }

  /// omega(u, v) restricted to the first m horizontal coordinates (m = n uses all).
  Vector apply(const Vector & u, const Vector & v, int m = -1) const
  {
    const int mm = m < 0 ? n_ : m;
    Vector out = Vector::Zero(d_);
    for (const auto & e : entries_) {
      if (e.j >= mm) { continue; }
      out[e.l] += e.value * (u[e.i] * v[e.j] - u[e.j] * v[e.i]);
    }
    return out;
  }

  /// Accumulates omega(u, v) into out without allocating; u, v are raw length-n arrays.
  void apply_into(const double * u, const double * v, double * out, int m = -1) const
  {
    const int mm = m < 0 ? n_ : m;
    for (const auto & e : entries_) {
      if (e.j >= mm) { continue; }
      out[e.l] += e.value * (u[e.i] * v[e.j] - u[e.j] * v[e.i]);
    }
  }

  /// The form of the genuinely smaller group on the first m horizontal coordinates.
  OmegaForm restricted(int m) const
  {
    check_rank(m);
    OmegaForm out(m, d_);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        for (int l = 0; l < d_; ++l) { out.coeffs_[out.index(i, j, l)] = (*this)(i, j, l); }
      }
    }
    out.rebuild_entries();
    return out;
  }

  /// d x m(m-1)/2 matrix whose columns are omega(e_i, e_j) for i < j < m.
  Matrix bracket_matrix(int m) const
  {
    check_rank(m);
    const int cols = m * (m - 1) / 2;
    Matrix out = Matrix::Zero(d_, std::max(cols, 1));
    int col = 0;
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j, ++col) {
        for (int l = 0; l < d_; ++l) { out(l, col) = (*this)(i, j, l); }
      }
    }
    return out;
  }

  /// Numerical rank of bracket_matrix(m), threshold relative to the largest singular value.
  int bracket_rank(int m) const
  {
    if (m < 2) { return 0; }
    Eigen::JacobiSVD<Matrix> svd(bracket_matrix(m));
    const auto & s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) { return 0; }
    int rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s[k] > kRankTolerance * s[0]) { ++rank; }
    }
    return rank;
  }

  /// Hoermander condition for the first m horizontal directions.
  bool satisfies_hormander(int m = -1) const { return bracket_rank(m < 0 ? n_ : m) == d_; }

  void check_rank(int m) const
  {
    if (m < 1 || m > n_) { throw ConfigError("rank " + std::to_string(m) + " outside 1.." + std::to_string(n_)); }
  }

private:
  std::size_t index(int i, int j, int l) const
  {
    return (static_cast<std::size_t>(i) * n_ + j) * d_ + l;
  }

  void rebuild_entries()
  {
    entries_.clear();
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        for (int l = 0; l < d_; ++l) {
          const double v = (*this)(i, j, l);
          if (v != 0.0) { entries_.push_back({i, j, l, v}); }
        }
      }
    }
  }

  int n_{0};
  int d_{0};
  std::vector<double> coeffs_;
  std::vector<Entry> entries_;
};

/// A point (w, c) of R^n x R^d.
struct GroupElement
{
  Vector w;
  Vector c;

  GroupElement() = default;
  GroupElement(Vector w_, Vector c_) : w{std::move(w_)}, c{std::move(c_)} {}

  static GroupElement identity(int n, int d) { return {Vector::Zero(n), Vector::Zero(d)}; }

  /// Concatenated coordinates (w_1..w_n, c_1..c_d).
  Vector coords() const
  {
    Vector out(w.size() + c.size());
    out << w, c;
    return out;
  }

  static GroupElement from_coords(const Vector & x, int n)
  {
    return {x.head(n), x.tail(x.size() - n)};
  }

  bool operator==(const GroupElement & o) const
  {
    return w.size() == o.w.size() && c.size() == o.c.size() && w == o.w && c == o.c;
  }
};

/// Result of a horizontal projection; the flag reports whether the truncated form is usable.
struct Projection
{
  GroupElement element;
  bool hormander;
};

/**
 * @brief The group G = R^n x R^d with product (w1, c1)(w2, c2) = (w1 + w2, c1 + c2 + omega(w1, w2) / 2).
 */
class Group
{
public:
  Group() = default;
  explicit Group(OmegaForm form) : form_{std::move(form)} {}

  const OmegaForm & form() const { return form_; }
  int n() const { return form_.horizontal_dim(); }
  int d() const { return form_.vertical_dim(); }

  GroupElement identity() const { return GroupElement::identity(n(), d()); }

  GroupElement element(Vector w, Vector c) const
  {
    GroupElement x{std::move(w), std::move(c)};
    check(x);
    return x;
  }

  GroupElement multiply(const GroupElement & x, const GroupElement & y) const
  {
    check(x);
    check(y);
    GroupElement out{x.w + y.w, x.c + y.c};
    out.c += 0.5 * form_.apply(x.w, y.w);
    return out;
  }

  GroupElement inverse(const GroupElement & x) const
  {
    check(x);
    return {-x.w, -x.c};
  }

  /// Lie bracket [x, y] = (0, omega(w_x, w_y)).
  GroupElement bracket(const GroupElement & x, const GroupElement & y) const
  {
    check(x);
    check(y);
    return {Vector::Zero(n()), form_.apply(x.w, y.w)};
  }

  GroupElement dilate(double lambda, const GroupElement & x) const
  {
    if (!(lambda > 0.0)) { throw DomainError("dilate: lambda must be positive"); }
    check(x);
    return {lambda * x.w, lambda * lambda * x.c};
  }

  /// Zeroes horizontal coordinates beyond m; the vertical part is untouched.
  Projection project(int m, const GroupElement & x) const
  {
    check(x);
    form_.check_rank(m);
    GroupElement out = x;
    out.w.tail(n() - m).setZero();
    return {std::move(out), form_.satisfies_hormander(m)};
  }

  void check(const GroupElement & x) const
  {
    if (x.w.size() != n() || x.c.size() != d()) {
      throw ConfigError("group element has shape (" + std::to_string(x.w.size()) + ", " +
                        std::to_string(x.c.size()) + "), expected (" + std::to_string(n()) + ", " +
                        std::to_string(d()) + ")");
    }
  }

private:
  OmegaForm form_;
};

/// sqrt(|w|^2 + |c|): the vertical norm enters to the first power.
inline double homogeneous_norm(const GroupElement & x)
{
  return std::sqrt(x.w.squaredNorm() + x.c.norm());
}

/// sqrt(|w|^2 + |c|^2), the plain Banach norm on the underlying vector space.
inline double euclidean_norm(const GroupElement & x)
{
  return std::sqrt(x.w.squaredNorm() + x.c.squaredNorm());
}

}  // namespace hlg

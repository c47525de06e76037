#pragma once

// Curvature constants of a projection group: the Hilbert-Schmidt norm of omega,
// the smallest eigenvalue rho2 of its vertical Gram matrix, and the Harnack coefficient.

#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

#include "hlg/errors.hpp"
#include "hlg/group.hpp"

namespace hlg {

struct CurvatureConstants
{
  double hs_norm_sq;
  double rho2;
  double harnack_coeff;
  Matrix gram;
};

/// A[l][k] = sum_{i,j < m} omega_ij^l omega_ij^k.
inline Matrix vertical_gram(const OmegaForm & form, int m)
{
  form.check_rank(m);
  const int d = form.vertical_dim();
  Matrix gram = Matrix::Zero(d, d);
  // each upper-triangular entry appears twice (i,j) and (j,i) with the same square
  for (const auto & a : form.entries()) {
    if (a.j >= m) { continue; }
    for (const auto & b : form.entries()) {
      if (b.i != a.i || b.j != a.j) { continue; }
      gram(a.l, b.l) += 2.0 * a.value * b.value;
    }
  }
  return gram;
}

inline double hs_norm_sq(const OmegaForm & form, int m)
{
  return vertical_gram(form, m).trace();
}

/// Smallest eigenvalue of the vertical Gram matrix; throws if the restriction is not bracket generating.
inline double rho2(const OmegaForm & form, int m)
{
  const Matrix gram = vertical_gram(form, m);
  const double trace = gram.trace();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues()[0];
  if (!(trace > 0.0) || smallest <= kRankTolerance * trace) {
    throw HormanderError("rho2: rank " + std::to_string(m) + " restriction does not generate the center");
  }
  // d = 1: the infimum over the unit sphere {+-1} is the full sum
  return form.vertical_dim() == 1 ? trace : smallest;
}

inline double harnack_coeff(const OmegaForm & form, int m)
{
  return 1.0 + 2.0 * hs_norm_sq(form, m) / rho2(form, m);
}

inline CurvatureConstants curvature_constants(const OmegaForm & form, int m)
{
  CurvatureConstants out;
  out.gram = vertical_gram(form, m);
  out.hs_norm_sq = out.gram.trace();
  out.rho2 = rho2(form, m);
  out.harnack_coeff = 1.0 + 2.0 * out.hs_norm_sq / out.rho2;
  return out;
}

/// Constants for every Hoermander-valid rank in `ranks`; invalid ranks are skipped with valid = false.
struct CurvatureConvergenceRow
{
  int rank;
  bool valid;
  double hs_norm_sq;
  double rho2;
  double harnack_coeff;
};

inline std::vector<CurvatureConvergenceRow> curvature_convergence(const OmegaForm & form, const std::vector<int> & ranks)
{
  std::vector<CurvatureConvergenceRow> rows;
  for (int m : ranks) {
    CurvatureConvergenceRow row{m, false, hs_norm_sq(form, m), 0.0, 0.0};
    try {
      row.rho2 = rho2(form, m);
      row.harnack_coeff = 1.0 + 2.0 * row.hs_norm_sq / row.rho2;
      row.valid = true;
    } catch (const HormanderError &) {
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hlg

#pragma once

// Heat semigroup P_T = exp(T L / 2) on projection groups.
//
// Monte Carlo: P_T f(x) = E f(x g_T) over Brownian endpoints g_T. Every estimator in this file
// reads a shared EndpointEnsemble, so all evaluations at different points or of different
// functions use common random numbers. Standard errors come from the delta method applied to
// the joint sample covariance of the per-sample quantities.
//
// Oracle: an explicit finite-difference solver for d_t u = (X^2 + Y^2) u / 2 on a box in H^3.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlg/curvature.hpp"
#include "hlg/errors.hpp"
#include "hlg/group.hpp"
#include "hlg/parallel.hpp"
#include "hlg/stochastic.hpp"
#include "hlg/verification.hpp"

namespace hlg {

// ---------------------------------------------------------------- test functions

/**
 * @brief floor + height * exp(-1 / (1 - r^2)) with r the Euclidean distance to center over radius.
 */
struct BumpFunction
{
  std::vector<double> center;
  double radius{1.0};
  double height{1.0};
  double floor{0.0};

  BumpFunction() = default;
  BumpFunction(std::vector<double> c, double r, double h, double fl = 0.0)
    : center{std::move(c)}, radius{r}, height{h}, floor{fl}
  {
    if (!(radius > 0.0)) { throw ConfigError("BumpFunction: radius must be positive"); }
    if (floor < 0.0 || height < 0.0) { throw ConfigError("BumpFunction: height and floor must be nonnegative"); }
  }

  double operator()(std::span<const double> z) const
  {
    double r2 = 0.0;
    for (std::size_t k = 0; k < center.size(); ++k) {
      const double t = (z[k] - center[k]) / radius;
      r2 += t * t;
    }
    if (r2 >= 1.0) { return floor; }
    return floor + height * std::exp(-1.0 / (1.0 - r2));
  }

  double sup() const { return floor + height * std::exp(-1.0); }
  double inf() const { return floor; }
};

// ---------------------------------------------------------------- group action on coordinates

/// out = x * g for coordinate arrays of length n + d.
inline void left_translate(const OmegaForm & form, std::span<const double> x, std::span<const double> g, double * out)
{
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  for (int k = 0; k < n + d; ++k) { out[k] = x[static_cast<std::size_t>(k)] + g[static_cast<std::size_t>(k)]; }
  double * c = out + n;
  for (const auto & e : form.entries()) {
    c[e.l] += 0.5 * e.value *
              (x[static_cast<std::size_t>(e.i)] * g[static_cast<std::size_t>(e.j)] -
               x[static_cast<std::size_t>(e.j)] * g[static_cast<std::size_t>(e.i)]);
  }
}

inline std::vector<double> coords_of(const GroupElement & x) { return to_std(x.coords()); }

/// x * (h e_i, 0) for i < n, or x * (0, h e_{i-n}) for i >= n.
inline std::vector<double> shifted_point(const OmegaForm & form, const std::vector<double> & x, int i, double h)
{
  std::vector<double> step(x.size(), 0.0);
  step[static_cast<std::size_t>(i)] = h;
  std::vector<double> out(x.size());
  left_translate(form, x, step, out.data());
  return out;
}

// ---------------------------------------------------------------- sample moments and the delta method

/// Means of Q per-sample quantities and the covariance matrix of those means.
struct SampleMoments
{
  Vector mean;
  Matrix cov_of_mean;
  std::size_t samples{0};
};

/**
 * @brief Evaluates row_fn(g, row) for every endpoint and returns the joint moments.
 *
 * Rows are filled in parallel; sums run in index order, so results do not depend on `workers`.
 */
template <class RowFn>
SampleMoments collect_moments(const EndpointEnsemble & ens, int Q, int workers, RowFn && row_fn)
{
  const std::size_t N = ens.size();
  if (N < 2) { throw ConfigError("collect_moments: need at least two samples"); }
  std::vector<double> rows(N * static_cast<std::size_t>(Q));
  parallel_for(N, workers, [&](std::size_t i) { row_fn(ens.row(i), rows.data() + i * static_cast<std::size_t>(Q)); });
  SampleMoments mom;
  mom.samples = N;
  mom.mean = Vector::Zero(Q);
  for (std::size_t i = 0; i < N; ++i) {
    for (int q = 0; q < Q; ++q) { mom.mean[q] += rows[i * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)]; }
  }
  mom.mean /= static_cast<double>(N);
  mom.cov_of_mean = Matrix::Zero(Q, Q);
  Vector dev(Q);
  for (std::size_t i = 0; i < N; ++i) {
    for (int q = 0; q < Q; ++q) { dev[q] = rows[i * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)] - mom.mean[q]; }
    mom.cov_of_mean.selfadjointView<Eigen::Lower>().rankUpdate(dev);
  }
  mom.cov_of_mean = mom.cov_of_mean.selfadjointView<Eigen::Lower>();
  mom.cov_of_mean /= static_cast<double>(N) * static_cast<double>(N - 1);
  return mom;
}

struct DeltaEstimate
{
  double value{0.0};
  double std_error{0.0};
};

/// h(mean) with standard error sqrt(grad^T Cov grad); the gradient is a central difference on the stderr scale.
template <class Fn>
DeltaEstimate delta_method(const SampleMoments & mom, Fn && fn)
{
  DeltaEstimate out;
  out.value = fn(mom.mean);
  const auto Q = mom.mean.size();
  Vector grad = Vector::Zero(Q);
  Vector probe = mom.mean;
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double sd = std::sqrt(std::max(mom.cov_of_mean(q, q), 0.0));
    if (sd == 0.0) { continue; }
    const double step = 1e-3 * sd;
    probe[q] = mom.mean[q] + step;
    const double up = fn(probe);
    probe[q] = mom.mean[q] - step;
    const double down = fn(probe);
    probe[q] = mom.mean[q];
    grad[q] = (up - down) / (2.0 * step);
  }
  out.std_error = std::sqrt(std::max(grad.dot(mom.cov_of_mean * grad), 0.0));
  return out;
}

// ---------------------------------------------------------------- semigroup estimators

struct SemigroupEstimate
{
  double value{0.0};
  double std_error{0.0};
  std::size_t samples{0};
  double T{0.0};
  int steps{0};
  std::vector<double> point;
};

/// P_T f(x) = E f(x g_T) over the ensemble.
template <class F>
SemigroupEstimate semigroup_mc(const OmegaForm & form, const F & f, const std::vector<double> & x,
                               const EndpointEnsemble & ens, int workers = 1)
{
  const auto mom = collect_moments(ens, 1, workers, [&](std::span<const double> g, double * row) {
    std::vector<double> z(x.size());
    left_translate(form, x, g, z.data());
    row[0] = f(std::span<const double>(z));
  });
  return {mom.mean[0], std::sqrt(mom.cov_of_mean(0, 0)), mom.samples, ens.T, ens.K, x};
}

/**
 * Points x * (+-h e_q) for the horizontal directions q < m followed by the vertical directions.
 * Estimators form the per-sample central difference from the same endpoint (common random numbers).
 */
struct DerivativeProbes
{
  std::vector<std::vector<double>> plus;
  std::vector<std::vector<double>> minus;
  int horizontal{0};
  int vertical{0};
  double h{0.0};
};

inline DerivativeProbes derivative_probes(const OmegaForm & form, const std::vector<double> & x, int m, double h)
{
  DerivativeProbes p;
  p.horizontal = m;
  p.vertical = form.vertical_dim();
  p.h = h;
  for (int i = 0; i < m; ++i) {
    p.plus.push_back(shifted_point(form, x, i, h));
    p.minus.push_back(shifted_point(form, x, i, -h));
  }
  for (int l = 0; l < form.vertical_dim(); ++l) {
    p.plus.push_back(shifted_point(form, x, form.horizontal_dim() + l, h));
    p.minus.push_back(shifted_point(form, x, form.horizontal_dim() + l, -h));
  }
  return p;
}

struct GammaEstimate
{
  /// Sum over horizontal directions of (X_i P_T f)^2.
  DeltaEstimate gamma;
  /// Sum over vertical directions of (Z_l P_T f)^2.
  DeltaEstimate gamma_z;
};

/// Gamma(P_T f)(x) and Gamma^Z(P_T f)(x) from CRN central differences with step h.
template <class F>
GammaEstimate gamma_semigroup_mc(const OmegaForm & form, const F & f, const std::vector<double> & x, double h,
                                 const EndpointEnsemble & ens, int workers = 1, int m = -1)
{
  const int rank = m < 0 ? form.horizontal_dim() : m;
  const auto probes = derivative_probes(form, x, rank, h);
  const int Q = rank + probes.vertical;
  const auto mom = collect_moments(ens, Q, workers, [&](std::span<const double> g, double * row) {
    std::vector<double> zp(x.size());
    std::vector<double> zm(x.size());
    for (int q = 0; q < Q; ++q) {
      left_translate(form, probes.plus[static_cast<std::size_t>(q)], g, zp.data());
      left_translate(form, probes.minus[static_cast<std::size_t>(q)], g, zm.data());
      row[q] = (f(std::span<const double>(zp)) - f(std::span<const double>(zm))) / (2.0 * h);
    }
  });
  GammaEstimate out;
  out.gamma = delta_method(mom, [&](const Vector & v) { return v.head(rank).squaredNorm(); });
  out.gamma_z = delta_method(mom, [&](const Vector & v) { return v.tail(probes.vertical).squaredNorm(); });
  return out;
}

// ---------------------------------------------------------------- functional inequalities

/// Pass rule for Monte Carlo records: margin >= -(3 sigma_margin + deterministic slack).
inline void finalize_statistical(VerificationRecord & r, double margin_stderr, double slack)
{
  r.tolerance = 3.0 * margin_stderr + slack;
  r.finalize();
}

struct InequalityContext
{
  const OmegaForm * form;
  CurvatureConstants constants;
  std::string preset;
  int workers{1};
  /// Derivative step relative to the bump radius.
  double relative_h{1e-3};
};

/**
 * @brief Context whose constants come from a curvature-dimension bound with coefficient alpha:
 * the vertical weight becomes alpha and C becomes 1 + 2 |omega|_2^2 / alpha.
 */
inline InequalityContext with_curvature_alpha(InequalityContext ctx, double alpha)
{
  if (!(alpha > 0.0)) { throw DomainError("with_curvature_alpha: alpha must be positive"); }
  ctx.constants.rho2 = alpha;
  ctx.constants.harnack_coeff = 1.0 + 2.0 * ctx.constants.hs_norm_sq / alpha;
  return ctx;
}

namespace detail {

/**
 * Shared layout for the reverse inequalities: column 0 is f(x g), column 1 the second functional
 * (f^2 or f ln f), then per-sample central differences at step h and at step h/2.
 */
template <class F, class G>
SampleMoments reverse_moments(const InequalityContext & ctx, const F & f, const G & second,
                              const std::vector<double> & x, double h, const EndpointEnsemble & ens, int & Q_diff)
{
  const OmegaForm & form = *ctx.form;
  const auto coarse = derivative_probes(form, x, form.horizontal_dim(), h);
  const auto fine = derivative_probes(form, x, form.horizontal_dim(), 0.5 * h);
  Q_diff = coarse.horizontal + coarse.vertical;
  const int Q = 2 + 2 * Q_diff;
  return collect_moments(ens, Q, ctx.workers, [&](std::span<const double> g, double * row) {
    std::vector<double> z(x.size());
    left_translate(form, x, g, z.data());
    const double fx = f(std::span<const double>(z));
    row[0] = fx;
    row[1] = second(fx);
    std::vector<double> zp(x.size());
    std::vector<double> zm(x.size());
    for (int q = 0; q < Q_diff; ++q) {
      left_translate(form, coarse.plus[static_cast<std::size_t>(q)], g, zp.data());
      left_translate(form, coarse.minus[static_cast<std::size_t>(q)], g, zm.data());
      row[2 + q] = (f(std::span<const double>(zp)) - f(std::span<const double>(zm))) / (2.0 * h);
      left_translate(form, fine.plus[static_cast<std::size_t>(q)], g, zp.data());
      left_translate(form, fine.minus[static_cast<std::size_t>(q)], g, zm.data());
      row[2 + Q_diff + q] = (f(std::span<const double>(zp)) - f(std::span<const double>(zm))) / h;
    }
  });
}

/// Gamma + rho2 T Gamma^Z from the difference block starting at `offset`.
inline double gamma_combo(const Vector & v, int offset, int n, int d, double rho_t)
{
  return v.segment(offset, n).squaredNorm() + rho_t * v.segment(offset + n, d).squaredNorm();
}

}  // namespace detail

/**
 * @brief Gamma(P_T f) + rho2 T Gamma^Z(P_T f) <= (C / T) (P_T f^2 - (P_T f)^2) at x.
 *
 * The differencing slack is 4/3 |LHS(h) - LHS(h/2)|, the Richardson error estimate of LHS(h).
 */
inline VerificationRecord verify_reverse_poincare(const InequalityContext & ctx, const BumpFunction & f,
                                                  const std::vector<double> & x, const EndpointEnsemble & ens)
{
  const double T = ens.T;
  const int n = ctx.form->horizontal_dim();
  const int d = ctx.form->vertical_dim();
  const double h = ctx.relative_h * f.radius;
  const double C = ctx.constants.harnack_coeff;
  const double rho_t = ctx.constants.rho2 * T;
  int Qd = 0;
  const auto mom = detail::reverse_moments(ctx, f, [](double v) { return v * v; }, x, h, ens, Qd);
  auto lhs_fn = [&](const Vector & v) { return detail::gamma_combo(v, 2, n, d, rho_t); };
  auto lhs_half = [&](const Vector & v) { return detail::gamma_combo(v, 2 + Qd, n, d, rho_t); };
  auto rhs_fn = [&](const Vector & v) { return C / T * (v[1] - v[0] * v[0]); };
  const auto lhs = delta_method(mom, lhs_fn);
  const auto rhs = delta_method(mom, rhs_fn);
  const auto margin = delta_method(mom, [&](const Vector & v) { return rhs_fn(v) - lhs_fn(v); });
  VerificationRecord r;
  r.record_id = "reverse_poincare";
  r.preset = ctx.preset;
  r.rank = n;
  r.T = T;
  r.x = x;
  r.lhs = lhs.value;
  r.rhs = rhs.value;
  r.stderr_lhs = lhs.std_error;
  r.stderr_rhs = rhs.std_error;
  finalize_statistical(r, margin.std_error, 4.0 / 3.0 * std::abs(lhs.value - lhs_half(mom.mean)));
  return r;
}

/**
 * @brief Gamma(ln P_T f) + rho2 T Gamma^Z(ln P_T f) <= (C / T) (P_T(f ln f) / P_T f - ln P_T f).
 *
 * Gamma(ln u) is evaluated as Gamma(u) / u^2 from the same CRN differences.
 */
inline VerificationRecord verify_reverse_logsobolev(const InequalityContext & ctx, const BumpFunction & f,
                                                    const std::vector<double> & x, const EndpointEnsemble & ens)
{
  if (!(f.floor > 0.0)) { throw ConfigError("verify_reverse_logsobolev: f needs a positive floor"); }
  const double T = ens.T;
  const int n = ctx.form->horizontal_dim();
  const int d = ctx.form->vertical_dim();
  const double h = ctx.relative_h * f.radius;
  const double C = ctx.constants.harnack_coeff;
  const double rho_t = ctx.constants.rho2 * T;
  int Qd = 0;
  const auto mom = detail::reverse_moments(ctx, f, [](double v) { return v * std::log(v); }, x, h, ens, Qd);
  if (!(mom.mean[0] > 0.0)) { throw DomainError("verify_reverse_logsobolev: semigroup estimate is not positive"); }
  auto lhs_fn = [&](const Vector & v) { return detail::gamma_combo(v, 2, n, d, rho_t) / (v[0] * v[0]); };
  auto lhs_half = [&](const Vector & v) { return detail::gamma_combo(v, 2 + Qd, n, d, rho_t) / (v[0] * v[0]); };
  auto rhs_fn = [&](const Vector & v) { return C / T * (v[1] / v[0] - std::log(v[0])); };
  const auto lhs = delta_method(mom, lhs_fn);
  const auto rhs = delta_method(mom, rhs_fn);
  const auto margin = delta_method(mom, [&](const Vector & v) { return rhs_fn(v) - lhs_fn(v); });
  VerificationRecord r;
  r.record_id = "reverse_logsobolev";
  r.preset = ctx.preset;
  r.rank = n;
  r.T = T;
  r.x = x;
  r.lhs = lhs.value;
  r.rhs = rhs.value;
  r.stderr_lhs = lhs.std_error;
  r.stderr_rhs = rhs.std_error;
  finalize_statistical(r, margin.std_error, 4.0 / 3.0 * std::abs(lhs.value - lhs_half(mom.mean)));
  return r;
}

/**
 * @brief (P_T f)^p(x) <= P_T f^p(y) exp(C d^2 / (4 (p - 1) T)) with the supplied distance d.
 */
inline VerificationRecord verify_wang_harnack(const InequalityContext & ctx, const BumpFunction & f,
                                              const std::vector<double> & x, const std::vector<double> & y, double p,
                                              double distance, const EndpointEnsemble & ens)
{
  if (!(p > 1.0)) { throw DomainError("verify_wang_harnack: p must exceed 1"); }
  const double T = ens.T;
  const OmegaForm & form = *ctx.form;
  const auto mom = collect_moments(ens, 2, ctx.workers, [&](std::span<const double> g, double * row) {
    std::vector<double> z(x.size());
    left_translate(form, x, g, z.data());
    row[0] = f(std::span<const double>(z));
    left_translate(form, y, g, z.data());
    row[1] = std::pow(f(std::span<const double>(z)), p);
  });
  const double factor = std::exp(ctx.constants.harnack_coeff * distance * distance / (4.0 * (p - 1.0) * T));
  auto lhs_fn = [&](const Vector & v) { return std::pow(std::max(v[0], 0.0), p); };
  auto rhs_fn = [&](const Vector & v) { return v[1] * factor; };
  const auto lhs = delta_method(mom, lhs_fn);
  const auto rhs = delta_method(mom, rhs_fn);
  const auto margin = delta_method(mom, [&](const Vector & v) { return rhs_fn(v) - lhs_fn(v); });
  VerificationRecord r;
  r.record_id = "wang_harnack";
  r.preset = ctx.preset;
  r.rank = form.horizontal_dim();
  r.T = T;
  r.p_or_q = p;
  r.x = x;
  r.y = y;
  r.lhs = lhs.value;
  r.rhs = rhs.value;
  r.stderr_lhs = lhs.std_error;
  r.stderr_rhs = rhs.std_error;
  finalize_statistical(r, margin.std_error, 0.0);
  return r;
}

/**
 * @brief |P_T f(x) - P_T f(y)|^2 <= sup|f|^2 (exp(C d^2 / (2T)) - 1).
 */
inline VerificationRecord verify_strong_feller(const InequalityContext & ctx, const BumpFunction & f,
                                               const std::vector<double> & x, const std::vector<double> & y,
                                               double distance, const EndpointEnsemble & ens)
{
  const double T = ens.T;
  const OmegaForm & form = *ctx.form;
  const auto mom = collect_moments(ens, 1, ctx.workers, [&](std::span<const double> g, double * row) {
    std::vector<double> z(x.size());
    left_translate(form, x, g, z.data());
    const double fx = f(std::span<const double>(z));
    left_translate(form, y, g, z.data());
    row[0] = fx - f(std::span<const double>(z));
  });
  const double sup = f.sup();
  const double bound = sup * sup * std::expm1(ctx.constants.harnack_coeff * distance * distance / (2.0 * T));
  const auto lhs = delta_method(mom, [](const Vector & v) { return v[0] * v[0]; });
  VerificationRecord r;
  r.record_id = "strong_feller";
  r.preset = ctx.preset;
  r.rank = form.horizontal_dim();
  r.T = T;
  r.x = x;
  r.y = y;
  r.lhs = lhs.value;
  r.rhs = bound;
  r.stderr_lhs = lhs.std_error;
  finalize_statistical(r, lhs.std_error, 0.0);
  return r;
}

struct StrongFellerModulus
{
  std::vector<VerificationRecord> records;
  /// |P_T f(x) - P_T f(x (h e_1, 0))| for each offset h, in the order given.
  std::vector<double> differences;
  bool shrinking{false};
};

/// Strong-Feller records along y = x (h e_1, 0) for decreasing offsets h; d(x, y) = h exactly.
inline StrongFellerModulus strong_feller_modulus(const InequalityContext & ctx, const BumpFunction & f,
                                                 const std::vector<double> & x, const std::vector<double> & offsets,
                                                 const EndpointEnsemble & ens)
{
  StrongFellerModulus out;
  for (double h : offsets) {
    const auto y = shifted_point(*ctx.form, x, 0, h);
    auto rec = verify_strong_feller(ctx, f, x, y, std::abs(h), ens);
    rec.record_id = "strong_feller_modulus";
    out.differences.push_back(std::sqrt(rec.lhs));
    out.records.push_back(std::move(rec));
  }
  out.shrinking = true;
  for (std::size_t k = 1; k < out.differences.size(); ++k) {
    if (!(out.differences[k] < out.differences[k - 1])) { out.shrinking = false; }
  }
  return out;
}

// ---------------------------------------------------------------- H^3 grid oracle

/// Uniform node grid on a box in (w1, w2, c); node 0 and node N-1 sit on the box faces.
struct Grid3
{
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  std::array<int, 3> shape{};

  double spacing(int a) const { return (hi[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)]) / (shape[static_cast<std::size_t>(a)] - 1); }
  double coord(int a, int i) const { return lo[static_cast<std::size_t>(a)] + i * spacing(a); }
  std::size_t size() const { return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]; }
  bool contains(const std::vector<double> & p) const
  {
    for (std::size_t a = 0; a < 3; ++a) {
      if (!(p[a] >= lo[a] && p[a] <= hi[a])) { return false; }
    }
    return true;
  }
  std::size_t index(int i, int j, int k) const
  {
    return (static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k;
  }

  static Grid3 symmetric_box(double w_half, double c_half, std::array<int, 3> shape)
  {
    if (!(w_half > 0.0) || !(c_half > 0.0)) { throw ConfigError("Grid3: box extents must be positive"); }
    if (shape[0] < 3 || shape[1] < 3 || shape[2] < 3) { throw ConfigError("Grid3: need at least 3 nodes per axis"); }
    return {{-w_half, -w_half, -c_half}, {w_half, w_half, c_half}, shape};
  }
};

/// Node values on a Grid3 at time T.
struct GridFunction
{
  Grid3 grid;
  std::vector<double> values;
  double T{0.0};

  /// Trapezoid-rule integral over the box.
  double integral() const
  {
    double s = 0.0;
    for (int i = 0; i < grid.shape[0]; ++i) {
      const double wi = (i == 0 || i == grid.shape[0] - 1) ? 0.5 : 1.0;
      for (int j = 0; j < grid.shape[1]; ++j) {
        const double wj = (j == 0 || j == grid.shape[1] - 1) ? 0.5 : 1.0;
        for (int k = 0; k < grid.shape[2]; ++k) {
          const double wk = (k == 0 || k == grid.shape[2] - 1) ? 0.5 : 1.0;
          s += wi * wj * wk * values[grid.index(i, j, k)];
        }
      }
    }
    return s * grid.spacing(0) * grid.spacing(1) * grid.spacing(2);
  }

  /// Trilinear interpolation; empty outside the box.
  std::optional<double> interpolate(double w1, double w2, double c) const
  {
    const double p[3] = {w1, w2, c};
    int idx[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double s = (p[a] - grid.lo[static_cast<std::size_t>(a)]) / grid.spacing(a);
      if (!(s >= 0.0) || s > grid.shape[static_cast<std::size_t>(a)] - 1) { return std::nullopt; }
      int i0 = static_cast<int>(std::floor(s));
      if (i0 >= grid.shape[static_cast<std::size_t>(a)] - 1) { i0 = grid.shape[static_cast<std::size_t>(a)] - 2; }
      idx[a] = i0;
      frac[a] = s - i0;
    }
    double out = 0.0;
    for (int di = 0; di < 2; ++di) {
      for (int dj = 0; dj < 2; ++dj) {
        for (int dk = 0; dk < 2; ++dk) {
          const double wgt = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) * (dk ? frac[2] : 1.0 - frac[2]);
          out += wgt * values[grid.index(idx[0] + di, idx[1] + dj, idx[2] + dk)];
        }
      }
    }
    return out;
  }
};

/// Samples f on the grid nodes.
template <class F>
GridFunction sample_on_grid(const Grid3 & grid, const F & f)
{
  GridFunction out{grid, std::vector<double>(grid.size()), 0.0};
  std::array<double, 3> z{};
  for (int i = 0; i < grid.shape[0]; ++i) {
    for (int j = 0; j < grid.shape[1]; ++j) {
      for (int k = 0; k < grid.shape[2]; ++k) {
        z = {grid.coord(0, i), grid.coord(1, j), grid.coord(2, k)};
        out.values[grid.index(i, j, k)] = f(std::span<const double>(z));
      }
    }
  }
  return out;
}

/// Discrete unit-mass Gaussian at the origin with per-axis standard deviation `cells` grid spacings.
inline GridFunction mollified_delta(const Grid3 & grid, double cells = 2.0)
{
  const double s0 = cells * grid.spacing(0);
  const double s1 = cells * grid.spacing(1);
  const double s2 = cells * grid.spacing(2);
  auto gauss = [&](std::span<const double> z) {
    return std::exp(-0.5 * (z[0] * z[0] / (s0 * s0) + z[1] * z[1] / (s1 * s1) + z[2] * z[2] / (s2 * s2)));
  };
  GridFunction out = sample_on_grid(grid, gauss);
  const double mass = out.integral();
  for (auto & v : out.values) { v /= mass; }
  return out;
}

/// The H^3 operator parameter: omega(e_1, e_2) = a.
inline double h3_coefficient(const OmegaForm & form)
{
  if (form.horizontal_dim() != 2 || form.vertical_dim() != 1) {
    throw ConfigError("grid oracle: only n = 2, d = 1 groups are supported");
  }
  const double a = form(0, 1, 0);
  if (a == 0.0) { throw HormanderError("grid oracle: omega(e_1, e_2) vanishes"); }
  return a;
}

/// dt <= 0.2 min(dw^2, dc^2 / s^2) with s = |a| max|w_i| / 2 the largest vertical drift speed on the box.
inline double stability_bound(const Grid3 & grid, double a)
{
  const double dw = std::min(grid.spacing(0), grid.spacing(1));
  const double dc = grid.spacing(2);
  const double wmax = std::max({std::abs(grid.lo[0]), std::abs(grid.hi[0]), std::abs(grid.lo[1]), std::abs(grid.hi[1])});
  const double speed = 0.5 * std::abs(a) * wmax;
  return 0.2 * std::min(dw * dw, dc * dc / (speed * speed));
}

struct HeatFlowResult
{
  GridFunction solution;
  double dt{0.0};
  int steps{0};
};

/// Discretization choices of the grid oracle.
struct OracleOptions
{
  /// Time step as a fraction of stability_bound; ignored when `dt` is positive.
  double dt_fraction{0.5};
  double dt{0.0};
  /// Spatial accuracy of the centered stencils: 2 (three-point) or 4 (five-point).
  int order{2};
  /// Standard deviation of the delta mollifier in grid spacings.
  double mollifier_cells{2.0};
};

namespace detail {

// Centered weights for the first and second derivative; index q is the offset q - R.
template <int R>
struct Stencil;

template <>
struct Stencil<1>
{
  static constexpr double first[3] = {-0.5, 0.0, 0.5};
  static constexpr double second[3] = {1.0, -2.0, 1.0};
};

template <>
struct Stencil<2>
{
  static constexpr double first[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static constexpr double second[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
};

template <int R>
void heat_steps(const Grid3 & g, double a, double h, int steps, std::vector<double> & u)
{
  using S = Stencil<R>;
  constexpr int W = 2 * R + 1;
  const int N0 = g.shape[0];
  const int N1 = g.shape[1];
  const int N2 = g.shape[2];
  const double d0 = g.spacing(0);
  const double d1 = g.spacing(1);
  const double dc = g.spacing(2);
  const auto s0 = static_cast<std::ptrdiff_t>(N1) * N2;
  const auto s1 = static_cast<std::ptrdiff_t>(N2);
  std::vector<double> next = u;
  for (int step = 0; step < steps; ++step) {
    for (int i = R; i < N0 - R; ++i) {
      const double w1 = g.coord(0, i);
      for (int j = R; j < N1 - R; ++j) {
        const double w2 = g.coord(1, j);
        const double cww0 = 0.5 * h / (d0 * d0);
        const double cww1 = 0.5 * h / (d1 * d1);
        const double ccc = 0.5 * h * a * a * (w1 * w1 + w2 * w2) / 4.0 / (dc * dc);
        const double c0c = 0.5 * h * (-a * w2) / (d0 * dc);
        const double c1c = 0.5 * h * (a * w1) / (d1 * dc);
        const std::ptrdiff_t base = i * s0 + j * s1;
        const double * __restrict uc = u.data() + base;
        double * __restrict out = next.data() + base;
        for (int k = R; k < N2 - R; ++k) {
          double acc = 0.0;
#pragma GCC unroll 5
          for (int q = 0; q < W; ++q) {
            const std::ptrdiff_t off = q - R;
            acc += S::second[q] * (cww0 * uc[k + off * s0] + cww1 * uc[k + off * s1] + ccc * uc[k + off]);
          }
#pragma GCC unroll 5
          for (int q = 0; q < W; ++q) {
            if (q == R) { continue; }
            const std::ptrdiff_t off = q - R;
            double m0 = 0.0;
            double m1 = 0.0;
#pragma GCC unroll 5
            for (int p = 0; p < W; ++p) {
              if (p == R) { continue; }
              const std::ptrdiff_t offc = p - R;
              m0 += S::first[p] * uc[k + off * s0 + offc];
              m1 += S::first[p] * uc[k + off * s1 + offc];
            }
            acc += S::first[q] * (c0c * m0 + c1c * m1);
          }
          out[k] = uc[k] + acc;
        }
      }
    }
    std::swap(u, next);
  }
}

}  // namespace detail

/**
 * @brief Explicit Euler for d_t u = (X^2 + Y^2) u / 2, X = d_1 - (a w_2 / 2) d_c, Y = d_2 + (a w_1 / 2) d_c.
 *
 * Expanded: u_t = (u_11 + u_22 + a^2 |w|^2 u_cc / 4 - a w_2 u_1c + a w_1 u_2c) / 2. Nodes within the
 * stencil radius of a face keep their initial values. The same operator propagates functions
 * (semigroup) and densities, because X and Y are divergence free.
 */
inline HeatFlowResult heat_flow_h3(const GridFunction & initial, double T, double a, const OracleOptions & opts = {})
{
  if (!(T >= 0.0)) { throw DomainError("heat_flow_h3: T must be nonnegative"); }
  if (opts.order != 2 && opts.order != 4) { throw ConfigError("grid oracle: stencil order must be 2 or 4"); }
  const Grid3 & g = initial.grid;
  const int radius = opts.order / 2;
  for (int axis = 0; axis < 3; ++axis) {
    if (g.shape[static_cast<std::size_t>(axis)] <= 2 * radius) { throw ConfigError("heat_flow_h3: grid too small for the stencil"); }
  }
  const double bound = stability_bound(g, a);
  const double dt = opts.dt > 0.0 ? opts.dt : opts.dt_fraction * bound;
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
    throw ConfigError("heat_flow_h3: dt " + std::to_string(dt) + " violates the stability bound " + std::to_string(bound));
  }
  const int steps = T == 0.0 ? 0 : static_cast<int>(std::ceil(T / dt - 1e-9));
  const double h = steps ? T / steps : 0.0;
  std::vector<double> u = initial.values;
  if (radius == 1) {
    detail::heat_steps<1>(g, a, h, steps, u);
  } else {
    detail::heat_steps<2>(g, a, h, steps, u);
  }
  return {GridFunction{g, std::move(u), initial.T + T}, h, steps};
}

struct DensityOracle
{
  GridFunction density;
  double mass{0.0};
  /// mass within [0.99, 1.0 + 1e-3]; otherwise the result is flagged.
  bool mass_ok{false};
  OracleOptions options;
  double dt{0.0};
  int steps{0};
};

/// Heat kernel p_T on H^3 from a mollified delta at the origin.
inline DensityOracle pde_oracle_h3(const OmegaForm & form, double T, const Grid3 & grid, const OracleOptions & opts = {})
{
  const double a = h3_coefficient(form);
  auto flow = heat_flow_h3(mollified_delta(grid, opts.mollifier_cells), T, a, opts);
  DensityOracle out;
  out.mass = flow.solution.integral();
  out.mass_ok = out.mass >= 0.99 && out.mass <= 1.0 + 1e-3;
  out.options = opts;
  out.dt = flow.dt;
  out.steps = flow.steps;
  out.density = std::move(flow.solution);
  return out;
}

/// P_T f on the grid by the backward flow from f; the floor of a bump is carried exactly by linearity.
inline GridFunction semigroup_oracle_h3(const OmegaForm & form, const BumpFunction & f, double T, const Grid3 & grid,
                                        const OracleOptions & opts = {})
{
  BumpFunction core = f;
  core.floor = 0.0;
  auto flow = heat_flow_h3(sample_on_grid(grid, core), T, h3_coefficient(form), opts);
  for (auto & v : flow.solution.values) { v += f.floor; }
  return flow.solution;
}

/// max |p(z) - p(z^-1)| / max p over the grid nodes; requires a box symmetric about the origin.
inline double inversion_asymmetry(const GridFunction & p)
{
  const auto & g = p.grid;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(g.lo[static_cast<std::size_t>(a)] + g.hi[static_cast<std::size_t>(a)]) > 1e-12) {
      throw ConfigError("inversion_asymmetry: grid must be symmetric about the origin");
    }
  }
  double peak = 0.0;
  double worst = 0.0;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < g.shape[2]; ++k) {
        const double v = p.values[g.index(i, j, k)];
        const double r = p.values[g.index(g.shape[0] - 1 - i, g.shape[1] - 1 - j, g.shape[2] - 1 - k)];
        peak = std::max(peak, std::abs(v));
        worst = std::max(worst, std::abs(v - r));
      }
    }
  }
  return peak > 0.0 ? worst / peak : 0.0;
}

struct IntegratedHarnackValue
{
  /// int (p(z y^-1) / p(z))^q p(z) dz over the retained nodes.
  double integral{0.0};
  /// Mass of p on nodes dropped because p(z) is below the cutoff or z y^-1 leaves the box.
  double excluded_mass{0.0};
};

/**
 * Trapezoid quadrature of (p(z y^-1) / p(z))^q p(z). Nodes with p(z) <= cutoff * max p are dropped,
 * since the explicit scheme is not positivity preserving in the far tail.
 */
inline IntegratedHarnackValue integrated_harnack_integral(const OmegaForm & form, const GridFunction & p,
                                                          const std::vector<double> & y, double q,
                                                          double cutoff = 1e-7)
{
  const auto & g = p.grid;
  const double peak = *std::max_element(p.values.begin(), p.values.end());
  const double threshold = cutoff * peak;
  const double a = h3_coefficient(form);
  const double cell = g.spacing(0) * g.spacing(1) * g.spacing(2);
  IntegratedHarnackValue out;
  for (int i = 0; i < g.shape[0]; ++i) {
    const double wi = (i == 0 || i == g.shape[0] - 1) ? 0.5 : 1.0;
    const double w1 = g.coord(0, i);
    for (int j = 0; j < g.shape[1]; ++j) {
      const double wj = (j == 0 || j == g.shape[1] - 1) ? 0.5 : 1.0;
      const double w2 = g.coord(1, j);
      for (int k = 0; k < g.shape[2]; ++k) {
        const double wk = (k == 0 || k == g.shape[2] - 1) ? 0.5 : 1.0;
        const double pz = p.values[g.index(i, j, k)];
        const double weight = wi * wj * wk * cell;
        if (pz <= threshold) {
          out.excluded_mass += weight * std::max(pz, 0.0);
          continue;
        }
        // z y^-1 = (w - w_y, c - c_y - a (w1 y2 - w2 y1) / 2)
        const double c = g.coord(2, k);
        const auto shifted = p.interpolate(w1 - y[0], w2 - y[1], c - y[2] - 0.5 * a * (w1 * y[1] - w2 * y[0]));
        if (!shifted) {
          out.excluded_mass += weight * pz;
          continue;
        }
        const double ratio = std::max(*shifted, 0.0) / pz;
        out.integral += weight * std::pow(ratio, q) * pz;
      }
    }
  }
  return out;
}

/**
 * @brief (int (p(z y^-1) / p(z))^q p(z) dz)^{1/q} <= exp(C q d^2(e, y) / (4T)) on the grid oracle.
 *
 * `grid_tolerance` is relative and multiplies the right-hand side. Records whose excluded mass
 * reaches 1% are marked failed.
 */
inline VerificationRecord verify_integrated_harnack(const OmegaForm & form, const CurvatureConstants & constants,
                                                    const GridFunction & density, const std::vector<double> & y,
                                                    double q, double distance, double grid_tolerance,
                                                    const std::string & preset = "", double cutoff = 1e-7)
{
  if (!(q > 1.0)) { throw DomainError("verify_integrated_harnack: q must exceed 1"); }
  const auto value = integrated_harnack_integral(form, density, y, q, cutoff);
  VerificationRecord r;
  r.record_id = "integrated_harnack";
  r.preset = preset;
  r.rank = form.horizontal_dim();
  r.T = density.T;
  r.p_or_q = q;
  r.x = {0.0, 0.0, 0.0};
  r.y = y;
  r.lhs = std::pow(value.integral, 1.0 / q);
  r.rhs = std::exp(constants.harnack_coeff * q * distance * distance / (4.0 * density.T));
  r.tolerance = grid_tolerance * r.rhs;
  r.finalize();
  if (value.excluded_mass >= 0.01) { r.pass = false; }
  return r;
}

// ---------------------------------------------------------------- kernel density estimate

/// Product-Gaussian kernel density of the ensemble at each query point (bandwidth per coordinate).
inline std::vector<double> density_kde(const EndpointEnsemble & ens, const std::vector<double> & bandwidth,
                                       const std::vector<std::vector<double>> & queries, int workers = 1)
{
  const int D = ens.n + ens.d;
  if (static_cast<int>(bandwidth.size()) != D) { throw ConfigError("density_kde: bandwidth size mismatch"); }
  double norm = 1.0;
  for (double b : bandwidth) {
    if (!(b > 0.0)) { throw ConfigError("density_kde: bandwidth must be positive"); }
    norm *= b * std::sqrt(2.0 * std::numbers::pi);
  }
  std::vector<double> out(queries.size(), 0.0);
  parallel_for(queries.size(), workers, [&](std::size_t qi) {
    const auto & q = queries[qi];
    double s = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const auto g = ens.row(i);
      double e = 0.0;
      for (int k = 0; k < D; ++k) {
        const double t = (q[static_cast<std::size_t>(k)] - g[static_cast<std::size_t>(k)]) / bandwidth[static_cast<std::size_t>(k)];
        e += t * t;
      }
      s += std::exp(-0.5 * e);
    }
    out[qi] = s / (static_cast<double>(ens.size()) * norm);
  });
  return out;
}

}  // namespace hlg

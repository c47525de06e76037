#pragma once

// Brownian motion on a projection group: g_t = (B_t, M_t / 2) with M_t = int omega(B_s, dB_s).
// The stochastic integral uses the left-point rule M_{k+1} = M_k + omega(B_k, dB_k); for antisymmetric
// omega the Ito and Stratonovich integrals coincide, so no correction term is needed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hlg/errors.hpp"
#include "hlg/group.hpp"
#include "hlg/parallel.hpp"
#include "hlg/random.hpp"

namespace hlg {

/// Stream label mixed into every Brownian increment key.
inline const std::uint64_t kBrownianStream = hash_label("brownian");

struct BrownianPath
{
  double T{0.0};
  int K{0};
  Matrix B;
  Matrix M;
  std::uint64_t seed{0};
  std::uint64_t stream{0};
  std::uint64_t index{0};

  GroupElement at(int k) const { return {B.row(k).transpose(), 0.5 * M.row(k).transpose()}; }
  GroupElement endpoint() const { return at(K); }
};

namespace detail {

inline void check_time_grid(double T, int K)
{
  if (!(T > 0.0) || !std::isfinite(T)) { throw DomainError("Brownian path: T must be positive"); }
  if (K < 1) { throw DomainError("Brownian path: need at least one step"); }
}

/**
 * Standard normal draws for fine step k, coordinates 0..n-1. Pair j of step k is
 * block (k, j) of the path's counter stream, so draws never depend on evaluation order.
 */
inline void standard_normals(const CounterRng & rng, int k, int n, double * out)
{
  for (int j = 0; 2 * j < n; ++j) {
    const auto z = rng.normal_pair(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(j));
    out[2 * j] = z[0];
    if (2 * j + 1 < n) { out[2 * j + 1] = z[1]; }
  }
}

inline CounterRng path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
  return {seed, hash_combine(kBrownianStream, stream), index};
}

}  // namespace detail

/**
 * @brief Brownian path on [0, T] with K steps, increments N(0, T/K I_n).
 *
 * `coarsen` > 1 builds the K-step path from K * coarsen fine draws by summing groups of
 * consecutive increments, which couples discretizations of the same underlying path.
 */
inline BrownianPath sample_path(const OmegaForm & form, double T, int K, std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t index, int coarsen = 1)
{
  detail::check_time_grid(T, K);
  if (coarsen < 1) { throw ConfigError("sample_path: coarsen must be positive"); }
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  const auto rng = detail::path_rng(seed, stream, index);
  const double sd = std::sqrt(T / (static_cast<double>(K) * coarsen));
  BrownianPath path{T, K, Matrix::Zero(K + 1, n), Matrix::Zero(K + 1, d), seed, stream, index};
  std::vector<double> z(static_cast<std::size_t>(n));
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  std::vector<double> db(static_cast<std::size_t>(n));
  std::vector<double> m(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < K; ++k) {
    std::fill(db.begin(), db.end(), 0.0);
    for (int f = 0; f < coarsen; ++f) {
      detail::standard_normals(rng, k * coarsen + f, n, z.data());
      for (int i = 0; i < n; ++i) { db[static_cast<std::size_t>(i)] += sd * z[static_cast<std::size_t>(i)]; }
    }
    form.apply_into(b.data(), db.data(), m.data());
    for (int i = 0; i < n; ++i) {
      b[static_cast<std::size_t>(i)] += db[static_cast<std::size_t>(i)];
      path.B(k + 1, i) = b[static_cast<std::size_t>(i)];
    }
    for (int l = 0; l < d; ++l) { path.M(k + 1, l) = m[static_cast<std::size_t>(l)]; }
  }
  return path;
}

/// Group endpoint (B_T, M_T / 2) without storing the path; writes n + d coordinates into out.
inline void endpoint_into(const OmegaForm & form, double T, int K, std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index, double * out, int coarsen = 1)
{
  detail::check_time_grid(T, K);
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  const auto rng = detail::path_rng(seed, stream, index);
  const double sd = std::sqrt(T / (static_cast<double>(K) * coarsen));
  thread_local std::vector<double> z;
  thread_local std::vector<double> db;
  z.resize(static_cast<std::size_t>(n));
  db.resize(static_cast<std::size_t>(n));
  double * b = out;
  double * m = out + n;
  std::fill(out, out + n + d, 0.0);
  for (int k = 0; k < K; ++k) {
    std::fill(db.begin(), db.end(), 0.0);
    for (int f = 0; f < coarsen; ++f) {
      detail::standard_normals(rng, k * coarsen + f, n, z.data());
      for (int i = 0; i < n; ++i) { db[static_cast<std::size_t>(i)] += sd * z[static_cast<std::size_t>(i)]; }
    }
    form.apply_into(b, db.data(), m);
    for (int i = 0; i < n; ++i) { b[i] += db[static_cast<std::size_t>(i)]; }
  }
  for (int l = 0; l < d; ++l) { m[l] *= 0.5; }
}

inline GroupElement endpoint(const OmegaForm & form, double T, int K, std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index)
{
  std::vector<double> buf(static_cast<std::size_t>(form.horizontal_dim() + form.vertical_dim()));
  endpoint_into(form, T, K, seed, stream, index, buf.data());
  return GroupElement::from_coords(Eigen::Map<const Vector>(buf.data(), static_cast<Eigen::Index>(buf.size())),
                                   form.horizontal_dim());
}

/**
 * @brief Flat sample of endpoints g_T^(i), i < N, rows of length n + d.
 */
struct EndpointEnsemble
{
  int n{0};
  int d{0};
  double T{0.0};
  int K{0};
  std::vector<double> data;

  std::size_t size() const { return n + d == 0 ? 0 : data.size() / static_cast<std::size_t>(n + d); }
  std::span<const double> row(std::size_t i) const
  {
    return {data.data() + i * static_cast<std::size_t>(n + d), static_cast<std::size_t>(n + d)};
  }
};

inline EndpointEnsemble sample_endpoints(const OmegaForm & form, double T, int K, std::size_t samples,
                                         std::uint64_t seed, std::uint64_t stream, int workers = 1, int coarsen = 1)
{
  EndpointEnsemble ens{form.horizontal_dim(), form.vertical_dim(), T, K, {}};
  const auto width = static_cast<std::size_t>(ens.n + ens.d);
  ens.data.assign(samples * width, 0.0);
  parallel_for(samples, workers, [&](std::size_t i) {
    endpoint_into(form, T, K, seed, stream, i, ens.data.data() + i * width, coarsen);
  });
  return ens;
}

/// Rank-m projection of a path: increments of coordinates >= m are dropped and M is recomputed.
inline BrownianPath project_path(const BrownianPath & path, const OmegaForm & form, int m)
{
  form.check_rank(m);
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  if (path.B.cols() != n || path.M.cols() != d) { throw ConfigError("project_path: path does not match form"); }
  BrownianPath out = path;
  if (m == n) { return out; }
  out.B.rightCols(n - m).setZero();
  out.M.setZero();
  std::vector<double> m_acc(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < path.K; ++k) {
    const Vector b = out.B.row(k).transpose();
    const Vector db = (out.B.row(k + 1) - out.B.row(k)).transpose();
    form.apply_into(b.data(), db.data(), m_acc.data(), m);
    for (int l = 0; l < d; ++l) { out.M(k + 1, l) = m_acc[static_cast<std::size_t>(l)]; }
  }
  return out;
}

/// Sample mean and standard error.
struct MeanEstimate
{
  double mean{0.0};
  double std_error{0.0};
};

inline MeanEstimate mean_estimate(std::span<const double> values)
{
  MeanEstimate out;
  const auto N = values.size();
  if (N == 0) { return out; }
  double s = 0.0;
  for (double v : values) { s += v; }
  out.mean = s / static_cast<double>(N);
  if (N > 1) {
    double ss = 0.0;
    for (double v : values) { ss += (v - out.mean) * (v - out.mean); }
    out.std_error = std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N));
  }
  return out;
}

struct ApproximationRow
{
  int rank;
  int p;
  /// E[sup_k |g^rank_{t_k} - g_{t_k}|^p] with the homogeneous norm.
  MeanEstimate homogeneous;
  /// The same functional with the Euclidean norm sqrt(|w|^2 + |c|^2).
  MeanEstimate euclidean;
  /// Paired estimate of (this row - previous rank) for the same p; zero for the first rank.
  MeanEstimate step_change;
};

struct ApproximationReport
{
  std::vector<ApproximationRow> rows;
  /// Every step_change (homogeneous) is <= 3 stderr.
  bool monotone{false};
  /// Every mean decreases strictly from one rank to the next, for both norms.
  bool strictly_decreasing{false};
};

/**
 * @brief Monte Carlo estimate of E[sup over grid times of |g^(m) - g|^p] for each rank m.
 *
 * The difference is taken coordinatewise in R^n x R^d. The sup runs over the K grid times only.
 */
inline ApproximationReport approximation_report(const OmegaForm & form, double T, int K, const std::vector<int> & ranks,
                                                std::size_t samples, const std::vector<int> & p_moments,
                                                std::uint64_t seed, std::uint64_t stream = 0, int workers = 1)
{
  detail::check_time_grid(T, K);
  if (ranks.empty() || p_moments.empty()) { throw ConfigError("approximation_report: empty rank or moment list"); }
  for (std::size_t k = 1; k < ranks.size(); ++k) {
    if (ranks[k] <= ranks[k - 1]) { throw ConfigError("approximation_report: ranks must increase"); }
  }
  for (int m : ranks) { form.check_rank(m); }
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  const std::size_t R = ranks.size();
  // sup errors per sample and rank, for both norms
  std::vector<double> sup_h(samples * R, 0.0);
  std::vector<double> sup_e(samples * R, 0.0);
  parallel_for(samples, workers, [&](std::size_t s) {
    const auto rng = detail::path_rng(seed, stream, s);
    const double sd = std::sqrt(T / K);
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    std::vector<double> db(static_cast<std::size_t>(n));
    std::vector<double> full(static_cast<std::size_t>(d), 0.0);
    std::vector<std::vector<double>> proj(R, std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int k = 0; k < K; ++k) {
      detail::standard_normals(rng, k, n, db.data());
      for (auto & v : db) { v *= sd; }
      form.apply_into(b.data(), db.data(), full.data());
      for (std::size_t r = 0; r < R; ++r) { form.apply_into(b.data(), db.data(), proj[r].data(), ranks[r]); }
      for (int i = 0; i < n; ++i) { b[static_cast<std::size_t>(i)] += db[static_cast<std::size_t>(i)]; }
      for (std::size_t r = 0; r < R; ++r) {
        double wsq = 0.0;
        for (int i = ranks[r]; i < n; ++i) { wsq += b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)]; }
        double csq = 0.0;
        for (int l = 0; l < d; ++l) {
          const double diff = 0.5 * (proj[r][static_cast<std::size_t>(l)] - full[static_cast<std::size_t>(l)]);
          csq += diff * diff;
        }
        const double h = std::sqrt(wsq + std::sqrt(csq));
        const double e = std::sqrt(wsq + csq);
        sup_h[s * R + r] = std::max(sup_h[s * R + r], h);
        sup_e[s * R + r] = std::max(sup_e[s * R + r], e);
      }
    }
  });

  ApproximationReport rep;
  rep.monotone = true;
  rep.strictly_decreasing = true;
  std::vector<double> vh(samples);
  std::vector<double> ve(samples);
  std::vector<double> diff(samples);
  for (int p : p_moments) {
    if (p < 1) { throw ConfigError("approximation_report: moments must be >= 1"); }
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t s = 0; s < samples; ++s) {
        vh[s] = std::pow(sup_h[s * R + r], p);
        ve[s] = std::pow(sup_e[s * R + r], p);
      }
      ApproximationRow row{ranks[r], p, mean_estimate(vh), mean_estimate(ve), {}};
      if (r > 0) {
        for (std::size_t s = 0; s < samples; ++s) { diff[s] = vh[s] - std::pow(sup_h[s * R + r - 1], p); }
        row.step_change = mean_estimate(diff);
        const auto & prev = rep.rows.back();
        if (row.step_change.mean > 3.0 * row.step_change.std_error) { rep.monotone = false; }
        if (!(row.homogeneous.mean < prev.homogeneous.mean) || !(row.euclidean.mean < prev.euclidean.mean)) {
          rep.strictly_decreasing = false;
        }
      }
      rep.rows.push_back(row);
    }
  }
  return rep;
}

struct RefinementRow
{
  int coarse_steps;
  int fine_steps;
  /// RMS over samples of |M_T(fine) - M_T(coarse)|.
  double rms;
};

struct RefinementReport
{
  std::vector<RefinementRow> rows;
  /// Least-squares slope of log(rms) against log(T / coarse_steps).
  double order{0.0};
};

/**
 * @brief Strong refinement study of M_T: all step counts share the finest path's increments.
 */
inline RefinementReport refinement_convergence(const OmegaForm & form, double T, const std::vector<int> & steps,
                                               std::size_t samples, std::uint64_t seed, std::uint64_t stream = 0,
                                               int workers = 1)
{
  if (steps.size() < 2) { throw ConfigError("refinement_convergence: need at least two step counts"); }
  for (std::size_t k = 1; k < steps.size(); ++k) {
    if (steps[k] < steps[k - 1]) { throw ConfigError("refinement_convergence: step counts must be nondecreasing"); }
  }
  const int finest = steps.back();
  for (int K : steps) {
    detail::check_time_grid(T, K);
    if (finest % K != 0) { throw ConfigError("refinement_convergence: every step count must divide the finest"); }
  }
  const int n = form.horizontal_dim();
  const int d = form.vertical_dim();
  const std::size_t L = steps.size();
  std::vector<double> mt(samples * L * static_cast<std::size_t>(d), 0.0);
  parallel_for(samples, workers, [&](std::size_t s) {
    const auto rng = detail::path_rng(seed, stream, s);
    const double sd = std::sqrt(T / finest);
    std::vector<double> fine(static_cast<std::size_t>(finest) * n);
    for (int k = 0; k < finest; ++k) {
      detail::standard_normals(rng, k, n, fine.data() + static_cast<std::size_t>(k) * n);
    }
    for (auto & v : fine) { v *= sd; }
    for (std::size_t lv = 0; lv < L; ++lv) {
      const int K = steps[lv];
      const int group = finest / K;
      std::vector<double> b(static_cast<std::size_t>(n), 0.0);
      std::vector<double> db(static_cast<std::size_t>(n));
      double * m = mt.data() + (s * L + lv) * static_cast<std::size_t>(d);
      for (int k = 0; k < K; ++k) {
        std::fill(db.begin(), db.end(), 0.0);
        for (int f = 0; f < group; ++f) {
          const double * z = fine.data() + static_cast<std::size_t>(k * group + f) * n;
          for (int i = 0; i < n; ++i) { db[static_cast<std::size_t>(i)] += z[i]; }
        }
        form.apply_into(b.data(), db.data(), m);
        for (int i = 0; i < n; ++i) { b[static_cast<std::size_t>(i)] += db[static_cast<std::size_t>(i)]; }
      }
    }
  });

  RefinementReport rep;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t lv = 0; lv + 1 < L; ++lv) {
    double ss = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double * a = mt.data() + (s * L + lv) * static_cast<std::size_t>(d);
      const double * b = mt.data() + (s * L + lv + 1) * static_cast<std::size_t>(d);
      for (int l = 0; l < d; ++l) { ss += (a[l] - b[l]) * (a[l] - b[l]); }
    }
    const double rms = samples ? std::sqrt(ss / static_cast<double>(samples)) : 0.0;
    rep.rows.push_back({steps[lv], steps[lv + 1], rms});
    if (rms > 0.0 && steps[lv] != steps[lv + 1]) {
      xs.push_back(std::log(T / steps[lv]));
      ys.push_back(std::log(rms));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    rep.order = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return rep;
}

}  // namespace hlg

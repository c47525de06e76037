#pragma once

// Horizontal paths and the Carnot-Caratheodory distance.
//
// A piecewise-linear horizontal path is determined by its increments D_k = A_{k+1} - A_k.
// Its vertical displacement is exact: a_{k+1} = a_k + omega(A_k, D_k) / 2.
// The distance from e to z = (w, c) is the square root of the minimal energy
// K * sum |D_k|^2 subject to sum D_k = w and the vertical displacement equal to c.

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlg/errors.hpp"
#include "hlg/group.hpp"
#include "hlg/parallel.hpp"
#include "hlg/random.hpp"

namespace hlg {

/**
 * @brief Piecewise-linear horizontal curve at uniform times t_k = k / K on [0, 1].
 *
 * Row k of `nodes` is A_k. The vertical track is not stored; it is slaved to the
 * horizontal one through the exact segment rule.
 */
struct HorizontalPath
{
  OmegaForm form;
  Matrix nodes;
  Vector start_vertical;

  int segments() const { return static_cast<int>(nodes.rows()) - 1; }

  /// a_0, ..., a_K as rows.
  Matrix vertical_track() const
  {
    const int K = std::max(segments(), 0);
    const int d = form.vertical_dim();
    Matrix out(K + 1, d);
    out.row(0) = start_vertical.transpose();
    std::vector<double> acc(start_vertical.data(), start_vertical.data() + d);
    Vector a(nodes.cols());
    Vector delta(nodes.cols());
    for (int k = 0; k < K; ++k) {
      a = nodes.row(k).transpose();
      delta = (nodes.row(k + 1) - nodes.row(k)).transpose();
      std::vector<double> inc(static_cast<std::size_t>(d), 0.0);
      form.apply_into(a.data(), delta.data(), inc.data());
      for (int l = 0; l < d; ++l) {
        acc[static_cast<std::size_t>(l)] += 0.5 * inc[static_cast<std::size_t>(l)];
        out(k + 1, l) = acc[static_cast<std::size_t>(l)];
      }
    }
    return out;
  }

  /// a_K - a_0.
  Vector vertical_displacement() const
  {
    const Matrix track = vertical_track();
    return (track.row(track.rows() - 1) - track.row(0)).transpose();
  }

  GroupElement start() const { return {nodes.row(0).transpose(), start_vertical}; }

  GroupElement end() const
  {
    const Matrix track = vertical_track();
    return {nodes.row(nodes.rows() - 1).transpose(), track.row(track.rows() - 1).transpose()};
  }

  double length() const
  {
    double s = 0.0;
    for (int k = 0; k < segments(); ++k) { s += (nodes.row(k + 1) - nodes.row(k)).norm(); }
    return s;
  }

  double energy() const
  {
    double s = 0.0;
    for (int k = 0; k < segments(); ++k) { s += (nodes.row(k + 1) - nodes.row(k)).squaredNorm(); }
    return segments() * s;
  }

  /// Splits every segment into `factor` equal pieces.
  HorizontalPath refine(int factor) const
  {
    if (factor < 1) { throw ConfigError("refine: factor must be positive"); }
    const int K = segments();
    HorizontalPath out{form, Matrix(K * factor + 1, nodes.cols()), start_vertical};
    for (int k = 0; k < K; ++k) {
      for (int s = 0; s < factor; ++s) {
        const double t = static_cast<double>(s) / factor;
        out.nodes.row(k * factor + s) = (1.0 - t) * nodes.row(k) + t * nodes.row(k + 1);
      }
    }
    out.nodes.row(K * factor) = nodes.row(K);
    return out;
  }

  /// The same curve traversed backwards.
  HorizontalPath reversed() const
  {
    const Matrix track = vertical_track();
    return {form, nodes.colwise().reverse(), track.row(track.rows() - 1).transpose()};
  }
};

struct DistanceOptions
{
  int segments{64};
  int restarts{16};
  int max_outer_iterations{60};
  int max_inner_iterations{4000};
  double initial_penalty{10.0};
  double penalty_growth{2.0};
  /// Endpoint tolerance in homogeneous norm.
  double constraint_tolerance{1e-6};
  std::uint64_t seed{0};
  int workers{1};
};

struct RestartDiagnostics
{
  int restart;
  bool feasible;
  double energy;
  double residual;
  int outer_iterations;
};

struct DistanceResult
{
  double distance{0.0};
  double energy{0.0};
  /// Homogeneous norm of (endpoint of witness)^-1 * target.
  double residual{0.0};
  bool feasible{true};
  int best_restart{-1};
  HorizontalPath witness;
  std::vector<RestartDiagnostics> restarts;
};

/// Raised when no restart meets the endpoint tolerance; carries the best infeasible iterate.
class SolverFailure : public std::runtime_error
{
public:
  SolverFailure(const std::string & what, DistanceResult best) : std::runtime_error(what), best_{std::move(best)} {}
  const DistanceResult & best() const { return best_; }

private:
  DistanceResult best_;
};

namespace detail {

/// Increment-space model of paths from e: D is K x n row-major.
class IncrementModel
{
public:
  IncrementModel(const OmegaForm & form, int K, Vector w, Vector c)
    : form_{form}, K_{K}, n_{form.horizontal_dim()}, d_{form.vertical_dim()}, w_{std::move(w)}, c_{std::move(c)}
  {
  }

  int K() const { return K_; }
  int n() const { return n_; }
  int d() const { return d_; }
  int size() const { return K_ * n_; }
  const Vector & target_w() const { return w_; }
  const Vector & target_c() const { return c_; }

  /// D = w / K + u - mean_k(u).
  void increments(const double * u, std::vector<double> & D) const
  {
    D.assign(static_cast<std::size_t>(size()), 0.0);
    for (int i = 0; i < n_; ++i) {
      double mean = 0.0;
      for (int k = 0; k < K_; ++k) { mean += u[k * n_ + i]; }
      mean /= K_;
      for (int k = 0; k < K_; ++k) { D[static_cast<std::size_t>(k * n_ + i)] = w_[i] / K_ + u[k * n_ + i] - mean; }
    }
  }

  double energy(const std::vector<double> & D) const
  {
    double s = 0.0;
    for (double v : D) { s += v * v; }
    return K_ * s;
  }

  /// Vertical displacement minus target.
  Vector residual(const std::vector<double> & D) const
  {
    Vector g = -c_;
    std::vector<double> S(static_cast<std::size_t>(n_), 0.0);
    std::vector<double> inc(static_cast<std::size_t>(d_), 0.0);
    for (int k = 0; k < K_; ++k) {
      const double * Dk = D.data() + static_cast<std::size_t>(k * n_);
      std::fill(inc.begin(), inc.end(), 0.0);
      form_.apply_into(S.data(), Dk, inc.data());
      for (int l = 0; l < d_; ++l) { g[l] += 0.5 * inc[static_cast<std::size_t>(l)]; }
      for (int i = 0; i < n_; ++i) { S[static_cast<std::size_t>(i)] += Dk[i]; }
    }
    return g;
  }

  /**
   * Adds sum_l weight_l * d(residual_l)/dD into grad (size K n).
   * d residual / dD_m = omega(e_i, S_after_m - S_before_m) / 2.
   */
  void add_residual_gradient(const std::vector<double> & D, const Vector & weight, std::vector<double> & grad) const
  {
    std::vector<double> total(static_cast<std::size_t>(n_), 0.0);
    for (int k = 0; k < K_; ++k) {
      for (int i = 0; i < n_; ++i) { total[static_cast<std::size_t>(i)] += D[static_cast<std::size_t>(k * n_ + i)]; }
    }
    std::vector<double> before(static_cast<std::size_t>(n_), 0.0);
    std::vector<double> R(static_cast<std::size_t>(n_), 0.0);
    for (int m = 0; m < K_; ++m) {
      const double * Dm = D.data() + static_cast<std::size_t>(m * n_);
      for (int i = 0; i < n_; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double after = total[ii] - before[ii] - Dm[i];
        R[ii] = after - before[ii];
      }
      double * Gm = grad.data() + static_cast<std::size_t>(m * n_);
      for (const auto & e : form_.entries()) {
        const double s = 0.5 * weight[e.l] * e.value;
        Gm[e.i] += s * R[static_cast<std::size_t>(e.j)];
        Gm[e.j] -= s * R[static_cast<std::size_t>(e.i)];
      }
      for (int i = 0; i < n_; ++i) { before[static_cast<std::size_t>(i)] += Dm[i]; }
    }
  }

  /// Removes the per-coordinate mean over k (the chain rule through u -> D).
  void project_gradient(std::vector<double> & grad) const
  {
    for (int i = 0; i < n_; ++i) {
      double mean = 0.0;
      for (int k = 0; k < K_; ++k) { mean += grad[static_cast<std::size_t>(k * n_ + i)]; }
      mean /= K_;
      for (int k = 0; k < K_; ++k) { grad[static_cast<std::size_t>(k * n_ + i)] -= mean; }
    }
  }

  /// Minimum-norm Gauss-Newton steps on D inside the affine set sum D = w.
  void project_feasible(std::vector<double> & D, int max_steps = 30) const
  {
    const double scale = std::max(1.0, c_.norm());
    for (int step = 0; step < max_steps; ++step) {
      const Vector g = residual(D);
      if (g.norm() <= 1e-15 * scale) { return; }
      Matrix J(d_, size());
      for (int l = 0; l < d_; ++l) {
        Vector e = Vector::Zero(d_);
        e[l] = 1.0;
        std::vector<double> row(static_cast<std::size_t>(size()), 0.0);
        add_residual_gradient(D, e, row);
        project_gradient(row);
        for (int k = 0; k < size(); ++k) { J(l, k) = row[static_cast<std::size_t>(k)]; }
      }
      const Matrix JJt = J * J.transpose();
      Eigen::LDLT<Matrix> ldlt(JJt);
      if (ldlt.info() != Eigen::Success || JJt.norm() == 0.0) { return; }
      const Vector y = ldlt.solve(g);
      const Vector delta = J.transpose() * y;
      for (int k = 0; k < size(); ++k) { D[static_cast<std::size_t>(k)] -= delta[k]; }
    }
  }

private:
  const OmegaForm & form_;
  int K_;
  int n_;
  int d_;
  Vector w_;
  Vector c_;
};

class AugmentedLagrangian : public ceres::FirstOrderFunction
{
public:
  AugmentedLagrangian(const IncrementModel & model, const Vector & lambda, double mu)
    : model_{model}, lambda_{lambda}, mu_{mu}
  {
  }

  bool Evaluate(const double * parameters, double * cost, double * gradient) const override
  {
    model_.increments(parameters, D_);
    const Vector g = model_.residual(D_);
    *cost = model_.energy(D_) + lambda_.dot(g) + 0.5 * mu_ * g.squaredNorm();
    if (gradient != nullptr) {
      grad_.assign(D_.size(), 0.0);
      for (std::size_t k = 0; k < D_.size(); ++k) { grad_[k] = 2.0 * model_.K() * D_[k]; }
      model_.add_residual_gradient(D_, lambda_ + mu_ * g, grad_);
      model_.project_gradient(grad_);
      std::copy(grad_.begin(), grad_.end(), gradient);
    }
    return std::isfinite(*cost);
  }

  int NumParameters() const override { return model_.size(); }

private:
  const IncrementModel & model_;
  Vector lambda_;
  double mu_;
  mutable std::vector<double> D_;
  mutable std::vector<double> grad_;
};

/// Adds a closed circle of radius r in the (i, j) coordinate plane to the increments.
inline void add_circle(std::vector<double> & D, int K, int n, int i, int j, double r, int orientation)
{
  for (int k = 0; k < K; ++k) {
    const double t0 = 2.0 * std::numbers::pi * k / K;
    const double t1 = 2.0 * std::numbers::pi * (k + 1) / K;
    D[static_cast<std::size_t>(k * n + i)] += r * (std::cos(t1) - std::cos(t0));
    D[static_cast<std::size_t>(k * n + j)] += orientation * r * (std::sin(t1) - std::sin(t0));
  }
}

struct RestartOutcome
{
  RestartDiagnostics diag;
  std::vector<double> D;
};

/**
 * Initial increments for one restart. Restart 0 is the straight segment; restart 1 is a circle
 * in the coordinate plane whose bracket best aligns with the vertical target; later restarts are
 * circles of random radius in random coordinate planes plus small closed noise.
 */
inline std::vector<double> initial_increments(const IncrementModel & model, const OmegaForm & form, int restart,
                                              std::uint64_t seed)
{
  const int K = model.K();
  const int n = model.n();
  std::vector<double> D(static_cast<std::size_t>(K * n), 0.0);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) { D[static_cast<std::size_t>(k * n + i)] = model.target_w()[i] / K; }
  }
  if (restart == 0) { return D; }
  const Vector & c = model.target_c();
  const double cnorm = c.norm();
  const double scale = std::max({std::sqrt(cnorm), 0.5 * model.target_w().norm(), 1e-3});
  if (restart == 1 && cnorm > 0.0) {
    int bi = 0;
    int bj = 1;
    double best = 0.0;
    for (const auto & e : form.entries()) {
      double proj = 0.0;
      for (int l = 0; l < form.vertical_dim(); ++l) { proj += form(e.i, e.j, l) * c[l] / cnorm; }
      if (std::abs(proj) > std::abs(best)) {
        best = proj;
        bi = e.i;
        bj = e.j;
      }
    }
    if (best != 0.0) {
      add_circle(D, K, n, bi, bj, std::sqrt(cnorm / (std::numbers::pi * std::abs(best))), best > 0 ? 1 : -1);
      return D;
    }
  }
  SequentialRng rng(seed, hash_label("cc_distance.restart"), static_cast<std::uint64_t>(restart));
  const int i = rng.uniform_int(0, n - 1);
  int j = rng.uniform_int(0, n - 2);
  if (j >= i) { ++j; }
  add_circle(D, K, n, i, j, scale * rng.uniform(0.3, 1.5), rng.uniform() < 0.5 ? 1 : -1);
  // closed noise: zero-mean increments leave the horizontal endpoint unchanged
  std::vector<double> noise(D.size());
  for (auto & v : noise) { v = 0.05 * scale / std::sqrt(static_cast<double>(K)) * rng.normal(); }
  model.project_gradient(noise);
  for (std::size_t k = 0; k < D.size(); ++k) { D[k] += noise[k]; }
  return D;
}

inline RestartOutcome solve_restart(const IncrementModel & model, const OmegaForm & form, int restart,
                                    const DistanceOptions & opts)
{
  std::vector<double> D0 = initial_increments(model, form, restart, opts.seed);
  // u = D0 - w / K reproduces D0 because D0 - w / K has zero mean over k
  std::vector<double> u(D0.size());
  for (int k = 0; k < model.K(); ++k) {
    for (int i = 0; i < model.n(); ++i) {
      const auto idx = static_cast<std::size_t>(k * model.n() + i);
      u[idx] = D0[idx] - model.target_w()[i] / model.K();
    }
  }

  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::LBFGS;
  options.max_num_iterations = opts.max_inner_iterations;
  options.function_tolerance = 1e-15;
  options.gradient_tolerance = 1e-13;
  options.parameter_tolerance = 1e-15;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;

  Vector lambda = Vector::Zero(model.d());
  double mu = opts.initial_penalty;
  double previous = std::numeric_limits<double>::infinity();
  const double vertical_tol = 1e-10 * std::max(1.0, model.target_c().norm());
  int outer = 0;
  std::vector<double> D;
  for (; outer < opts.max_outer_iterations; ++outer) {
    ceres::GradientProblem problem(new AugmentedLagrangian(model, lambda, mu));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, u.data(), &summary);
    model.increments(u.data(), D);
    const Vector g = model.residual(D);
    const double gn = g.norm();
    if (gn <= vertical_tol) { break; }
    lambda += mu * g;
    if (gn > 0.25 * previous) { mu *= opts.penalty_growth; }
    previous = gn;
  }
  model.increments(u.data(), D);
  model.project_feasible(D);
  const Vector g = model.residual(D);
  const double residual = std::sqrt(g.norm());
  RestartOutcome out;
  out.diag = {restart, residual <= opts.constraint_tolerance, model.energy(D), residual, outer};
  out.D = std::move(D);
  return out;
}

}  // namespace detail

/**
 * @brief Carnot-Caratheodory distance between x and y, an upper bound converging from above in K and restarts.
 *
 * Solved for z = x^-1 y from the identity; the witness is the optimal path left-translated to start at x.
 * Throws SolverFailure when no restart meets the endpoint tolerance.
 */
inline DistanceResult cc_distance(const Group & group, const GroupElement & x, const GroupElement & y,
                                  const DistanceOptions & opts = {})
{
  if (opts.segments < 1 || opts.restarts < 1) { throw ConfigError("cc_distance: segments and restarts must be positive"); }
  const OmegaForm & form = group.form();
  if (!form.satisfies_hormander()) { throw HormanderError("cc_distance: structure form is not bracket generating"); }
  const GroupElement z = group.multiply(group.inverse(x), y);
  const int K = opts.segments;
  const int n = group.n();

  auto make_witness = [&](const std::vector<double> & D) {
    HorizontalPath path{form, Matrix(K + 1, n), x.c};
    path.nodes.row(0) = x.w.transpose();
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < n; ++i) { path.nodes(k + 1, i) = path.nodes(k, i) + D[static_cast<std::size_t>(k * n + i)]; }
    }
    return path;
  };

  DistanceResult result;
  if (z.w.squaredNorm() == 0.0 && z.c.squaredNorm() == 0.0) {
    result.witness = HorizontalPath{form, x.w.transpose(), x.c};
    return result;
  }

  const detail::IncrementModel model(form, K, z.w, z.c);
  std::vector<detail::RestartOutcome> outcomes(static_cast<std::size_t>(opts.restarts));
  parallel_for(outcomes.size(), opts.workers, [&](std::size_t r) {
    outcomes[r] = detail::solve_restart(model, form, static_cast<int>(r), opts);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r) {
    const auto & a = outcomes[r].diag;
    const auto & b = outcomes[best].diag;
    if (a.feasible != b.feasible ? a.feasible : (a.feasible ? a.energy < b.energy : a.residual < b.residual)) {
      best = r;
    }
  }
  for (const auto & o : outcomes) { result.restarts.push_back(o.diag); }
  const auto & winner = outcomes[best];
  result.best_restart = static_cast<int>(best);
  result.energy = winner.diag.energy;
  result.distance = std::sqrt(winner.diag.energy);
  result.witness = make_witness(winner.D);
  const GroupElement reached = result.witness.end();
  result.residual = homogeneous_norm(group.multiply(group.inverse(reached), y));
  result.feasible = result.residual <= opts.constraint_tolerance;
  if (!result.feasible) {
    throw SolverFailure("cc_distance: endpoint constraint not met (residual " + std::to_string(result.residual) + ")",
                        result);
  }
  return result;
}

inline DistanceResult cc_distance(const Group & group, const GroupElement & z, const DistanceOptions & opts = {})
{
  return cc_distance(group, group.identity(), z, opts);
}

struct NormEquivalenceReport
{
  std::vector<double> ratios;
  double min_ratio{0.0};
  double max_ratio{0.0};
  bool bounded{false};
};

/// Ratio d(e, z) / (|w| + sqrt|c|) for each target; `bounded` iff every ratio is finite and positive.
inline NormEquivalenceReport check_distance_norm_equivalence(const Group & group,
                                                             const std::vector<GroupElement> & targets,
                                                             const DistanceOptions & opts = {})
{
  NormEquivalenceReport rep;
  for (const auto & z : targets) {
    const double denom = z.w.norm() + std::sqrt(z.c.norm());
    if (denom == 0.0) { continue; }
    rep.ratios.push_back(cc_distance(group, z, opts).distance / denom);
  }
  if (rep.ratios.empty()) { return rep; }
  rep.min_ratio = *std::min_element(rep.ratios.begin(), rep.ratios.end());
  rep.max_ratio = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  rep.bounded = std::isfinite(rep.max_ratio) && rep.min_ratio > 0.0;
  return rep;
}

struct ProjectedDistanceRow
{
  int rank;
  double distance;
  double residual;
};

struct ProjectedDistanceReport
{
  std::vector<ProjectedDistanceRow> rows;
  double slack{0.0};
  bool nonincreasing{false};
};

/**
 * @brief d_m(e, x) for each rank m, using omega restricted to the first m horizontal coordinates.
 *
 * The sequence is asserted nonincreasing up to 2x the endpoint tolerance.
 */
inline ProjectedDistanceReport projected_distance_convergence(const OmegaForm & form, const GroupElement & x,
                                                              const std::vector<int> & ranks,
                                                              const DistanceOptions & opts = {})
{
  if (ranks.empty()) { throw ConfigError("projected_distance_convergence: empty rank list"); }
  for (std::size_t k = 1; k < ranks.size(); ++k) {
    if (ranks[k] <= ranks[k - 1]) { throw ConfigError("projected_distance_convergence: ranks must increase"); }
  }
  const int m0 = ranks.front();
  form.check_rank(ranks.back());
  for (Eigen::Index i = m0; i < x.w.size(); ++i) {
    if (x.w[i] != 0.0) { throw ConfigError("projected_distance_convergence: target has support beyond the first rank"); }
  }
  ProjectedDistanceReport rep;
  rep.slack = 2.0 * opts.constraint_tolerance;
  for (int m : ranks) {
    const Group sub(form.restricted(m));
    if (!sub.form().satisfies_hormander()) {
      throw HormanderError("projected_distance_convergence: rank " + std::to_string(m) + " is not bracket generating");
    }
    const GroupElement xm{x.w.head(m), x.c};
    const auto res = cc_distance(sub, xm, opts);
    rep.rows.push_back({m, res.distance, res.residual});
  }
  rep.nonincreasing = true;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    if (rep.rows[k].distance > rep.rows[k - 1].distance + rep.slack) { rep.nonincreasing = false; }
  }
  return rep;
}

}  // namespace hlg

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hlg/presets.hpp"
#include "hlg/stochastic.hpp"

using namespace hlg;

TEST(Stochastic, EndpointMomentsOnH3)
{
  // B_T ~ N(0, T I) and Var(M_T / 2) = (T^2 / 4)(1 - 1/K) for the left-point sum
  const auto form = heisenberg(1).form;
  const double T = 1.5;
  const int K = 32;
  const std::size_t N = 40000;
  const auto ens = sample_endpoints(form, T, K, N, 5, 0);
  std::vector<double> b0(N), b1(N), cross(N), c2(N), c(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto r = ens.row(i);
    b0[i] = r[0] * r[0];
    b1[i] = r[1] * r[1];
    cross[i] = r[0] * r[1];
    c[i] = r[2];
    c2[i] = r[2] * r[2];
  }
  const auto within = [](const MeanEstimate & e, double target) {
    return std::abs(e.mean - target) <= 4.0 * e.std_error;
  };
  EXPECT_TRUE(within(mean_estimate(b0), T));
  EXPECT_TRUE(within(mean_estimate(b1), T));
  EXPECT_TRUE(within(mean_estimate(cross), 0.0));
  EXPECT_TRUE(within(mean_estimate(c), 0.0));
  EXPECT_TRUE(within(mean_estimate(c2), T * T / 4.0 * (1.0 - 1.0 / K)));
}

TEST(Stochastic, WorkerCountDoesNotChangeSamples)
{
  const auto form = block_sum({1.0, 2.0}).form;
  const auto a = sample_endpoints(form, 1.0, 16, 1000, 9, 3, 1);
  const auto b = sample_endpoints(form, 1.0, 16, 1000, 9, 3, 4);
  EXPECT_EQ(a.data, b.data);
  const auto c = sample_endpoints(form, 1.0, 16, 1000, 10, 3, 1);
  EXPECT_NE(a.data, c.data);
}

TEST(Stochastic, PathEndpointAndCoarseningAgree)
{
  const auto form = heisenberg(2).form;
  for (std::uint64_t idx = 0; idx < 20; ++idx) {
    const auto path = sample_path(form, 2.0, 64, 1, 2, idx);
    const auto end = endpoint(form, 2.0, 64, 1, 2, idx);
    EXPECT_LT((path.B.row(64).transpose() - end.w).norm(), 1e-12);
    EXPECT_LT((0.5 * path.M.row(64).transpose() - end.c).norm(), 1e-12);
    // the coarse path sums pairs of the fine increments, so it ends at the same B_T
    const auto coarse = sample_path(form, 2.0, 32, 1, 2, idx, 2);
    EXPECT_LT((coarse.B.row(32) - path.B.row(64)).norm(), 1e-12);
    EXPECT_LT((coarse.B.row(5) - path.B.row(10)).norm(), 1e-12);
    EXPECT_GT((coarse.M.row(32) - path.M.row(64)).norm(), 0.0);
  }
}

TEST(Stochastic, ProjectionAtFullRankIsIdentity)
{
  const auto form = wiener_truncation(3, 2.0).form;
  const auto path = sample_path(form, 1.0, 20, 4, 0, 7);
  const auto same = project_path(path, form, 6);
  EXPECT_LT((same.B - path.B).norm(), 1e-14);
  EXPECT_LT((same.M - path.M).norm(), 1e-13);
  const auto low = project_path(path, form, 2);
  EXPECT_EQ(low.B.rightCols(4).norm(), 0.0);
  // rank 2 keeps only the q = 1 plane
  const auto h = project_path(sample_path(heisenberg(1).form, 1.0, 20, 4, 0, 7), heisenberg(1).form, 2);
  EXPECT_LT((low.B.leftCols(2) - path.B.leftCols(2)).norm(), 1e-14);
  EXPECT_GT(h.M.norm(), 0.0);
}

TEST(Stochastic, LeviAreaStrongOrderIsOneHalf)
{
  const auto rep = refinement_convergence(heisenberg(1).form, 1.0, {16, 32, 64, 128, 256}, 4000, 12, 0);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_NEAR(rep.order, 0.5, 0.1);
  for (std::size_t k = 1; k < rep.rows.size(); ++k) { EXPECT_LT(rep.rows[k].rms, rep.rows[k - 1].rms); }
}

TEST(Stochastic, ProjectionErrorDecreasesWithRank)
{
  const auto form = wiener_truncation(8, 2.0).form;
  const auto rep = approximation_report(form, 1.0, 128, {2, 4, 8, 16}, 2000, {2, 4}, 3, 0);
  EXPECT_TRUE(rep.monotone);
  EXPECT_TRUE(rep.strictly_decreasing);
  ASSERT_EQ(rep.rows.size(), 8u);
  // at full rank the projection is exact
  EXPECT_EQ(rep.rows[3].homogeneous.mean, 0.0);
  EXPECT_THROW(approximation_report(form, 1.0, 8, {4, 2}, 10, {2}, 0), ConfigError);
}

TEST(Stochastic, TimeGridValidation)
{
  const auto form = heisenberg(1).form;
  EXPECT_THROW(sample_path(form, 0.0, 10, 0, 0, 0), DomainError);
  EXPECT_THROW(sample_path(form, 1.0, 0, 0, 0, 0), DomainError);
  EXPECT_THROW(refinement_convergence(form, 1.0, {3, 8}, 10, 0), ConfigError);
}

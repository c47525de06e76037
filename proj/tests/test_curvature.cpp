#include <gtest/gtest.h>

#include <cmath>

#include "hlg/curvature.hpp"
#include "hlg/errors.hpp"
#include "hlg/presets.hpp"
#include "hlg/random.hpp"

using namespace hlg;

TEST(Curvature, HeisenbergConstants)
{
  const auto c = curvature_constants(heisenberg(1).form, 2);
  EXPECT_DOUBLE_EQ(c.hs_norm_sq, 2.0);
  EXPECT_DOUBLE_EQ(c.rho2, 2.0);
  EXPECT_DOUBLE_EQ(c.harnack_coeff, 3.0);
  const auto c2 = curvature_constants(heisenberg(2).form, 4);
  EXPECT_DOUBLE_EQ(c2.hs_norm_sq, 4.0);
  EXPECT_DOUBLE_EQ(c2.harnack_coeff, 3.0);
}

TEST(Curvature, BlockSumConstants)
{
  const auto c = curvature_constants(block_sum({1.0, 3.0}).form, 4);
  EXPECT_DOUBLE_EQ(c.hs_norm_sq, 20.0);
  EXPECT_DOUBLE_EQ(c.rho2, 2.0);
  EXPECT_DOUBLE_EQ(c.harnack_coeff, 21.0);
  // Gram matrix is diag(2 w_l^2)
  EXPECT_DOUBLE_EQ(c.gram(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(c.gram(1, 1), 18.0);
  EXPECT_DOUBLE_EQ(c.gram(0, 1), 0.0);
}

TEST(Curvature, SingleVerticalCoordinateGivesRhoEqualHs)
{
  for (const auto & spec : catalog_specs()) {
    const auto p = make_preset(spec);
    if (p.form.vertical_dim() != 1) { continue; }
    const auto c = curvature_constants(p.form, p.form.horizontal_dim());
    EXPECT_EQ(c.rho2, c.hs_norm_sq) << to_string(spec);
    EXPECT_EQ(c.harnack_coeff, 3.0) << to_string(spec);
  }
}

TEST(Curvature, WienerTruncationMatchesSeries)
{
  // |omega|_2^2 = 2 sum_{j <= N} j^{-2s}; for s = 2 it converges to pi^4 / 45
  const auto form = wiener_truncation(16, 2.0).form;
  double series = 0.0;
  for (int j = 1; j <= 16; ++j) { series += 2.0 * std::pow(j, -4.0); }
  EXPECT_NEAR(hs_norm_sq(form, 32), series, 1e-14);
  const auto rows = curvature_convergence(form, {2, 4, 8, 16, 32});
  for (std::size_t k = 1; k < rows.size(); ++k) { EXPECT_GE(rows[k].hs_norm_sq, rows[k - 1].hs_norm_sq); }
  EXPECT_LT(rows.back().hs_norm_sq, std::pow(std::acos(-1.0), 4) / 45.0);
  EXPECT_NEAR(rows.back().hs_norm_sq, std::pow(std::acos(-1.0), 4) / 45.0, 2.0 / (3.0 * 16 * 16 * 16));
}

TEST(Curvature, RhoIsBelowSampledRayleighQuotients)
{
  SequentialRng rng(77, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 * rng.uniform_int(1, 3);
    const int d = rng.uniform_int(1, 3);
    OmegaForm form(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int l = 0; l < d; ++l) { form.set(i, j, l, rng.normal()); }
      }
    }
    if (!form.satisfies_hormander()) { continue; }
    const auto c = curvature_constants(form, n);
    double sampled = 1e300;
    for (int s = 0; s < 400; ++s) {
      Vector v(d);
      for (int l = 0; l < d; ++l) { v[l] = rng.normal(); }
      v.normalize();
      sampled = std::min(sampled, v.dot(c.gram * v));
    }
    EXPECT_LE(c.rho2, sampled + 1e-9);
    EXPECT_GT(c.rho2, 0.0);
    EXPECT_LE(c.rho2 * d, c.hs_norm_sq + 1e-9);
  }
}

TEST(Curvature, DegenerateRankIsRejected)
{
  const auto form = block_sum({1.0, 1.0}).form;
  EXPECT_THROW(rho2(form, 2), HormanderError);
  const auto rows = curvature_convergence(form, {2, 4});
  EXPECT_FALSE(rows[0].valid);
  EXPECT_TRUE(rows[1].valid);
  EXPECT_THROW(hs_norm_sq(form, 5), ConfigError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hlg/heat.hpp"
#include "hlg/presets.hpp"

using namespace hlg;

namespace {

const OmegaForm & h3_form()
{
  static const OmegaForm form = heisenberg(1).form;
  return form;
}

const EndpointEnsemble & small_ensemble()
{
  static const EndpointEnsemble ens = sample_endpoints(h3_form(), 0.5, 64, 20000, 17, 0);
  return ens;
}

InequalityContext context()
{
  return {&h3_form(), curvature_constants(h3_form(), 2), "heisenberg(1)", 1, 1e-3};
}

// The bump used by the inequality tests: sup f = 1 and a positive floor for logarithms.
BumpFunction test_bump() { return BumpFunction({0.3, -0.2, 0.1}, 1.5, std::numbers::e, 0.1); }

// (1/2) L f(x) by group-translated second differences along x (t e_i, 0).
double half_sublaplacian(const BumpFunction & f, const std::vector<double> & x, double h = 1e-3)
{
  double s = 0.0;
  const double f0 = f(x);
  for (int i = 0; i < 2; ++i) {
    s += (f(shifted_point(h3_form(), x, i, h)) - 2.0 * f0 + f(shifted_point(h3_form(), x, i, -h))) / (h * h);
  }
  return 0.5 * s;
}

}  // namespace

TEST(Heat, LeftTranslationMatchesGroupLaw)
{
  const Group g(h3_form());
  Vector w(2);
  w << 0.4, -1.1;
  Vector c(1);
  c << 0.3;
  const GroupElement x{w, c};
  const GroupElement y{-0.5 * w, 2.0 * c};
  std::vector<double> out(3);
  left_translate(h3_form(), coords_of(x), coords_of(y), out.data());
  const auto ref = coords_of(g.multiply(x, y));
  for (int k = 0; k < 3; ++k) { EXPECT_NEAR(out[static_cast<std::size_t>(k)], ref[static_cast<std::size_t>(k)], 1e-15); }
}

TEST(Heat, BumpShape)
{
  const BumpFunction f({0.0, 0.0, 0.0}, 2.0, 1.0, 0.25);
  EXPECT_DOUBLE_EQ(f(std::vector<double>{0.0, 0.0, 0.0}), 0.25 + std::exp(-1.0));
  EXPECT_DOUBLE_EQ(f(std::vector<double>{2.0, 0.0, 0.0}), 0.25);
  EXPECT_DOUBLE_EQ(f.sup(), 0.25 + std::exp(-1.0));
  EXPECT_THROW(BumpFunction({0.0}, 0.0, 1.0), ConfigError);
  EXPECT_THROW(BumpFunction({0.0}, 1.0, 1.0, -0.1), ConfigError);
}

TEST(Heat, SemigroupIsLinearPositiveAndContracting)
{
  const auto & ens = small_ensemble();
  const auto f = test_bump();
  const BumpFunction g({-0.5, 0.5, 0.0}, 1.0, 2.0);
  const std::vector<double> x{0.1, 0.2, -0.1};
  const auto pf = semigroup_mc(h3_form(), f, x, ens);
  const auto pg = semigroup_mc(h3_form(), g, x, ens);
  const auto psum = semigroup_mc(h3_form(), [&](std::span<const double> z) { return f(z) + 3.0 * g(z); }, x, ens);
  EXPECT_NEAR(psum.value, pf.value + 3.0 * pg.value, 1e-12);
  EXPECT_GE(pf.value, f.inf());
  EXPECT_LE(pf.value, f.sup());
  const auto one = semigroup_mc(h3_form(), [](std::span<const double>) { return 1.0; }, x, ens);
  EXPECT_DOUBLE_EQ(one.value, 1.0);
  EXPECT_EQ(one.std_error, 0.0);
  const auto gam = gamma_semigroup_mc(h3_form(), [](std::span<const double>) { return 2.0; }, x, 1e-3, ens);
  EXPECT_EQ(gam.gamma.value, 0.0);
  EXPECT_EQ(gam.gamma_z.value, 0.0);
}

TEST(Heat, SecondMomentOfTheVerticalCoordinate)
{
  // P_T c^2 (x) = c^2 + T |w|^2 / 4 + (T^2 / 4)(1 - 1/K) for the discretized area
  const auto & ens = small_ensemble();
  const std::vector<double> x{0.8, -0.6, 0.3};
  const auto est = semigroup_mc(h3_form(), [](std::span<const double> z) { return z[2] * z[2]; }, x, ens);
  const double T = ens.T;
  const double exact = 0.09 + T * 1.0 / 4.0 + T * T / 4.0 * (1.0 - 1.0 / ens.K);
  EXPECT_NEAR(est.value, exact, 4.0 * est.std_error);
}

TEST(Heat, PdeIsExactOnTheQuadraticOracle)
{
  const auto grid = Grid3::symmetric_box(3.0, 3.0, {41, 41, 41});
  const double T = 0.05;
  const auto c2 = sample_on_grid(grid, [](std::span<const double> z) { return z[2] * z[2]; });
  const auto flow = heat_flow_h3(c2, T, 1.0);
  const int N = flow.steps;
  double worst = 0.0;
  for (int i = 13; i <= 27; ++i) {
    for (int j = 13; j <= 27; ++j) {
      for (int k = 13; k <= 27; ++k) {
        const double w1 = grid.coord(0, i);
        const double w2 = grid.coord(1, j);
        const double c = grid.coord(2, k);
        const double exact = c * c + T * (w1 * w1 + w2 * w2) / 4.0 + T * T / 4.0 * (1.0 - 1.0 / N);
        worst = std::max(worst, std::abs(flow.solution.values[grid.index(i, j, k)] - exact));
      }
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Heat, OneStepMatchesTheGeneratorWithTheStencilOrder)
{
  // one explicit step: (u1 - u0) / dt is the discrete (1/2) L u0; compare with group second differences
  const auto f = [](std::span<const double> z) {
    return std::exp(-0.5 * ((z[0] - 0.2) * (z[0] - 0.2) + z[1] * z[1] + (z[2] - 0.1) * (z[2] - 0.1) / 0.25));
  };
  double err[2][2] = {};
  double scale = 0.0;
  const int sizes[2] = {21, 41};
  for (int s = 0; s < 2; ++s) {
    const int N = sizes[s];
    for (int order : {2, 4}) {
      const auto grid = Grid3::symmetric_box(2.0, 2.0, {N, N, N});
      const auto u0 = sample_on_grid(grid, f);
      OracleOptions opts;
      opts.order = order;
      opts.dt = 1e-2 * stability_bound(grid, 1.0);
      const auto flow = heat_flow_h3(u0, opts.dt, 1.0, opts);
      ASSERT_EQ(flow.steps, 1);
      for (int i = N / 4; i <= 3 * N / 4; ++i) {
        for (int j = N / 4; j <= 3 * N / 4; ++j) {
          for (int k = N / 4; k <= 3 * N / 4; ++k) {
            const std::vector<double> x{grid.coord(0, i), grid.coord(1, j), grid.coord(2, k)};
            const auto idx = grid.index(i, j, k);
            const double discrete = (flow.solution.values[idx] - u0.values[idx]) / flow.dt;
            double second = 0.0;
            const double hd = 1e-3;
            for (int a = 0; a < 2; ++a) {
              second += (f(shifted_point(h3_form(), x, a, hd)) - 2.0 * f(x) + f(shifted_point(h3_form(), x, a, -hd))) / (hd * hd);
            }
            err[s][order / 4] = std::max(err[s][order / 4], std::abs(discrete - 0.5 * second));
            scale = std::max(scale, std::abs(0.5 * second));
          }
        }
      }
    }
  }
  // halving the spacing cuts the error by about 4 and 16
  EXPECT_GT(err[0][0] / err[1][0], 3.5);
  EXPECT_GT(err[0][1] / err[1][1], 12.0);
  EXPECT_LT(err[1][1], 1e-3 * scale);
  EXPECT_LT(err[1][0], 1e-2 * scale);
}

TEST(Heat, StabilityAndStencilValidation)
{
  const auto grid = Grid3::symmetric_box(3.0, 3.0, {16, 16, 16});
  const auto u0 = mollified_delta(grid);
  OracleOptions opts;
  opts.dt = 1.01 * stability_bound(grid, 1.0);
  EXPECT_THROW(heat_flow_h3(u0, 0.1, 1.0, opts), ConfigError);
  opts.dt = 0.0;
  opts.order = 3;
  EXPECT_THROW(heat_flow_h3(u0, 0.1, 1.0, opts), ConfigError);
  EXPECT_THROW(h3_coefficient(heisenberg(2).form), ConfigError);
  EXPECT_THROW(Grid3::symmetric_box(0.0, 1.0, {8, 8, 8}), ConfigError);
  EXPECT_NEAR(u0.integral(), 1.0, 1e-12);
}

class DensityOracleTest : public ::testing::Test
{
protected:
  static void SetUpTestSuite()
  {
    OracleOptions opts;
    opts.order = 4;
    // odd node counts put a node at the origin
    oracle_ = new DensityOracle(pde_oracle_h3(h3_form(), 1.0, Grid3::symmetric_box(6.0, 6.0, {49, 49, 65}), opts));
  }
  static void TearDownTestSuite()
  {
    delete oracle_;
    oracle_ = nullptr;
  }
  static DensityOracle * oracle_;
};

DensityOracle * DensityOracleTest::oracle_ = nullptr;

TEST_F(DensityOracleTest, MassAndInversionSymmetry)
{
  EXPECT_TRUE(oracle_->mass_ok);
  EXPECT_NEAR(oracle_->mass, 1.0, 1e-3);
  EXPECT_LT(inversion_asymmetry(oracle_->density), 1e-3);
  EXPECT_DOUBLE_EQ(oracle_->density.T, 1.0);
}

TEST_F(DensityOracleTest, IntegratedHarnackIsOneAtTheIdentity)
{
  const auto v = integrated_harnack_integral(h3_form(), oracle_->density, {0.0, 0.0, 0.0}, 2.0);
  EXPECT_NEAR(v.integral + v.excluded_mass, oracle_->mass, 1e-9);
  EXPECT_LT(v.excluded_mass, 1e-3);
  const auto constants = curvature_constants(h3_form(), 2);
  const auto r = verify_integrated_harnack(h3_form(), constants, oracle_->density, {0.5, 0.0, 0.0}, 2.0, 0.5, 0.02);
  EXPECT_TRUE(r.pass);
  // the w-marginal alone gives exp((q - 1) |y|^2 / (2T)); the vertical shear can only add to it
  EXPECT_GT(r.lhs, std::exp((2.0 - 1.0) * 0.25 / 2.0) - 0.01);
  EXPECT_LT(r.lhs, r.rhs);
}

TEST_F(DensityOracleTest, KernelDensityEstimateAgreesAtTheOrigin)
{
  // KDE with bandwidth = mollifier width at e is E[rho(g_T)], which is the mollified density at e
  const auto & g = oracle_->density.grid;
  const std::vector<double> bw{2.0 * g.spacing(0), 2.0 * g.spacing(1), 2.0 * g.spacing(2)};
  const auto ens = sample_endpoints(h3_form(), 1.0, 256, 100000, 23, 0);
  const double kde = density_kde(ens, bw, {{0.0, 0.0, 0.0}})[0];
  const double pde = *oracle_->density.interpolate(0.0, 0.0, 0.0);
  // about 4 standard errors of the estimate
  EXPECT_NEAR(kde, pde, 0.02 * pde);
}

TEST(HeatInequalities, ReverseInequalitiesHoldAtSamplePoints)
{
  const auto ctx = context();
  const auto f = test_bump();
  for (const auto & x : {std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.5, 0.5, -0.2}}) {
    const auto rp = verify_reverse_poincare(ctx, f, x, small_ensemble());
    EXPECT_TRUE(rp.pass) << rp.lhs << " vs " << rp.rhs;
    EXPECT_GT(rp.lhs, 0.0);
    const auto rl = verify_reverse_logsobolev(ctx, f, x, small_ensemble());
    EXPECT_TRUE(rl.pass) << rl.lhs << " vs " << rl.rhs;
  }
}

TEST(HeatInequalities, StatedReverseLogSobolevFailsOffAxis)
{
  // a grid solve at this point gives Gamma(ln u) = 0.113, Gamma^Z(ln u) = 1.00 and a right side of 0.758
  const auto ctx = context();
  const BumpFunction f({0.0, 0.0, 0.0}, 1.5, 1.0, 0.1);
  const std::vector<double> x{0.3, 0.3, 0.8};
  const auto stated = verify_reverse_logsobolev(ctx, f, x, small_ensemble());
  EXPECT_FALSE(stated.pass);
  EXPECT_NEAR(stated.lhs, 1.114, 0.1);
  EXPECT_NEAR(stated.rhs, 0.758, 0.05);
  const auto quarter = with_curvature_alpha(ctx, 0.5);
  EXPECT_DOUBLE_EQ(quarter.constants.harnack_coeff, 9.0);
  EXPECT_TRUE(verify_reverse_logsobolev(quarter, f, x, small_ensemble()).pass);
  EXPECT_TRUE(verify_reverse_poincare(ctx, f, x, small_ensemble()).pass);
  EXPECT_THROW(with_curvature_alpha(ctx, 0.0), DomainError);
}

TEST(HeatInequalities, HarnackAndStrongFeller)
{
  const auto ctx = context();
  const auto f = test_bump();
  const std::vector<double> x{0.0, 0.0, 0.0};
  // x = y is Jensen's inequality with factor 1
  const auto jensen = verify_wang_harnack(ctx, f, x, x, 2.0, 0.0, small_ensemble());
  EXPECT_TRUE(jensen.pass);
  EXPECT_LE(jensen.lhs, jensen.rhs);
  const std::vector<double> y{1.0, 0.0, 0.0};
  for (double p : {1.5, 2.0, 4.0}) { EXPECT_TRUE(verify_wang_harnack(ctx, f, x, y, p, 1.0, small_ensemble()).pass); }
  EXPECT_THROW(verify_wang_harnack(ctx, f, x, y, 1.0, 1.0, small_ensemble()), DomainError);

  const auto same = verify_strong_feller(ctx, f, x, x, 0.0, small_ensemble());
  EXPECT_EQ(same.lhs, 0.0);
  EXPECT_TRUE(same.pass);
  const BumpFunction centred({0.0, 0.0, 0.0}, 1.5, std::numbers::e);
  const auto mod = strong_feller_modulus(ctx, centred, {0.75, 0.0, 0.0}, {0.5, 0.25, 0.1, 0.05}, small_ensemble());
  EXPECT_TRUE(mod.shrinking);
  for (const auto & r : mod.records) { EXPECT_TRUE(r.pass); }
}

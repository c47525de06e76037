#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hlg/geometry.hpp"
#include "hlg/presets.hpp"
#include "hlg/random.hpp"

using namespace hlg;

namespace {

GroupElement h3(double a, double b, double c)
{
  Vector w(2);
  w << a, b;
  Vector v(1);
  v << c;
  return {w, v};
}

// Perimeter of the regular K-gon enclosing area |c|: the exact discrete optimum for a vertical target on H^3.
double polygon_distance(int K, double c) { return std::sqrt(4.0 * K * std::tan(std::numbers::pi / K) * std::abs(c)); }

DistanceOptions quick(int restarts = 6)
{
  DistanceOptions o;
  o.restarts = restarts;
  return o;
}

}  // namespace

TEST(Geometry, HorizontalTargetsAreStraightLines)
{
  const Group g(heisenberg(1).form);
  for (const auto & z : {h3(1.0, 0.0, 0.0), h3(0.3, -1.2, 0.0), h3(-2.0, 0.5, 0.0)}) {
    const auto r = cc_distance(g, z, quick());
    EXPECT_NEAR(r.distance, z.w.norm(), 1e-6 * z.w.norm());
    EXPECT_TRUE(r.feasible);
  }
}

TEST(Geometry, VerticalTargetMatchesIsoperimetricOptimum)
{
  const Group g(heisenberg(1).form);
  const auto r = cc_distance(g, h3(0.0, 0.0, 1.0), quick());
  EXPECT_NEAR(r.distance, polygon_distance(64, 1.0), 1e-5);
  EXPECT_NEAR(r.distance, 2.0 * std::sqrt(std::numbers::pi), 1e-3 * 2.0 * std::sqrt(std::numbers::pi));
  // the witness is a closed horizontal loop of length = distance (constant speed)
  EXPECT_NEAR(r.witness.length(), r.distance, 1e-6);
  EXPECT_LT((r.witness.nodes.row(0) - r.witness.nodes.row(64)).norm(), 1e-6);
}

TEST(Geometry, WitnessEndpointFollowsTheGroupLaw)
{
  const Group g(heisenberg(2).form);
  SequentialRng rng(31, 0);
  GroupElement z = GroupElement::identity(4, 1);
  for (int i = 0; i < 4; ++i) { z.w[i] = rng.uniform(-1, 1); }
  z.c[0] = 0.7;
  const auto r = cc_distance(g, z, quick());
  // oracle: multiply the straight segments (dA_k, 0) from the start point
  GroupElement acc = r.witness.start();
  for (int k = 0; k < r.witness.segments(); ++k) {
    const Vector dA = (r.witness.nodes.row(k + 1) - r.witness.nodes.row(k)).transpose();
    acc = g.multiply(acc, g.element(dA, Vector::Zero(1)));
  }
  EXPECT_LT(homogeneous_norm(g.multiply(g.inverse(acc), z)), 1e-6);
  EXPECT_LT(homogeneous_norm(g.multiply(g.inverse(r.witness.end()), z)), 1e-6);
  EXPECT_NEAR(r.witness.reversed().vertical_displacement()[0], -r.witness.vertical_displacement()[0], 1e-12);
  EXPECT_NEAR(r.witness.refine(3).energy(), r.witness.energy(), 1e-9 * r.witness.energy());
}

TEST(Geometry, DilationLeftInvarianceAndSymmetry)
{
  const Group g(heisenberg(1).form);
  const auto z = h3(0.4, -0.3, 0.5);
  const double base = cc_distance(g, z, quick()).distance;
  for (double lambda : {0.5, 2.0}) {
    EXPECT_NEAR(cc_distance(g, g.dilate(lambda, z), quick()).distance, lambda * base, 1e-3 * lambda * base);
  }
  const auto x = h3(1.0, 2.0, -0.3);
  EXPECT_NEAR(cc_distance(g, x, g.multiply(x, z), quick()).distance, base, 1e-6 * base);
  EXPECT_NEAR(cc_distance(g, g.multiply(x, z), x, quick()).distance, base, 1e-3 * base);
  // the Euclidean part is a lower bound; the ball-box bound holds with a moderate constant
  EXPECT_GE(base + 1e-9, z.w.norm());
  const auto rep = check_distance_norm_equivalence(g, {z, h3(0, 0, 2), h3(1, 0, 0)}, quick());
  EXPECT_TRUE(rep.bounded);
  EXPECT_GT(rep.min_ratio, 0.5);
  // the vertical ratio is exactly 2 sqrt(pi) at any height
  EXPECT_NEAR(rep.max_ratio, polygon_distance(64, 1.0), 1e-4);
}

TEST(Geometry, ProjectedDistancesDecreaseWithRank)
{
  const auto form = wiener_truncation(4, 2.0).form;
  GroupElement x = GroupElement::identity(8, 1);
  x.c[0] = 0.5;
  DistanceOptions opts = quick(8);
  opts.segments = 32;
  const auto rep = projected_distance_convergence(form, x, {2, 4, 8}, opts);
  EXPECT_TRUE(rep.nonincreasing);
  ASSERT_EQ(rep.rows.size(), 3u);
  // the first plane carries q = 1 and is the cheapest, so every rank matches the 2-plane optimum
  for (const auto & row : rep.rows) { EXPECT_NEAR(row.distance, polygon_distance(32, 0.5), 1e-4); }
  EXPECT_THROW(projected_distance_convergence(form, x, {4, 2}, opts), ConfigError);
}

TEST(Geometry, StraightStartAloneCannotReachAVerticalTarget)
{
  const Group g(heisenberg(1).form);
  try {
    cc_distance(g, h3(0, 0, 1), quick(1));
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure & e) {
    EXPECT_FALSE(e.best().feasible);
  }
}

TEST(Geometry, IdentityTargetHasZeroDistance)
{
  const Group g(heisenberg(1).form);
  const auto r = cc_distance(g, h3(0, 0, 0), quick());
  EXPECT_EQ(r.distance, 0.0);
}

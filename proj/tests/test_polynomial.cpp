#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "hlg/polynomial.hpp"
#include "hlg/random.hpp"

using namespace hlg;

namespace {

Polynomial random_poly(int nvars, int terms, SequentialRng & rng)
{
  Polynomial p(nvars);
  for (int t = 0; t < terms; ++t) {
    Monomial m{};
    const int deg = rng.uniform_int(0, 4);
    for (int e = 0; e < deg; ++e) { m[static_cast<std::size_t>(rng.uniform_int(0, nvars - 1))] += 1; }
    p.add_term(m, rng.uniform(-1.0, 1.0));
  }
  return p;
}

}  // namespace

TEST(PolynomialTest, EvaluateAndCanonicalForm)
{
  const auto x = Polynomial::variable(3, 0);
  const auto y = Polynomial::variable(3, 1);
  const auto p = x * x * y * 3.0 + Polynomial::constant(3, -2.0);
  const std::array<double, 3> pt{2.0, -1.0, 5.0};
  EXPECT_DOUBLE_EQ(p.evaluate(pt), 3.0 * 4.0 * -1.0 - 2.0);
  EXPECT_EQ(p.degree(), 3);
  EXPECT_TRUE((p - p).is_zero());
  EXPECT_EQ((x + x * -1.0).size(), 0u);
}

TEST(PolynomialTest, DerivativeMatchesFiniteDifference)
{
  SequentialRng rng(4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_poly(3, 10, rng);
    std::array<double, 3> pt{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-4;
      auto up = pt;
      auto dn = pt;
      up[static_cast<std::size_t>(k)] += h;
      dn[static_cast<std::size_t>(k)] -= h;
      const double fd = (p.evaluate(up) - p.evaluate(dn)) / (2.0 * h);
      EXPECT_NEAR(p.derivative(k).evaluate(pt), fd, 1e-6);
    }
  }
}

TEST(PolynomialTest, ProductRuleAndRingLaws)
{
  SequentialRng rng(9, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_poly(4, 6, rng);
    const auto b = random_poly(4, 6, rng);
    const auto c = random_poly(4, 6, rng);
    EXPECT_TRUE(polynomials_match((a * b).derivative(2), a.derivative(2) * b + a * b.derivative(2)));
    EXPECT_TRUE(polynomials_match(a * (b + c), a * b + a * c));
    EXPECT_TRUE(polynomials_match(a * b, b * a));
    EXPECT_TRUE(polynomials_match(a.times_variable(1), a * Polynomial::variable(4, 1)));
  }
}

TEST(PolynomialTest, MatchToleranceIsRelative)
{
  auto a = Polynomial::constant(2, 1e6);
  auto b = Polynomial::constant(2, 1e6 + 1e-4);
  EXPECT_TRUE(polynomials_match(a, b));
  EXPECT_FALSE(polynomials_match(Polynomial::constant(2, 1.0), Polynomial::constant(2, 1.0 + 1e-6)));
  EXPECT_DOUBLE_EQ((Polynomial::variable(2, 0) * 3.0 + Polynomial::constant(2, 4.0)).coefficient_norm(), 5.0);
}

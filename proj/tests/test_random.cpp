#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hlg/random.hpp"

using namespace hlg;

TEST(Philox, KnownAnswerVectors)
{
  // Random123 reference values for philox4x32-10
  const auto zero = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero[0], 0x6627e8d5u);
  EXPECT_EQ(zero[1], 0xe169c58du);
  EXPECT_EQ(zero[2], 0xbc57ac4cu);
  EXPECT_EQ(zero[3], 0x9b00dbd8u);
  const auto ones = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones[0], 0x408f276du);
  EXPECT_EQ(ones[1], 0x41c83b0eu);
  EXPECT_EQ(ones[2], 0xa20bc7c6u);
  EXPECT_EQ(ones[3], 0x6d5451fdu);
  const auto pi = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi[0], 0xd16cfe09u);
  EXPECT_EQ(pi[1], 0x94fdccebu);
  EXPECT_EQ(pi[2], 0x5001e420u);
  EXPECT_EQ(pi[3], 0x24126ea1u);
}

TEST(CounterRngTest, AddressedDrawsAreReproducible)
{
  const CounterRng a(42, 7, 1000);
  const CounterRng b(42, 7, 1000);
  EXPECT_EQ(a.normal_pair(3, 5), b.normal_pair(3, 5));
  EXPECT_NE(a.normal_pair(3, 5), a.normal_pair(3, 6));
  EXPECT_NE(a.normal_pair(3, 5), CounterRng(42, 8, 1000).normal_pair(3, 5));
  EXPECT_NE(a.normal_pair(3, 5), CounterRng(43, 7, 1000).normal_pair(3, 5));
  EXPECT_NE(a.normal_pair(3, 5), CounterRng(42, 7, 1001).normal_pair(3, 5));
  // index high word participates
  EXPECT_NE(CounterRng(1, 1, 0).block(0, 0), CounterRng(1, 1, 1ull << 32).block(0, 0));
}

TEST(CounterRngTest, NormalMoments)
{
  const CounterRng rng(1, 2, 3);
  const int N = 200000;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0, cross = 0.0;
  for (int k = 0; k < N / 2; ++k) {
    const auto z = rng.normal_pair(0, static_cast<std::uint32_t>(k));
    for (double v : z) {
      s1 += v;
      s2 += v * v;
      s3 += v * v * v;
      s4 += v * v * v * v;
    }
    cross += z[0] * z[1];
  }
  const double n = N;
  // standard errors: 1/sqrt(N), sqrt(2/N), sqrt(15/N), sqrt(96/N)
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s3 / n, 0.0, 4.0 * std::sqrt(15.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
  EXPECT_NEAR(cross / (n / 2), 0.0, 4.0 / std::sqrt(n / 2));
}

TEST(CounterRngTest, UniformsInOpenUnitInterval)
{
  EXPECT_GT(to_unit_open(0, 0), 0.0);
  EXPECT_LT(to_unit_open(0xffffffffu, 0xffffffffu), 1.0);
  const CounterRng rng(9, 9, 9);
  double mean = 0.0;
  for (std::uint32_t k = 0; k < 50000; ++k) {
    const auto u = rng.uniform_pair(1, k);
    mean += u[0] + u[1];
  }
  mean /= 100000.0;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000.0));
}

TEST(Hashing, LabelsAndCombineSpread)
{
  std::set<std::uint64_t> seen;
  for (const char * s : {"a", "b", "ab", "ba", "brownian", "cc_distance.restart", ""}) { seen.insert(hash_label(s)); }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_NE(hash_combine(1, 2), hash_combine(2, 1));
  EXPECT_EQ(hash_label("brownian"), hash_label("brownian"));
}

TEST(SequentialRngTest, RangesAndDeterminism)
{
  SequentialRng a(5, 6);
  SequentialRng b(5, 6);
  for (int k = 0; k < 1000; ++k) {
    const int i = a.uniform_int(2, 4);
    EXPECT_EQ(i, b.uniform_int(2, 4));
    EXPECT_GE(i, 2);
    EXPECT_LE(i, 4);
    const double u = a.uniform(-1.0, 3.0);
    EXPECT_EQ(u, b.uniform(-1.0, 3.0));
    EXPECT_GT(u, -1.0);
    EXPECT_LT(u, 3.0);
  }
}

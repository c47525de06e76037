#pragma once

// Counter-based random numbers: every draw is a pure function of (key, counter),
// so results never depend on evaluation order or on how work is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace hlg {

/// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32
{
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key)
  {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter & c, const Key & k)
  {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer, used to derive child keys from (master seed, labels).
inline std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) { return mix64(seed ^ mix64(value)); }

inline std::uint64_t hash_label(std::string_view label)
{
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (char ch : label) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return mix64(h);
}

/// 52-bit midpoint uniform in the open interval (0, 1); the extremes are 2^-53 and 1 - 2^-53.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo)
{
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/**
 * @brief A random stream addressed by (seed, stream, index).
 *
 * block(step, slot) returns four 32-bit words for counter (step, slot, index lo, index hi)
 * under the key derived from (seed, stream). Gaussian pairs come from Box-Muller on one block.
 */
class CounterRng
{
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
  {
    const std::uint64_t k = hash_combine(seed, stream);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    idx_lo_ = static_cast<std::uint32_t>(index);
    idx_hi_ = static_cast<std::uint32_t>(index >> 32);
  }

  Philox4x32::Counter block(std::uint32_t step, std::uint32_t slot) const
  {
    return Philox4x32::generate({step, slot, idx_lo_, idx_hi_}, key_);
  }

  /// Two independent standard normals for (step, slot).
  std::array<double, 2> normal_pair(std::uint32_t step, std::uint32_t slot) const
  {
    const auto b = block(step, slot);
    const double u1 = to_unit_open(b[0], b[1]);
    const double u2 = to_unit_open(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Two uniforms in (0, 1) for (step, slot).
  std::array<double, 2> uniform_pair(std::uint32_t step, std::uint32_t slot) const
  {
    const auto b = block(step, slot);
    return {to_unit_open(b[0], b[1]), to_unit_open(b[2], b[3])};
  }

private:
  Philox4x32::Key key_{};
  std::uint32_t idx_lo_{0};
  std::uint32_t idx_hi_{0};
};

/// Sequential convenience wrapper over CounterRng for non-hot paths (test-function generation, restarts).
class SequentialRng
{
public:
  SequentialRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) : rng_{seed, stream, index} {}

  double uniform()
  {
    if (have_uniform_) {
      have_uniform_ = false;
      return spare_uniform_;
    }
    const auto u = rng_.uniform_pair(0, counter_++);
    spare_uniform_ = u[1];
    have_uniform_ = true;
    return u[0];
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi_inclusive)
  {
    const int span = hi_inclusive - lo + 1;
    int k = static_cast<int>(uniform() * span);
    return lo + (k >= span ? span - 1 : k);
  }

  double normal()
  {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const auto z = rng_.normal_pair(1, counter_++);
    spare_normal_ = z[1];
    have_normal_ = true;
    return z[0];
  }

private:
  CounterRng rng_;
  std::uint32_t counter_{0};
  double spare_uniform_{0.0};
  double spare_normal_{0.0};
  bool have_uniform_{false};
  bool have_normal_{false};
};

}  // namespace hlg

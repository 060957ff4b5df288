#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace drnd {

// SplitMix64 finalizer. Used for seeding and for deriving child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed splitting rule: the child seed for stream `stream` of `master` is
// splitmix64(splitmix64(master) ^ splitmix64(stream + 1)). A child seed
// depends only on (master, stream), so adding streams never shifts others.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 1));
}

// Named stream tags so call sites do not collide on small integers.
namespace stream {
inline constexpr std::uint64_t kPredictor = 0x5052ED;
inline constexpr std::uint64_t kTargets = 0x7A26E7;
inline constexpr std::uint64_t kTargetDraws = 0xC0FFEE;
inline constexpr std::uint64_t kDataset = 0xDA7A;
inline constexpr std::uint64_t kPolicy = 0x9011C7;
inline constexpr std::uint64_t kCritic = 0xC217;
inline constexpr std::uint64_t kActions = 0xAC7;
inline constexpr std::uint64_t kMinibatch = 0x3B;
inline constexpr std::uint64_t kDistill = 0xD157;
inline constexpr std::uint64_t kEval = 0xE7A1;
inline constexpr std::uint64_t kMonteCarlo = 0x3C;
}  // namespace stream

// xoshiro256** 1.0 (Blackman & Vigna). State is seeded by running SplitMix64
// from the given seed. All distributions below are implemented here rather
// than through <random> distributions so that streams are identical across
// standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      s = z ^ (z >> 31);
    }
    has_spare_normal_ = false;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::size_t index(std::size_t n) noexcept {
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * range;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4]{};
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

}  // namespace drnd

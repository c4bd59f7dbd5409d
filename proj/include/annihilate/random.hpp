// Splittable random streams.
//
// Every random quantity in a simulation is drawn from a stream whose seed is a
// pure function of (run seed, tags...). Two runs that agree on the tags see the
// same numbers, which is what the coupling checks rely on.

#ifndef ANNIHILATE_RANDOM_HPP_
#define ANNIHILATE_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace annihilate {

// One round of the SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a list of tags into a seed. Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(base ^ 0x243f6a8885a308d3ULL);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x13198a2e03707344ULL));
  return h;
}

// Replica seeds: seed_i = split(base, i).
constexpr std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
  return derive_seed(base, {0x5eedULL, index});
}

// Stream tags. Keeping these in one place avoids accidental reuse.
namespace tag {
inline constexpr std::uint64_t kPath = 1;
inline constexpr std::uint64_t kBraveness = 2;
inline constexpr std::uint64_t kType = 3;
inline constexpr std::uint64_t kPolarity = 4;
inline constexpr std::uint64_t kExtension = 5;
inline constexpr std::uint64_t kFresh = 6;
inline constexpr std::uint64_t kCheck = 7;
}  // namespace tag

// xoshiro256** 1.0 (Blackman and Vigna), seeded through SplitMix64.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s_) {
      w = mix64(z);
      z += 0x9e3779b97f4a7c15ULL;
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate. rate must be positive.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Uniform on {0, ..., n-1}, unbiased (Lemire's method).
  std::uint32_t below(std::uint32_t n) {
    std::uint64_t x = (*this)() >> 32;
    std::uint64_t m = x * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
      while (low < threshold) {
        x = (*this)() >> 32;
        m = x * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace annihilate

#endif  // ANNIHILATE_RANDOM_HPP_

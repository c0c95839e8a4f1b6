#pragma once

// Deterministic splittable RNG used everywhere randomness is needed.
//
// Stream splitting: Rng(seed).split(k) yields the k-th substream of a master
// seed. A Monte Carlo trial, bootstrap replicate, or sampling pass always
// derives its stream from its *index*, never from the thread it runs on, so
// results are identical for any --threads value.

#include <cmath>
#include <cstdint>
#include <vector>

namespace lrcert {

namespace detail {
// SplitMix64 (Steele, Lea, Flood 2014). Full-period 64-bit mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {
    // Warm up so nearby seeds decorrelate.
    next_u64();
    next_u64();
  }

  std::uint64_t seed() const { return seed_; }

  // Substream k of this generator's seed. Independent of draws made so far.
  Rng split(std::uint64_t k) const {
    std::uint64_t s = seed_;
    std::uint64_t a = detail::splitmix64(s);
    s = k + 1;
    std::uint64_t b = detail::splitmix64(s);
    return Rng(a ^ b);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (cached spare).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrcert

#pragma once
#include <cstdint>
#include <cmath>

namespace fpde {

// Counter-based generator: value = mix(key, counter) with the SplitMix64
// finalizer.  Pure integer arithmetic, so streams are bit-identical across
// platforms and independent of call order; every consumer derives its draws
// from (seed, stream, counter) coordinates instead of shared mutable state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ 0x9e3779b97f4a7c15ull) + stream * 0xbf58476d1ce4e5b9ull) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + counter * 0x9e3779b97f4a7c15ull); }

  // Uniform in [0,1) with 53 significant bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Standard normal via Box–Muller on two derived uniforms.
  double normal(std::uint64_t counter) const {
    double u1 = uniform(2 * counter);
    double u2 = uniform(2 * counter + 1);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return bits(counter) % (n ? n : 1);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

// Stateful convenience wrapper when sequential draws are fine.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) : rng_(seed, stream) {}
  double uniform() { return rng_.uniform(next_++); }
  double uniform(double lo, double hi) { return rng_.uniform(next_++, lo, hi); }
  double normal() { return rng_.normal(next_++); }
  std::uint64_t below(std::uint64_t n) { return rng_.below(next_++, n); }
 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace fpde

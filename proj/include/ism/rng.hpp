#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace ism {

// Deterministic random source. Every variate is derived from the raw
// 64-bit engine output by code in this library (no std distributions), so
// a seed reproduces the same stream on every platform and standard library.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform on (0, 1); never returns an endpoint.
  double uniform_open();
  double uniform(double low, double high);
  // Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via the polar method.
  double normal();

  // UniformRandomBitGenerator surface.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed for cell (a, b) of a sweep rooted at `base`. Distinct cells get
// statistically independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

}  // namespace ism

#pragma once

#include <cstdint>
#include <random>

#include "motorkit/common.hpp"

namespace motorkit {

// Deterministic random source. All draws go through hand-written transforms
// of the raw 64-bit stream so sequences are reproducible across platforms and
// standard-library versions (std::*_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform in [0, 1).
  double uniform() {
    return double(gen_() >> 11) * (1.0 / 9007199254740992.0);  // 2^-53
  }
  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] via rejection-free modulo of a wide draw.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    return lo + std::int64_t(gen_() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (cosine branch only, so the number of raw
  // draws per call is fixed).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  VecX gaussian_vec(int n) {
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = real(gaussian());
    return v;
  }
  VecX uniform_vec(int n, double lo, double hi) {
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = real(uniform(lo, hi));
    return v;
  }

  // Child stream with a seed derived from (seed, id); independent streams for
  // parallel actors and pipeline stages.
  Rng fork(std::uint64_t id) const {
    std::uint64_t x = seed_ + 0x9E3779B97F4A7C15ULL * (id + 1);
    x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27; x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace motorkit

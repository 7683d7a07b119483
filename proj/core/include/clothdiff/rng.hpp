#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "clothdiff/vec3.hpp"

namespace clothdiff {

// Deterministic RNG. All distributions are implemented here instead of with
// std::*_distribution, whose output is implementation-defined; identical
// seeds must reproduce identical streams for dataset regeneration to be
// byte-identical.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling, unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<int64_t>(n) - 1)); }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Vec3 unit_vector() {
    Vec3 v{normal(), normal(), normal()};
    double n = norm(v);
    while (n < 1e-12) {
      v = Vec3{normal(), normal(), normal()};
      n = norm(v);
    }
    return v / n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Decorrelated child stream, for per-trajectory / per-record seeds.
  static uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double cache_{0.0};
  bool has_cache_{false};
};

}  // namespace clothdiff

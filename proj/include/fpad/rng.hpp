#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "fpad/common.hpp"

namespace fpad {

// Deterministic, platform-independent RNG. We do not use the <random>
// distributions because their output sequences are implementation-defined;
// reproducibility of trained models requires pinning the exact bit stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix64 warm-up so that nearby seeds diverge immediately
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [0, n)
  std::size_t next_index(std::size_t n) {
    // modulo bias is < 2^-40 for any n we ever use; acceptable and portable
    return static_cast<std::size_t>(next_u64() % n);
  }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[next_index(i)]);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stage seeds are derived by hashing (global seed, stage name) so that
// partial re-runs of any stage see the same stream.
inline std::uint64_t derive_seed(std::uint64_t global_seed,
                                 const std::string& stage) {
  std::uint64_t h = fnv1a64(&global_seed, sizeof(global_seed));
  return fnv1a64(stage, h);
}

}  // namespace fpad

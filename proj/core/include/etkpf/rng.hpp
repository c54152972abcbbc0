#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace etkpf {

/// splitmix64 mixing step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d82db6e3a0cb4dULL;
  return x ^ (x >> 31);
}

/// Derives a substream seed from a base seed and up to two stream tags.
/// The derivation is pure, so any worker can reproduce the stream for a
/// given (cycle, member/site) pair regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

/// Deterministic random stream: mt19937_64 plus hand-rolled uniform and
/// Box-Muller normal transforms. std::*_distribution is implementation
/// defined, so we avoid it to keep archives byte-reproducible across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace etkpf

#ifndef RSMA_RNG_HPP_
#define RSMA_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rsma {

// Deterministic random source.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard library distributions are not (their algorithms are
// implementation-defined), so every variate below is derived from raw engine
// words with a fixed recipe:
//   uniform()  : top 53 bits of one word scaled by 2^-53, in [0, 1)
//   normal()   : Box-Muller on two uniforms, second variate cached
//   index(n)   : floor(uniform() * n)
// The same seed therefore yields the same stream on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Child stream with a seed derived from this one (splitmix64 finalizer).
  Rng split() {
    std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rsma

#endif  // RSMA_RNG_HPP_

#pragma once

#include <cstdint>

namespace peps {

/// Counter-free splittable generator (SplitMix64, Steele et al. / Vigna).
/// The algorithm is fixed so that streams are reproducible across
/// implementations: state advances by the golden-gamma constant and each
/// output is the finalizer below.  All randomness in the library flows
/// through this generator.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [-1, 1].
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

 private:
  std::uint64_t state_;
};

/// Derives a child seed from a base seed and a structural position, by
/// chaining the SplitMix64 finalizer.  Identical (base, parts...) always give
/// the identical child stream, which is what lets cached partial contractions
/// be reproduced exactly by uncached recomputation.
inline std::uint64_t derive_seed(std::uint64_t base) { return base; }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t part, Rest... rest) {
  SplitMix64 g(base ^ (part + 0x9E3779B97F4A7C15ull));
  return derive_seed(g.next_u64(), static_cast<std::uint64_t>(rest)...);
}

}  // namespace peps

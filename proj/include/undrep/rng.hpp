#pragma once

#include <cmath>
#include <cstdint>

namespace undrep::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Steele/Lea/Flood).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr double to_unit(std::uint64_t x) {
  // [0, 1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Sequential SplitMix64 stream.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  double next_unit() { return to_unit(next_u64()); }

  // Box-Muller; wasteful of one uniform but stateless across calls, which
  // keeps draw k of a stream independent of how earlier draws were consumed.
  double next_gaussian() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Fisher-Yates index bound; rejection-free 64-bit modulo is fine at the
  // population sizes used here (bias < 2^-40 for n < 2^24).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Counter-based draw for cell (a, b) under `seed`: a pure function of its
// arguments, so per-cell draws are reproducible independent of row order
// and evaluation order.
inline constexpr std::uint64_t cell_u64(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(seed + kGolden);
  h = mix64(h ^ (a + kGolden));
  h = mix64(h ^ (b + 0x8f1bbcdcbfa53e0bULL));
  return h;
}

inline constexpr double cell_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return to_unit(cell_u64(seed, a, b));
}

inline double cell_gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const double u1 = static_cast<double>((cell_u64(seed, a, 2 * b) >> 11) + 1) * 0x1.0p-53;
  const double u2 = to_unit(cell_u64(seed, a, 2 * b + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

// Seed derivation for sub-streams: hash(base, tag).
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return cell_u64(base, tag, 0x5eedULL);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1,
                                           std::uint64_t tag2) {
  return cell_u64(base, tag1, tag2);
}

}  // namespace undrep::rng

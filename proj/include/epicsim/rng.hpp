#pragma once

#include <cstdint>

namespace epicsim {

/// SplitMix64. Every random draw in the simulator comes from one of these,
/// so the consumption order fully determines a trace.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_fraction() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound], via the 53-bit fraction.
  std::uint64_t next_at_most(std::uint64_t bound) {
    return static_cast<std::uint64_t>(next_fraction() * (static_cast<double>(bound) + 1.0));
  }

  std::uint64_t state() const { return state_; }
  friend bool operator==(const SplitMix64&, const SplitMix64&) = default;

 private:
  std::uint64_t state_;
};

/// Stateless mix of several 64-bit keys into one seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  SplitMix64 g(a ^ (b * 0xD1B54A32D192ED03ULL) ^ (c * 0x8CB92BA72F3D8DD7ULL));
  g.next();
  return g.next();
}

}  // namespace epicsim

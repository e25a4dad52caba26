#pragma once

// Counter-based deterministic randomness: SplitMix64 applied to
// key + counter. Every random quantity in the project is a pure function of
// (seed, stream tag, counter), so runs are reproducible regardless of
// evaluation order.

#include <cstdint>
#include <string_view>

namespace plaplab {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}
}  // namespace detail

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream)
      : key_(detail::splitmix64(seed ^ detail::fnv1a(stream))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return detail::splitmix64(key_ + counter * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

 private:
  std::uint64_t key_;
};

}  // namespace plaplab

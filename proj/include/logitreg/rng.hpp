#pragma once

#include <cstdint>
#include <random>

namespace logitreg {

/// SplitMix64 finalizer; used to derive independent engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream identifiers. A (seed, stream) pair names one reproducible sequence;
/// different streams of the same seed are statistically independent.
enum class Stream : std::uint64_t {
  train_labels = 1,
  train_signal_noise = 2,
  train_orth_noise = 3,
  test_labels = 11,
  test_signal_noise = 12,
  test_orth_noise = 13,
  init = 21,
  monte_carlo = 31,
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xD1B54A32D192ED03ULL));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
  return std::mt19937_64(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

}  // namespace logitreg

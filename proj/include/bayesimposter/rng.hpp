#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bayesimposter {

// Seeded random source. Wraps std::mt19937_64 but does its own value
// derivation: the standard distributions are implementation-defined, and
// tests freeze exact byte-level outputs across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Modulo bias is < 2^-32 for the domain sizes
  // used here and keeps the stream portable.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    return engine_() % n;
  }

  // Index sampled from an (assumed normalized) probability row.
  int sample_row(std::span<const double> row) {
    const double r = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      acc += row[i];
      if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(row.size()) - 1;
  }

  void fill_bytes(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t v = engine_();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
        out[i] = static_cast<std::uint8_t>(v >> (8 * b));
      }
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64; used to derive independent sub-seeds from one scenario seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bayesimposter

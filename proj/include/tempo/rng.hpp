#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tempo {

using Rng = std::mt19937_64;

// Named per-component streams. Each run derives one independent engine per
// stream from its root seed, so draws in one stream never shift another.
enum class Stream : std::uint64_t {
  kEnvironment = 1,
  kAgent = 2,
  kSensor = 3,
  kCalibration = 4,
  kSimulation = 5,
  kEvaluation = 6,
  kModel = 7,
  kTest = 8,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(mix64(root) ^ tag) ^ index);
}

inline Rng make_stream(std::uint64_t root, Stream stream,
                       std::uint64_t index = 0) {
  return Rng(derive_seed(root, static_cast<std::uint64_t>(stream), index));
}

// Uniform double in [0, 1) from the top 53 bits. Used instead of
// std::uniform_real_distribution so that draws are identical across
// standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Standard normal via Marsaglia polar method; portable across toolchains.
class NormalSampler {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform01(rng) - 1.0;
      v = 2.0 * uniform01(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tempo

#ifndef SENTINEL_RNG_H_
#define SENTINEL_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace sentinel {

// Seeded random source with fully specified output. The standard library
// distributions are implementation-defined, so sampling is done by hand on
// top of mt19937_64 (whose output sequence the standard pins down).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Seed for an independent named sub-stream, e.g. "agent/3" or "scenario".
  static uint64_t DeriveSeed(uint64_t seed, std::string_view stream);

  uint64_t NextU64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t UniformIndex(uint64_t n);

  bool Bernoulli(double p) { return Uniform01() < p; }

  // Standard normal via Box-Muller (one value per call, no caching).
  double Normal();

  // Index drawn proportionally to non-negative weights.
  size_t Categorical(std::span<const double> weights);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformIndex(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sentinel

#endif  // SENTINEL_RNG_H_

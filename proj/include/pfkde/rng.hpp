#pragma once

#include <cstdint>
#include <random>

namespace pfkde {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tag of a random stream. Distinct phases never share draws.
enum class Phase : std::uint64_t {
  initial = 1,
  propagate = 2,
  resample = 3,
  simulate_state = 4,
  simulate_observation = 5,
  experiment = 6,
};

/// Key of the substream for (seed, time step, phase, index).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t t, Phase phase,
                                   std::uint64_t index = 0) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (t * 0xd1b54a32d192ed03ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(phase) * 0x8cb92ba72f3d8dd7ULL));
  return mix64(h ^ (index * 0xa0761d6478bd642fULL));
}

/// Counter-based generator. The n-th output is a pure function of (key, n),
/// so every particle can own an independent stream and the result does not
/// depend on how the particles are split among threads.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t t, Phase phase, std::uint64_t index = 0) noexcept
      : key_(stream_key(seed, t, phase, index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ ^ mix64(counter_));
  }

  /// Uniform draw on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pfkde

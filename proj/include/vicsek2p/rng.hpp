/* rng.hpp -- counter-based random streams keyed by (seed, id, step) */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace vicsek2p {

inline constexpr std::uint64_t splitmix64(std::uint64_t &s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// A short-lived generator whose state is a hash of its key, so a stream can
// be rebuilt anywhere without sharing state between threads. Satisfies
// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t id = 0, std::uint64_t step = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (id * 0xD1B54A32D192ED03ull);
    std::uint64_t b = splitmix64(s);
    s = b ^ (step * 0xABC98388FB8FAC03ull);
    state_ = splitmix64(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return splitmix64(state_); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // standard normal
  double normal() { return normal_(*this); }

 private:
  std::uint64_t state_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vicsek2p

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace crnbo {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a key tuple.
inline std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x2545F4914F6CDD1DULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Stateless random stream: the i-th draw is a pure function of (key, i).
/// Simulators draw all randomness through these so that an objective value
/// depends only on (solution, seed).
class CounterStream {
 public:
  CounterStream() = default;
  explicit CounterStream(std::uint64_t key) : key_(key) {}
  CounterStream(std::initializer_list<std::uint64_t> key) : key_(hash_key(key)) {}

  std::uint64_t bits(std::uint64_t i) const { return splitmix64(key_ ^ splitmix64(i + 0x632BE59BD9B4E019ULL)); }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t i) const {
    return (static_cast<double>(bits(i) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on the uniform pair (2i, 2i+1).
  double normal(std::uint64_t i) const {
    const double u1 = uniform(2 * i);
    const double u2 = uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(std::uint64_t i, double rate) const { return -std::log(uniform(i)) / rate; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
};

/// Stateful engine for algorithm-side randomness (designs, starts), seeded from a key tuple.
inline std::mt19937_64 make_engine(std::initializer_list<std::uint64_t> key) {
  return std::mt19937_64(hash_key(key));
}

}  // namespace crnbo

#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace tadc {

/// Seeded generator. Independent substreams are keyed by (seed, a, b) through a
/// SplitMix64 mix, so trial i of a sweep gets the same draws no matter which
/// thread runs it.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  static RandomStream substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  double normal();
  double uniform();
  double uniform(double lo, double hi);
  std::size_t index(std::size_t n);
  /// Circular complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tadc

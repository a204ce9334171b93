#include "tadc/random.hpp"

#include <cmath>

namespace tadc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

RandomStream RandomStream::substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  key = splitmix64(key ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  return RandomStream(key);
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RandomStream::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::complex<double> RandomStream::complex_normal(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

}  // namespace tadc

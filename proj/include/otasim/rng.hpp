#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <utility>

namespace otasim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random source. Distributions are hand-rolled on top of the
// raw 64-bit stream, so a given seed produces the same sequence regardless
// of the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in (0, 1].
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform in (-1, 1].
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

  // Standard normal pair via Box-Muller.
  std::pair<double, double> next_gaussian_pair() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

  double next_gaussian() { return next_gaussian_pair().first; }

  // Uniform integer in [0, n). Modulo bias is ~2^-64 per draw; irrelevant
  // at the stream lengths used here.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::mt19937_64 gen_;
};

// Derives the seed for an independent substream from a master seed and a
// path of stream tags (module tag, scenario id, trial index, ...).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t t : path) h = splitmix64(h ^ splitmix64(t ^ 0xd1b54a32d192ed03ULL));
  return h;
}

inline Rng derive_rng(std::uint64_t master,
                      std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace otasim

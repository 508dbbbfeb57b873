#pragma once

// Seeded random stream with deterministic substream derivation.
//
// Every stochastic entry point in the library takes an RngStream (or a seed
// it turns into one); there is no global RNG state.  substream(i) derives an
// independently-seeded stream from the parent's seed and the index via
// splitmix64 mixing, so parallel work keyed by index reproduces bit-for-bit
// regardless of scheduling.

#include <cmath>
#include <cstdint>
#include <random>

namespace psmrwm {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    const std::seed_seq::result_type words[4] = {
        static_cast<std::seed_seq::result_type>(detail::splitmix64(s)),
        static_cast<std::seed_seq::result_type>(detail::splitmix64(s)),
        static_cast<std::seed_seq::result_type>(detail::splitmix64(s)),
        static_cast<std::seed_seq::result_type>(detail::splitmix64(s))};
    std::seed_seq seq(words, words + 4);
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }

  /// Derived stream for indexed parallel work (particles, grid cells, ...).
  RngStream substream(std::uint64_t index) const {
    std::uint64_t s = seed_ ^ (0xd1342543de82ef95ULL * (index + 1));
    detail::splitmix64(s);
    return RngStream(detail::splitmix64(s));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Marsaglia's polar method (second draw cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace psmrwm

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace polaritonkit {

// SplitMix64 step; used to derive independent stream seeds from a master
// seed so that per-row noise is order-independent.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t master_seed,
                                        std::uint64_t stream_index) {
  std::uint64_t s = master_seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (stream_index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  return splitmix64(s);
}

// Seeded sample stream. Uniform/exponential/normal are generated from raw
// 64-bit draws so the sequence depends only on the seed, not on the
// standard library's distribution internals; Poisson delegates to the
// standard distribution.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exponential waiting time for a process with the given rate (>0).
  double exponential(double rate) {
    double u = uniform();
    return -std::log1p(-u) / rate;
  }

  // Box-Muller; one value per call, the pair partner is cached.
  double normal(double mean, double sigma) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + sigma * r * std::cos(a);
  }

  long long poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long long> dist(mean);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace polaritonkit

#pragma once

#include <cmath>
#include <cstdint>

namespace gridjoin {

// Deterministic, portable PRNG: splitmix64 (Vigna, 2015). We do not use
// std::normal_distribution because the standard leaves its algorithm
// implementation-defined; seeded fixtures must reproduce bit-identically
// on every platform, so both the generator and the normal transform are
// pinned here. Do not change either without re-freezing every fixture.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Standard normal draws via Box-Muller on splitmix64. The second variate
// of each pair is cached, so a call consumes either two uniforms or none.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double sample() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform_pos();
    const double u2 = rng_.uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Scaled draw; sigma == 0 yields exact zero and consumes no state.
  double sample(double sigma) { return sigma > 0.0 ? sigma * sample() : 0.0; }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gridjoin

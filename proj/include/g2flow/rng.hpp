#pragma once

#include <cstdint>

namespace g2flow {

// Counter-based generator (splitmix64 chain). One 64-bit seed plus a
// (stream, counter) pair addresses every random coefficient, so runs are
// reproducible across platforms and independent of evaluation order.
struct Rng {
  std::uint64_t seed = 1;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t z = mix(seed ^ (0xa0761d6478bd642fULL * (stream + 1)));
    z = mix(z ^ (0xe7037ed1a0b428dbULL * (counter + 1)));
    return z;
  }

  // uniform in [0,1)
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  // uniform in [-1,1)
  double symmetric(std::uint64_t stream, std::uint64_t counter) const {
    return 2.0 * uniform(stream, counter) - 1.0;
  }
};

}  // namespace g2flow

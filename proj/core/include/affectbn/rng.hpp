#ifndef AFFECTBN_RNG_HPP
#define AFFECTBN_RNG_HPP

#include <cmath>
#include <cstdint>

namespace affectbn {

// Counter-free deterministic RNG (xoshiro256++ core, splitmix64 seeding).
// The standard library distributions are implementation-defined, which would
// break the bit-reproducibility contract, so uniform/normal/bernoulli draws
// are generated here with fixed algorithms.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = mix64(seed) ^ mix64(stream ^ 0x5bf0'3635'dcb8'9b4dULL);
    for (auto& s : state_) {
      x += 0x9e37'79b9'7f4a'7c15ULL;
      s = mix64(x);
    }
  }

  // Derives an independent stream from (seed, stream index); streams with
  // distinct indices never share state.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed, index);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the polar (Marsaglia) method; the antithetic partner
  // is discarded so every call consumes a variable but reproducible number of
  // uniforms from this stream only.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Stable 64-bit mix used for sub-seed derivation (e.g. sweep grid points).
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e37'79b9'7f4a'7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace affectbn

#endif  // AFFECTBN_RNG_HPP

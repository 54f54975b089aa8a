#pragma once

#include <cstdint>
#include <random>

namespace stereo {

// mt19937_64 with hand-rolled draws. std:: distributions are
// implementation-defined, which would break bit-reproducible training.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  bool coin() { return (gen_() & 1u) != 0; }

private:
  std::mt19937_64 gen_;
};

}  // namespace stereo

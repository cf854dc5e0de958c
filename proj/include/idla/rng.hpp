#pragma once

#include <cstdint>
#include <initializer_list>

namespace idla {

// splitmix64; used for seeding and for deriving independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stable mix of a base seed with integer ids (m, trial, particle, ...), so
// every stream is reproducible independently of execution order.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = base;
  for (std::uint64_t id : ids) {
    s ^= 0x9e3779b97f4a7c15ull + id;
    (void)splitmix64(s);
  }
  return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna), seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    dir_bits_ = 0;
    dir_left_ = 0;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in {0,1,2,3}; amortized one next() per 32 draws.
  int direction() {
    if (dir_left_ == 0) {
      dir_bits_ = next();
      dir_left_ = 32;
    }
    int d = static_cast<int>(dir_bits_ & 3);
    dir_bits_ >>= 2;
    --dir_left_;
    return d;
  }

  // Uniform in [0, n) without modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  std::uint64_t dir_bits_ = 0;
  int dir_left_ = 0;
};

}  // namespace idla

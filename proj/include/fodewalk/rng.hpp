#pragma once
// Counter-seeded PRNG streams: xoshiro256++ seeded via splitmix64 from
// (master_seed, stream_index).  Stream identity depends only on that pair,
// never on thread scheduling, so runs are reproducible for any worker count.

#include <cstdint>
#include <cmath>

namespace fodewalk {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stable 64-bit mix of (seed, index); used for stream seeding and hashing.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  return splitmix64_next(s);
}

class RngStream {
public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t sm = mix_seed(master_seed, stream_index);
    for (auto& w : s_) w = splitmix64_next(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    ++draws_;
    return result;
  }

  // Uniform on the open interval (0,1): 53-bit mantissa offset by half an ulp,
  // so 0 and 1 are unreachable and log(u), tan(pi*a*u) are always finite.
  double uniform_open01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  // Standard normal via Box-Muller on two open-interval uniforms.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open01();
    double u2 = uniform_open01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  std::uint64_t draws() const { return draws_; }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  std::uint64_t draws_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fodewalk

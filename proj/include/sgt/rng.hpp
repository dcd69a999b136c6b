#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sgt {

// Random stream determined by (seed, stream).  Streams with different ids
// are seeded independently through std::seed_seq.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x5347u};
    gen_.seed(seq);
  }

  std::uint64_t next() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1].
  double uniform_open0() { return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53; }

  // Uniform on {0,...,n-1}, n >= 1, without modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(gen_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(gen_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Number of failures before the first success, success probability 1-r.
  std::uint64_t geometric(double r) {
    if (r <= 0.0) return 0;
    double g = std::floor(std::log(uniform_open0()) / std::log(r));
    return g >= 1.8e19 ? UINT64_MAX : static_cast<std::uint64_t>(g);
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return UINT64_MAX; }
  result_type operator()() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// Stream id for replication r of grid point g in experiment stage s.
inline std::uint64_t stream_id(std::uint64_t stage, std::uint64_t grid, std::uint64_t rep) {
  return (stage << 56) ^ (grid << 40) ^ rep;
}

}  // namespace sgt

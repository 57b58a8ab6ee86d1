#pragma once

// Seedable random streams with random access by (seed, tag, index).
//
// Every random quantity in the library is drawn from a substream identified
// by the master seed, a tag naming what is drawn, and an index (row number,
// pair number, ...). Substream state is derived with SplitMix64, numbers are
// produced by xoshiro256++ and Gaussians by Boost's ziggurat sampler. The
// result depends only on (seed, tag, index), never on thread count or on the
// order in which rows are visited.

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace smt::rng {

enum class Tag : std::uint64_t {
  signal = 1,
  matrix_row = 2,
  tensor_row = 3,
  init = 4,
  thermal = 5,
  amp_init = 6,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! xoshiro256++. Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto &w : s_)
      w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
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

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

//! Key of the substream (seed, tag, index).
inline std::uint64_t stream_key(std::uint64_t seed, Tag tag,
                                std::uint64_t index = 0) {
  std::uint64_t st = seed;
  std::uint64_t k = splitmix64(st);
  st = k ^ (static_cast<std::uint64_t>(tag) * 0xd1b54a32d192ed03ULL);
  k = splitmix64(st);
  st = k ^ (index * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL);
  return splitmix64(st);
}

//! Standard-normal stream bound to one substream.
class GaussianStream {
public:
  GaussianStream(std::uint64_t seed, Tag tag, std::uint64_t index = 0)
      : engine_(stream_key(seed, tag, index)) {}

  double operator()() { return normal_(engine_); }

  template <class It> void fill(It first, It last, double scale = 1.0) {
    for (; first != last; ++first)
      *first = scale * normal_(engine_);
  }

private:
  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace smt::rng

#ifndef AVAR_PHILOX_HPP
#define AVAR_PHILOX_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace avar::montecarlo {

// Philox4x32-10 counter-based generator. Streams are disjoint by
// construction: the stream id occupies the high counter words, the running
// block index the low ones, and the seed is the key. All downstream
// distributions (uniform, normal, exponential) are generated here rather
// than through std::<random> distributions so estimates are reproducible
// bit-for-bit for a fixed (seed, stream).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream),
                 static_cast<std::uint32_t>(stream >> 32)} {}

  // The keyed bijection itself, exposed for known-answer tests.
  static Block bijection(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      std::uint64_t p0 = 0xD2511F53ull * ctr[0];
      std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
      Block next;
      next[0] = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
      next[1] = static_cast<std::uint32_t>(p1);
      next[2] = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
      next[3] = static_cast<std::uint32_t>(p0);
      ctr = next;
    }
    return ctr;
  }

  std::uint32_t next_u32() {
    if (index_ == 4) {
      block_ = bijection(counter_, key_);
      if (++counter_[0] == 0) ++counter_[1];
      index_ = 0;
    }
    return block_[index_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // 53-bit uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential(double rate) {
    return -std::log(1.0 - uniform01()) / rate;
  }

 private:
  Key key_;
  Block counter_;
  Block block_{};
  int index_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace avar::montecarlo

#endif

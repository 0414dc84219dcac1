#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace aismlmc {

/*
 * Counter-based random streams.
 *
 * Every stream is a Philox4x32-10 bijection keyed by the 64-bit run seed and
 * walked along a counter whose upper three words hold the stream identity
 * (domain, level, sample index). Two streams with different identities never
 * share a counter value, so a sample's randomness depends only on
 * (seed, domain, level, index) and not on which thread produced it or in
 * which order samples were drawn.
 */

namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline Counter philox4x32_10(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    c = round(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

}  // namespace philox

/// SplitMix64 finalizer; used to derive seeds, never to draw samples.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Purpose tag for a family of streams under one seed.
enum class StreamDomain : std::uint8_t {
  kBrownian = 0,
  kAuxiliaryBrownian = 1,
  kOracle = 2,
  kDiagnostic = 3,
};

struct StreamKey {
  StreamDomain domain = StreamDomain::kBrownian;
  std::uint32_t level = 0;  // only the low 24 bits are used
  std::uint64_t index = 0;
};

/// Deterministic substream of standard normals and uniforms.
///
/// Satisfies UniformRandomBitGenerator so it can also drive <random>
/// distributions, although the library itself only uses `normal()` and
/// `uniform()`, whose output is fixed across platforms.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, const StreamKey& key)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0u, static_cast<std::uint32_t>(key.index),
                 static_cast<std::uint32_t>(key.index >> 32),
                 (static_cast<std::uint32_t>(key.domain) << 24) | (key.level & 0xFFFFFFu)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (buffered_words_ == 0) {
      refill();
    }
    --buffered_words_;
    return words_[buffered_words_];
  }

  /// Uniform on (0, 1], 53 bits of resolution.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  /// Standard normal by the Box-Muller transform; pairs are consumed in order.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t blocks_used() const { return counter_[0]; }

 private:
  void refill() {
    const philox::Counter out = philox::philox4x32_10(counter_, key_);
    ++counter_[0];
    words_[1] = (std::uint64_t{out[0]} << 32) | out[1];
    words_[0] = (std::uint64_t{out[2]} << 32) | out[3];
    buffered_words_ = 2;
  }

  philox::Key key_;
  philox::Counter counter_;
  std::array<std::uint64_t, 2> words_{};
  int buffered_words_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace aismlmc

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace dsim {

/// Counter-based Philox4x32-10 block cipher (Salmon et al. constants).
/// Stateless: the same (key, counter) always yields the same block, so
/// Monte-Carlo streams can be split by counter/stream index and drawn in
/// parallel without coordination.
struct Philox4x32 {
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> x,
                                       std::array<uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      const uint64_t p0 = uint64_t(kMul0) * x[0];
      const uint64_t p1 = uint64_t(kMul1) * x[2];
      x = {uint32_t(p1 >> 32) ^ x[1] ^ k[0], uint32_t(p1),
           uint32_t(p0 >> 32) ^ x[3] ^ k[1], uint32_t(p0)};
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return x;
  }
};

/// One independent random stream, identified by (seed, stream).
/// Streams with distinct ids never overlap: the stream id occupies the
/// upper counter words and the block index the lowest one.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream)
      : key_{uint32_t(seed), uint32_t(seed >> 32)},
        hi_{uint32_t(stream), uint32_t(stream >> 32)} {}

  /// Uniform double in [0, 1) built from 53 random bits.
  double uniform() {
    const uint64_t bits = next64();
    return double(bits >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes a fixed number of words per
  /// pair, which keeps draw sequences reproducible across platforms.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  uint64_t next64() {
    if (word_ == 4) {
      buf_ = Philox4x32::block({ctr_lo_, 0u, hi_[0], hi_[1]}, key_);
      ++ctr_lo_;
      word_ = 0;
    }
    const uint64_t lo = buf_[word_];
    const uint64_t hiw = buf_[word_ + 1];
    word_ += 2;
    return (hiw << 32) | lo;
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> hi_;
  uint32_t ctr_lo_ = 0;
  std::array<uint32_t, 4> buf_{};
  int word_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Domain separation for the different consumers of randomness, kept in the
/// top bits of the stream id so training, evaluation, and pool scenarios
/// draw from disjoint streams even under the same seed.
enum class RngPurpose : uint64_t {
  kTraining = 1,
  kEvaluation = 2,
  kScenarioPool = 3,
  kTest = 4,
};

inline RngStream make_stream(uint64_t seed, RngPurpose purpose, uint64_t index) {
  return RngStream(seed, (uint64_t(purpose) << 48) | index);
}

}  // namespace dsim

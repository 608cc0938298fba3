#pragma once

#include <array>
#include <cstdint>

namespace lrmc {

/// Counter-based PRNG (Philox 4x32-10) with explicitly addressed streams.
///
/// Draws are bit-reproducible for a given (seed, stream) pair regardless of
/// platform or call site, and distinct streams are independent, so one
/// artifact's draws (say, the observation mask) never shift another's (the
/// outlier support) when unrelated parameters change.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double next_double();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Unbiased uniform integer on [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  void refill();

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_;
  int pos_;
  double spare_normal_;
  bool have_spare_;
};

}  // namespace lrmc

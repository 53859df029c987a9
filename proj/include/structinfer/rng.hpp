#pragma once

#include <cstdint>

namespace structinfer {

/// Counter-based pseudo-random generator.
///
/// Output i of a stream with key k is mix64(k + (i+1)*GOLDEN), where mix64
/// is the SplitMix64 finalizer. Streams with distinct keys are independent,
/// so parallel workers can draw from disjoint substreams without
/// coordination, and a (seed, stream id) pair fully determines the sequence.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key), counter_(0) {}

  static CounterRng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return CounterRng(mix64(seed ^ mix64(stream_id + 0x7F4A7C15ULL)));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform draw in the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard Gaussian by inverse-CDF transform of a uniform draw.
  /// Implemented in rng.cpp to share the quantile routine with inference.
  double gaussian();

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace structinfer

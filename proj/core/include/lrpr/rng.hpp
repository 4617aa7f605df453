#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

#include "lrpr/types.hpp"

namespace lrpr {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Folds a path of integers into a stream key, e.g. {seed, tag, column, row}.
std::uint64_t derive_key(std::initializer_list<std::uint64_t> path) noexcept;

/// Counter-based bit generator: the n-th output is mix64(key + n * golden).
/// Any (key, position) pair is reproducible without replaying earlier draws,
/// so streams keyed on (seed, k, i) can be generated in any order.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fills `out` with iid standard Gaussians. Complex entries are circularly
/// symmetric with unit total variance (real and imaginary parts variance 1/2).
template <class Scalar>
void fill_gaussian(CounterStream& stream, Scalar* out, Index count);

/// Fills `out` with iid Uniform(lo, hi) reals.
void fill_uniform(CounterStream& stream, double lo, double hi, double* out, Index count);

// Stream tags keep the different random objects of one seed apart.
namespace stream_tag {
inline constexpr std::uint64_t kSubspace = 0x5542;
inline constexpr std::uint64_t kCoefficients = 0x4243;
inline constexpr std::uint64_t kGaussianRow = 0x4152;
inline constexpr std::uint64_t kSharedRow = 0x5352;
inline constexpr std::uint64_t kCdpMask = 0x434d;
inline constexpr std::uint64_t kNoise = 0x4e4f;
inline constexpr std::uint64_t kBlockPower = 0x4250;
}  // namespace stream_tag

}  // namespace lrpr

#pragma once

// Philox4x32-10 counter-based generator. Every variate is a pure function of
// (seed, stream, index), so any slice of a stream can be regenerated
// independently and in parallel.
//
// Stream layout for element `index` of stream `stream` under `seed`:
//   counter = {lo32(index), hi32(index), lo32(stream), hi32(stream)}
//   key     = {lo32(seed), hi32(seed)}
//   bits    = out[0] | out[1] << 32
// Uniform: ((bits >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
// Normal:  inverse standard-normal CDF of that uniform (Acklam's rational
//          approximation refined by one Halley step against erfc).

#include <array>
#include <cstdint>
#include <span>

namespace dragwarp {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

double inverse_normal_cdf(double p);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t index) const;
  double uniform(std::uint64_t index) const;
  double normal(std::uint64_t index) const;

  /// out[i] = normal(i).
  void fill_normal(std::span<double> out) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Stream identifiers used by the sampler.
enum class NoiseStream : std::uint64_t {
  Forward = 1,      // shared forward-process noise
  Source = 2,
  Reference = 3,
  Target = 4,
  ToyWeights = 16,  // toy attention / predictor parameters
};

/// Per-(purpose, step) stream id: purpose in the low byte.
constexpr std::uint64_t stream_id(NoiseStream purpose, std::uint64_t step = 0) {
  return (step << 8) | static_cast<std::uint64_t>(purpose);
}

}  // namespace dragwarp

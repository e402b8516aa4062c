#pragma once

#include <array>
#include <cstdint>

namespace odentk {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Output depends only on (key, counter), so streams are reproducible across
// platforms and can be split without shared state.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(Block counter) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
};

// Sequential view over one Philox stream.
//
// Counter layout: words 0-1 hold the 64-bit block index, words 2-3 the 64-bit
// stream id. Each block yields two 53-bit uniforms (words 0|1 and 2|3 joined
// high-to-low). Normals use Box-Muller on consecutive uniform pairs:
//   z0 = sqrt(-2 ln(1 - u0)) cos(2 pi u1),  z1 = sqrt(-2 ln(1 - u0)) sin(2 pi u1).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept : gen_(seed), stream_(stream_id) {}

  // Uniform in [0, 1).
  double uniform() noexcept;
  double normal() noexcept;

  std::uint64_t blocks_consumed() const noexcept { return block_; }

 private:
  void refill() noexcept;

  Philox4x32 gen_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<double, 2> uniforms_{};
  int uniform_pos_ = 2;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Fixed stream ids, so that e.g. changing the input dimension does not
// perturb the draws of W.
namespace streams {
inline constexpr std::uint64_t params_u = 1;
inline constexpr std::uint64_t params_w = 2;
inline constexpr std::uint64_t params_v = 3;
inline constexpr std::uint64_t dataset_inputs = 16;
inline constexpr std::uint64_t dataset_labels = 17;
inline constexpr std::uint64_t dataset_teacher = 18;
inline constexpr std::uint64_t experiment = 32;
}  // namespace streams

// Derives an independent 64-bit seed from a base seed and an index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

}  // namespace odentk

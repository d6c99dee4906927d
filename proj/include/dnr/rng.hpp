#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace dnr {

/// xoshiro256** (Blackman & Vigna), state expanded from the 64-bit seed with
/// splitmix64. Doubles are built from the top 53 bits, so streams are
/// bit-identical across platforms and standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer on [0, n), n > 0 (rejection sampling, unbiased).
  std::size_t index(std::size_t n) noexcept;

  /// Sub-seed for run `run` of an experiment seeded with `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t run) noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace dnr

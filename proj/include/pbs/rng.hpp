#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace pbs {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (counter, key), so any replicate's stream can
/// be regenerated independently of which thread produced it.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// splitmix64-style hash of a seed and a list of stream identifiers.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept;

/// Sequential view over the Philox stream identified by (key, stream).
/// Block k of the stream is Philox(counter = {k, stream}, key).
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key, std::uint64_t stream = 0) noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; values are produced in pairs.
  double normal() noexcept;
  /// Uniform integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t next_u64() noexcept;

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pbs

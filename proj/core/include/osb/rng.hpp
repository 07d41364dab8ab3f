#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace osb {

/// 64-bit FNV-1a hash. Stable across platforms; used for substream ids and
/// config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// SplitMix64 finaliser applied to a seed/stream pair.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

/// xoshiro256** generator with its own integer, uniform, and normal
/// samplers. The standard <random> distributions are implementation defined,
/// so nothing here goes through them: the same seed yields the same stream on
/// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Standard normal draw (Box-Muller, no caching).
  double normal() noexcept;

  /// Independent generator for substream `stream`; does not advance *this.
  Rng split(std::uint64_t stream) const noexcept;

  template <typename T>
  void shuffle(std::vector<T>& values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order. Requires k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
};

}  // namespace osb

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace otmatch {

__extension__ using uint128 = unsigned __int128;

// SplitMix64 finalizer. Used both as the stream mixer and to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for stream `index` under `seed`. Order-independent, so replicate b
// draws the same numbers whether replicates run serially or in parallel.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based generator: the n-th output of stream `key` is mix64(key + n * golden).
///
/// The stream is a pure function of (key, counter), which makes it trivial to
/// reproduce in any language:
///   x_n = splitmix64_finalize(key + (n + 1) * 0x9e3779b97f4a7c15)
/// Uniforms take the top 53 bits, offset by half an ulp so they lie in (0, 1).
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    // mix64 adds the golden gamma itself, so key + n*gamma walks the SplitMix64 sequence.
    const std::uint64_t out = mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    ++counter_;
    return out;
  }

  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller, both variates used.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n). Lemire's multiply-shift; the bias is < n / 2^64.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<uint128>((*this)()) * n) >> 64);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace otmatch

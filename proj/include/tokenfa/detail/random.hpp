#ifndef TOKENFA_DETAIL_RANDOM_HPP
#define TOKENFA_DETAIL_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>

namespace tokenfa::detail {

/// mt19937_64 with hand-written uniform draws.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n). Requires n > 0.
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

private:
  std::mt19937_64 engine_;
};

} // namespace tokenfa::detail

#endif

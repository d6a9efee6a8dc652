#pragma once

// Deterministic random streams. Every random choice in the library flows
// from one caller-supplied seed, and bounded sampling uses a multiply-shift
// reduction instead of std distributions, whose output is
// implementation-defined.

#include <cstdint>
#include <random>

namespace dipps {

class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dipps

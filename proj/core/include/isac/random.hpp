#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace isac {

using Rng = std::mt19937_64;

/// Stream identifiers for per-module random streams. A stream seed is a pure
/// function of (master seed, stream, trial index), so every trial can be
/// reproduced on its own regardless of how many trials ran before it.
enum class Stream : std::uint64_t {
  kTrajectory = 1,
  kScatterPhase = 2,
  kFrames = 3,
  kReductionPlan = 4,
  kNoise = 5,
  kWarmup = 6,
  kCfarCalibration = 7,
  kTest = 99,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t trial);

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t trial = 0) {
  return Rng(derive_seed(master, stream, trial));
}

}  // namespace isac

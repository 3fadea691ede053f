#pragma once

#include <cstdint>

#include "isac/config.hpp"
#include "isac/detector.hpp"

namespace isac {

/// Reduced instance for brute-force comparisons: N_a = 16, N_rf = 2, B = 2,
/// N = 2, M = 8 and an 8 x 8 x 9 grid. The cyclic prefix is widened to one
/// symbol so all eight delay bins are admissible.
SystemConfig small_instance_config();
GridSpec small_instance_grid();

struct OracleComparison {
  double max_relative = 0.0;  // max over cells of |fast - oracle| / oracle
  double max_absolute = 0.0;
  double peak = 0.0;          // largest oracle statistic
  std::size_t cells = 0;
};

/// Draws a random epoch (two paths plus noise, random frames and plan) and
/// compares the fast map with the oracle at every cell, both for the
/// statistic and the amplitude.
OracleComparison compare_fast_to_oracle(std::uint64_t seed);

}  // namespace isac

#pragma once

#include <cstdint>
#include <vector>

#include "clothdiff/vec3.hpp"

namespace clothdiff {

// Farthest point sampling: greedy max-min subset selection. The first index
// is drawn uniformly from the seeded RNG; every later pick maximizes the
// distance to the already-selected set, ties broken by lowest index.
std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int n, uint64_t seed);

// Same greedy walk, but with the first index fixed by the caller.
std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int n, int first_index);

}  // namespace clothdiff

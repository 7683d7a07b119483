#pragma once

#include <vector>

#include "clothdiff/mesh.hpp"

namespace clothdiff {

// Mean squared vertex error with known correspondence:
//   (1/Nv) * sum_i ||a_i - b_i||^2
// Requires identical vertex counts.
double mse(const ClothMesh& a, const ClothMesh& b);
double mse(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Bidirectional chamfer distance with squared nearest-neighbor distances:
//   (1/|a|) sum_x min_y ||x-y||^2 + (1/|b|) sum_y min_x ||x-y||^2
double chamfer(const PointCloud& a, const PointCloud& b);
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Earth mover's distance under an optimal one-to-one matching:
//   (1/|a|) * min_pi sum_i ||a_i - b_pi(i)||
// Solved exactly with the Hungarian algorithm. Sets larger than
// `max_exact` points are first downsampled to that size with FPS.
double emd(const PointCloud& a, const PointCloud& b, int max_exact = 512);
double emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int max_exact = 512);

// Exact minimum-cost assignment on a square cost matrix (row-major n*n).
// Returns the per-row column assignment.
std::vector<int> hungarian(const std::vector<double>& cost, int n);

}  // namespace clothdiff

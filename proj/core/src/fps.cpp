#include "clothdiff/fps.hpp"

#include <limits>
#include <string>

#include "clothdiff/error.hpp"
#include "clothdiff/rng.hpp"

namespace clothdiff {

std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int n, int first_index) {
  const int m = static_cast<int>(points.size());
  if (n > m) throw DomainError("fps: n=" + std::to_string(n) + " exceeds point count " + std::to_string(m));
  if (n < 1) throw DomainError("fps: n must be >= 1");

  std::vector<int> selected;
  selected.reserve(n);
  std::vector<double> min_d2(m, std::numeric_limits<double>::infinity());

  int cur = first_index;
  selected.push_back(cur);
  min_d2[cur] = -1.0;  // sentinel: never re-selected
  for (int k = 1; k < n; ++k) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < m; ++i) {
      const double d2 = norm2(points[i] - points[cur]);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      // strict > keeps the lowest index on ties
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    cur = best;
    selected.push_back(cur);
    min_d2[cur] = -1.0;  // never re-selected
  }
  return selected;
}

std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int n, uint64_t seed) {
  if (points.empty()) throw DomainError("fps: empty point set");
  Rng rng(seed);
  return farthest_point_sample_from(points, n, static_cast<int>(rng.index(points.size())));
}

}  // namespace clothdiff

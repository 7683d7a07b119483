#include "clothdiff/metrics.hpp"

#include <limits>
#include <string>

#include "clothdiff/error.hpp"
#include "clothdiff/fps.hpp"

namespace clothdiff {

double mse(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size())
    throw DomainError("mse: vertex count mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw DomainError("mse: empty vertex set");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += norm2(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double mse(const ClothMesh& a, const ClothMesh& b) { return mse(a.vertices, b.vertices); }

namespace {

double directed_mean_sq_nn(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  double acc = 0.0;
  for (const Vec3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) {
      const double d2 = norm2(p - q);
      if (d2 < best) best = d2;
    }
    acc += best;
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw DomainError("chamfer: empty point set");
  return directed_mean_sq_nn(a, b) + directed_mean_sq_nn(b, a);
}

double chamfer(const PointCloud& a, const PointCloud& b) { return chamfer(a.points, b.points); }

std::vector<int> hungarian(const std::vector<double>& cost, int n) {
  // Potential-based O(n^3) assignment, 1-indexed internals.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) match[p[j] - 1] = j - 1;
  }
  return match;
}

namespace {

std::vector<Vec3> fps_downsample(const std::vector<Vec3>& pts, int n) {
  const std::vector<int> idx = farthest_point_sample_from(pts, n, 0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i : idx) out.push_back(pts[i]);
  return out;
}

}  // namespace

double emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int max_exact) {
  if (a.empty() || b.empty()) throw DomainError("emd: empty point set");
  const int target = std::min({static_cast<int>(a.size()), static_cast<int>(b.size()), max_exact});
  const std::vector<Vec3> aa = (static_cast<int>(a.size()) == target) ? a : fps_downsample(a, target);
  const std::vector<Vec3> bb = (static_cast<int>(b.size()) == target) ? b : fps_downsample(b, target);
  if (aa.size() != bb.size()) throw DomainError("emd: sizes unequal after resampling");

  const int n = target;
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = norm(aa[i] - bb[j]);
  const std::vector<int> match = hungarian(cost, n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += cost[static_cast<std::size_t>(i) * n + match[i]];
  return acc / static_cast<double>(n);
}

double emd(const PointCloud& a, const PointCloud& b, int max_exact) { return emd(a.points, b.points, max_exact); }

}  // namespace clothdiff

#include "clothdiff/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clothdiff/error.hpp"
#include "clothdiff/fps.hpp"

namespace clothdiff {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void CameraPose::validate() const {
  if (position == look_at) throw ConfigError("camera: position equals look_at");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("camera: fov must be in (0, 180)");
}

bool segment_hits_triangle(const Vec3& a, const Vec3& b, const Vec3& t0, const Vec3& t1, const Vec3& t2,
                           double eps) {
  const Vec3 dir = b - a;
  const Vec3 e1 = t1 - t0;
  const Vec3 e2 = t2 - t0;
  const Vec3 pvec = cross(dir, e2);
  const double det = dot(e1, pvec);
  if (std::abs(det) < 1e-14) return false;  // parallel
  const double inv_det = 1.0 / det;
  const Vec3 tvec = a - t0;
  const double u = dot(tvec, pvec) * inv_det;
  if (u < -eps || u > 1.0 + eps) return false;
  const Vec3 qvec = cross(tvec, e1);
  const double v = dot(dir, qvec) * inv_det;
  if (v < -eps || u + v > 1.0 + eps) return false;
  const double t = dot(e2, qvec) * inv_det;
  return t > eps && t < 1.0 - eps;
}

PointCloud render_partial_cloud(const ClothMesh& mesh, const std::vector<CameraPose>& cameras,
                                int samples_per_face, Rng& rng) {
  if (cameras.empty()) throw DomainError("render_partial_cloud: need at least one camera");
  if (mesh.faces.empty()) throw DomainError("render_partial_cloud: mesh has no faces");
  for (const CameraPose& cam : cameras) cam.validate();

  // surface samples via uniform barycentric coordinates
  std::vector<Vec3> samples;
  samples.reserve(mesh.faces.size() * samples_per_face);
  for (const auto& f : mesh.faces) {
    for (int s = 0; s < samples_per_face; ++s) {
      double u = rng.uniform();
      double v = rng.uniform();
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      samples.push_back(mesh.vertices[f[0]] + u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                        v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]));
    }
  }

  PointCloud out;
  const double seg_eps = 1e-6;
  for (const Vec3& p : samples) {
    bool visible = false;
    for (const CameraPose& cam : cameras) {
      const Vec3 view = normalized(cam.look_at - cam.position);
      const Vec3 to_p = p - cam.position;
      const double cos_half_fov = std::cos(0.5 * cam.fov_deg * kPi / 180.0);
      if (dot(normalized(to_p), view) < cos_half_fov) continue;
      // pull the endpoint toward the camera to skip the sample's own face
      const Vec3 end = p - seg_eps * normalized(to_p) * std::max(1.0, norm(to_p));
      bool occluded = false;
      for (const auto& f : mesh.faces) {
        if (segment_hits_triangle(cam.position, end, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                  mesh.vertices[f[2]])) {
          occluded = true;
          break;
        }
      }
      if (!occluded) {
        visible = true;
        break;
      }
    }
    if (visible) out.points.push_back(p);
  }
  if (out.points.empty()) throw DomainError("render_partial_cloud: no visible points from the given poses");
  return out;
}

PointCloud augment(const PointCloud& cloud, const AugmentParams& params, Rng& rng) {
  if (cloud.points.empty()) throw DomainError("augment: empty cloud");

  // rigid part: rotation about the centroid plus translation
  const double angle = rng.uniform(-params.rot_range_deg, params.rot_range_deg) * kPi / 180.0;
  const Vec3 axis = rng.unit_vector();
  const Vec3 t{rng.uniform(-params.trans_range_m, params.trans_range_m),
               rng.uniform(-params.trans_range_m, params.trans_range_m),
               rng.uniform(-params.trans_range_m, params.trans_range_m)};
  const Vec3 c = centroid(cloud.points);
  const double ca = std::cos(angle), sa = std::sin(angle);

  std::vector<Vec3> pts;
  pts.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) {
    if (angle == 0.0) {
      pts.push_back(p + t);
      continue;
    }
    const Vec3 r = p - c;
    // Rodrigues rotation
    const Vec3 rotated = r * ca + cross(axis, r) * sa + axis * (dot(axis, r) * (1.0 - ca));
    pts.push_back(rotated + c + t);
  }

  // dropout
  const double drop = rng.uniform(params.dropout_lo, params.dropout_hi);
  const int keep = static_cast<int>(std::llround(static_cast<double>(pts.size()) * (1.0 - drop)));
  std::vector<int> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  order.resize(std::max(1, keep));
  std::sort(order.begin(), order.end());

  PointCloud out;
  out.points.reserve(order.size());
  for (int idx : order) {
    Vec3 p = pts[idx];
    if (params.noise_sigma > 0.0)
      p += Vec3{rng.normal(0.0, params.noise_sigma), rng.normal(0.0, params.noise_sigma),
                rng.normal(0.0, params.noise_sigma)};
    out.points.push_back(p);
  }
  return out;
}

PatchSet tokenize_cloud(const PointCloud& cloud, int n_groups, int group_size, double radius, Rng& rng) {
  const int m = cloud.size();
  if (n_groups > m) throw DomainError("tokenize_cloud: n_groups exceeds cloud size");
  if (n_groups < 1 || group_size < 1) throw DomainError("tokenize_cloud: counts must be >= 1");

  PatchSet ps;
  ps.center_indices = farthest_point_sample(cloud.points, n_groups, rng.next_u64());
  ps.centers.reserve(n_groups);
  for (int ci : ps.center_indices) ps.centers.push_back(cloud.points[ci]);

  // nearest-center assignment (lowest index on ties)
  ps.assignment.resize(m);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int cidx = 0; cidx < n_groups; ++cidx) {
      const double d2 = norm2(cloud.points[i] - ps.centers[cidx]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = cidx;
      }
    }
    ps.assignment[i] = best;
  }

  // KNN groups, clipped to the radius, padded by repeating the nearest point
  const double r2 = radius * radius;
  ps.groups.resize(n_groups);
  std::vector<std::pair<double, int>> dists(m);
  for (int cidx = 0; cidx < n_groups; ++cidx) {
    const Vec3& c = ps.centers[cidx];
    for (int i = 0; i < m; ++i) dists[i] = {norm2(cloud.points[i] - c), i};
    std::sort(dists.begin(), dists.end());
    std::vector<int>& g = ps.groups[cidx];
    g.reserve(group_size);
    for (int i = 0; i < m && static_cast<int>(g.size()) < group_size; ++i) {
      if (dists[i].first <= r2) g.push_back(dists[i].second);
    }
    if (g.empty()) g.push_back(ps.center_indices[cidx]);
    while (static_cast<int>(g.size()) < group_size) g.push_back(g.front());
  }
  return ps;
}

PatchSet tokenize_mesh(const ClothMesh& mesh_canonical, int n_patches, uint64_t seed) {
  const int nv = mesh_canonical.num_vertices();
  if (n_patches > nv) throw DomainError("tokenize_mesh: n_patches exceeds vertex count");

  PatchSet ps;
  ps.center_indices = farthest_point_sample(mesh_canonical.vertices, n_patches, seed);
  ps.centers.reserve(n_patches);
  for (int ci : ps.center_indices) ps.centers.push_back(mesh_canonical.vertices[ci]);

  ps.assignment.resize(nv);
  ps.groups.resize(n_patches);
  for (int i = 0; i < nv; ++i) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int cidx = 0; cidx < n_patches; ++cidx) {
      const double d2 = norm2(mesh_canonical.vertices[i] - ps.centers[cidx]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = cidx;
      }
    }
    ps.assignment[i] = best;
    ps.groups[best].push_back(i);
  }
  return ps;
}

DecodeWeights interpolate_decode_weights(const ClothMesh& mesh_canonical, const PatchSet& patches, int k,
                                         double epsilon) {
  const int nv = mesh_canonical.num_vertices();
  const int nc = static_cast<int>(patches.centers.size());
  const int kk = std::min(k, nc);

  DecodeWeights dw;
  dw.k = kk;
  dw.center_ids.resize(nv);
  dw.weights.resize(nv);
  std::vector<std::pair<double, int>> dists(nc);
  for (int i = 0; i < nv; ++i) {
    for (int cidx = 0; cidx < nc; ++cidx)
      dists[cidx] = {norm(mesh_canonical.vertices[i] - patches.centers[cidx]), cidx};
    std::partial_sort(dists.begin(), dists.begin() + kk, dists.end());
    double total = 0.0;
    dw.center_ids[i].resize(kk);
    dw.weights[i].resize(kk);
    for (int j = 0; j < kk; ++j) {
      dw.center_ids[i][j] = dists[j].second;
      dw.weights[i][j] = 1.0 / (dists[j].first + epsilon);
      total += dw.weights[i][j];
    }
    for (int j = 0; j < kk; ++j) dw.weights[i][j] /= total;
  }
  return dw;
}

}  // namespace clothdiff

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/error.hpp"
#include "clothdiff/observation.hpp"

using namespace clothdiff;

namespace {

ClothMesh flat_cloth() { return make_grid_cloth(6, 6, 0.05); }

// two parallel layers with a small gap: a folded cloth stand-in
ClothMesh two_layer_mesh() {
  ClothMesh top = make_grid_cloth(4, 4, 0.05);
  ClothMesh mesh = top;
  const int nv = top.num_vertices();
  for (auto& v : mesh.vertices) v.z = 0.0;
  for (const auto& v : top.vertices) mesh.vertices.push_back({v.x, v.y, 0.01});
  for (const auto& f : top.faces) mesh.faces.push_back({f[0] + nv, f[1] + nv, f[2] + nv});
  mesh.edges.clear();
  std::set<std::pair<int, int>> seen;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      const auto e = std::minmax(f[k], f[(k + 1) % 3]);
      if (seen.insert(e).second) mesh.edges.push_back({e.first, e.second, EdgeKind::Structural});
    }
  return mesh;
}

CameraPose top_camera(const ClothMesh& mesh, double height = 0.5) {
  CameraPose cam;
  cam.position = centroid(mesh.vertices) + Vec3{0, 0, height};
  cam.look_at = centroid(mesh.vertices);
  cam.fov_deg = 90.0;
  return cam;
}

double dist_to_mesh(const Vec3& p, const ClothMesh& mesh) {
  // crude: min distance to any face plane point sample; exact enough since
  // the render samples lie exactly on faces
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 n = normalized(cross(b - a, c - a));
    best = std::min(best, std::abs(dot(p - a, n)));
  }
  return best;
}

}  // namespace

TEST_CASE("single overhead camera sees every sample of a flat cloth") {
  const ClothMesh mesh = flat_cloth();
  Rng rng(1);
  const int spf = 3;
  const PointCloud cloud = render_partial_cloud(mesh, {top_camera(mesh)}, spf, rng);
  CHECK(cloud.size() == static_cast<int>(mesh.faces.size()) * spf);
}

TEST_CASE("bottom layer is occluded from a top camera") {
  const ClothMesh mesh = two_layer_mesh();
  Rng rng(2);
  const int spf = 4;
  const PointCloud cloud = render_partial_cloud(mesh, {top_camera(mesh)}, spf, rng);
  const double fraction =
      static_cast<double>(cloud.size()) / (static_cast<double>(mesh.faces.size()) * spf);
  CHECK(fraction < 0.6);
  CHECK(fraction > 0.3);
}

TEST_CASE("multi-camera union sees more than any single view of a fold") {
  const ClothMesh mesh = two_layer_mesh();
  const Vec3 c = centroid(mesh.vertices);
  std::vector<CameraPose> rig;
  for (int i = 0; i < 4; ++i) {
    const double az = 1.5707963267948966 * i;
    CameraPose cam;
    // alternate above/below the layers so no single pose covers both
    cam.position = c + Vec3{0.4 * std::cos(az), 0.4 * std::sin(az), i % 2 ? 0.3 : -0.3};
    cam.look_at = c;
    cam.fov_deg = 80.0;
    rig.push_back(cam);
  }
  int best_single = 0;
  for (const auto& cam : rig) {
    Rng rng(3);
    best_single = std::max(best_single, render_partial_cloud(mesh, {cam}, 3, rng).size());
  }
  Rng rng(3);
  const int fused = render_partial_cloud(mesh, rig, 3, rng).size();
  CHECK(fused > best_single);
}

TEST_CASE("rendered points lie on the mesh surface") {
  const ClothMesh mesh = two_layer_mesh();
  Rng rng(4);
  const PointCloud cloud = render_partial_cloud(mesh, {top_camera(mesh)}, 3, rng);
  for (const auto& p : cloud.points) CHECK(dist_to_mesh(p, mesh) < 1e-6);
}

TEST_CASE("render input validation") {
  const ClothMesh mesh = flat_cloth();
  Rng rng(5);
  CHECK_THROWS_AS(render_partial_cloud(mesh, {}, 3, rng), DomainError);
  CameraPose bad = top_camera(mesh);
  bad.fov_deg = 200.0;
  CHECK_THROWS_AS(render_partial_cloud(mesh, {bad}, 3, rng), ConfigError);
}

TEST_CASE("augment identity with zero ranges") {
  Rng data_rng(6);
  PointCloud cloud;
  for (int i = 0; i < 40; ++i)
    cloud.points.push_back({data_rng.normal(), data_rng.normal(), data_rng.normal()});
  AugmentParams zero;
  zero.rot_range_deg = 0.0;
  zero.trans_range_m = 0.0;
  zero.dropout_lo = zero.dropout_hi = 0.0;
  zero.noise_sigma = 0.0;
  Rng rng(7);
  const PointCloud out = augment(cloud, zero, rng);
  REQUIRE(out.size() == cloud.size());
  for (int i = 0; i < out.size(); ++i) CHECK(out.points[i] == cloud.points[i]);
}

TEST_CASE("augment dropout arithmetic") {
  PointCloud cloud;
  for (int i = 0; i < 100; ++i) cloud.points.push_back({static_cast<double>(i), 0, 0});
  AugmentParams p;
  p.rot_range_deg = 0.0;
  p.trans_range_m = 0.0;
  p.dropout_lo = p.dropout_hi = 0.5;
  p.noise_sigma = 0.0;
  Rng rng(8);
  CHECK(augment(cloud, p, rng).size() == 50);
}

TEST_CASE("augment rotation bound and rigidity") {
  Rng data_rng(9);
  PointCloud cloud;
  for (int i = 0; i < 60; ++i)
    cloud.points.push_back({data_rng.normal(0, 0.2), data_rng.normal(0, 0.2), data_rng.normal(0, 0.2)});
  AugmentParams p;
  p.rot_range_deg = 1.5;
  p.trans_range_m = 0.0;
  p.dropout_lo = p.dropout_hi = 0.0;
  p.noise_sigma = 0.0;
  const Vec3 c = centroid(cloud.points);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const PointCloud out = augment(cloud, p, rng);
    REQUIRE(out.size() == cloud.size());
    for (int i = 0; i < out.size(); ++i) {
      const Vec3 r0 = cloud.points[i] - c;
      const Vec3 r1 = out.points[i] - c;
      if (norm(r0) < 1e-9) continue;
      const double cosang = std::clamp(dot(r0, r1) / (norm(r0) * norm(r1)), -1.0, 1.0);
      CHECK(std::acos(cosang) <= 1.5 * 3.14159265358979323846 / 180.0 + 1e-9);
    }
    // rigid: pairwise distances preserved
    for (int i = 1; i < 10; ++i) {
      const double before = norm(cloud.points[i] - cloud.points[0]);
      const double after = norm(out.points[i] - out.points[0]);
      CHECK(std::abs(before - after) < 1e-9);
    }
  }
}

TEST_CASE("tokenize_cloud group structure and knn oracle") {
  Rng data_rng(10);
  PointCloud cloud;
  for (int i = 0; i < 80; ++i)
    cloud.points.push_back({data_rng.normal(0, 0.2), data_rng.normal(0, 0.2), data_rng.normal(0, 0.2)});
  Rng rng(11);
  const int n_groups = 12, group_size = 8;
  const double radius = 0.4;
  const PatchSet ps = tokenize_cloud(cloud, n_groups, group_size, radius, rng);
  REQUIRE(static_cast<int>(ps.groups.size()) == n_groups);

  for (int g = 0; g < n_groups; ++g) {
    REQUIRE(static_cast<int>(ps.groups[g].size()) == group_size);
    // oracle: brute-force KNN among in-radius points
    std::vector<std::pair<double, int>> dists;
    for (int i = 0; i < cloud.size(); ++i) {
      const double d2 = norm2(cloud.points[i] - ps.centers[g]);
      if (d2 <= radius * radius) dists.push_back({d2, i});
    }
    std::sort(dists.begin(), dists.end());
    const int expect = std::min<int>(group_size, static_cast<int>(dists.size()));
    for (int k = 0; k < expect; ++k) CHECK(ps.groups[g][k] == dists[k].second);
    for (int k = expect; k < group_size; ++k) CHECK(ps.groups[g][k] == ps.groups[g][0]);
  }
}

TEST_CASE("tokenize_cloud centers split well-separated clusters") {
  PointCloud cloud;
  Rng data_rng(12);
  for (int i = 0; i < 30; ++i)
    cloud.points.push_back({data_rng.normal(0, 0.01), data_rng.normal(0, 0.01), 0});
  for (int i = 0; i < 30; ++i)
    cloud.points.push_back({5 + data_rng.normal(0, 0.01), data_rng.normal(0, 0.01), 0});
  Rng rng(13);
  const PatchSet ps = tokenize_cloud(cloud, 2, 4, 1.0, rng);
  const bool split = (ps.centers[0].x < 1.0) != (ps.centers[1].x < 1.0);
  CHECK(split);
}

TEST_CASE("tokenize_mesh voronoi assignment oracle and canonical invariance") {
  const ClothMesh mesh = make_grid_cloth(6, 6, 0.05);
  const PatchSet ps = tokenize_mesh(mesh, 8, 21);
  // exact nearest-center with low-index ties
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ps.centers.size(); ++c) {
      const double d2 = norm2(mesh.vertices[v] - ps.centers[c]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(c);
      }
    }
    CHECK(ps.assignment[v] == best);
  }
  // groups partition the vertex set
  std::vector<int> seen(mesh.num_vertices(), 0);
  for (const auto& g : ps.groups)
    for (int v : g) seen[v] += 1;
  for (int v : seen) CHECK(v == 1);

  // same seed, deformed state: identical partition (canonical-space only)
  const PatchSet ps2 = tokenize_mesh(mesh, 8, 21);
  CHECK(ps.assignment == ps2.assignment);

  // singleton patches when n == Nv
  const PatchSet singles = tokenize_mesh(mesh, mesh.num_vertices(), 3);
  for (const auto& g : singles.groups) CHECK(g.size() == 1);
}

TEST_CASE("decode weights: one-hot at centers, normalized everywhere") {
  const ClothMesh mesh = make_grid_cloth(5, 5, 0.07);
  const PatchSet ps = tokenize_mesh(mesh, 6, 2);
  const DecodeWeights dw = interpolate_decode_weights(mesh, ps, 3);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    double total = 0.0;
    for (double w : dw.weights[v]) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int c = 0; c < static_cast<int>(ps.centers.size()); ++c) {
    const int v = ps.center_indices[c];
    // vertex coincides with its center: weight collapses onto it
    double w_self = 0.0;
    for (int j = 0; j < dw.k; ++j)
      if (dw.center_ids[v][j] == c) w_self = dw.weights[v][j];
    CHECK(w_self > 1.0 - 1e-6);
  }
}

TEST_CASE("decode weights equidistant symmetry") {
  // triangle of centers and a vertex at the centroid
  ClothMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0},
                   {0.5, 1.0 / (2.0 * std::sqrt(3.0)), 0}};  // circumcenter
  PatchSet ps;
  ps.centers = {mesh.vertices[0], mesh.vertices[1], mesh.vertices[2]};
  ps.center_indices = {0, 1, 2};
  const DecodeWeights dw = interpolate_decode_weights(mesh, ps, 3);
  CHECK(dw.weights[3][0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(dw.weights[3][1] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(dw.weights[3][2] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

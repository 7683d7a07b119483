#pragma once

#include <cstdint>
#include <vector>

#include "clothdiff/mesh.hpp"
#include "clothdiff/rng.hpp"

namespace clothdiff {

struct CameraPose {
  Vec3 position;
  Vec3 look_at;
  double fov_deg{90.0};
  int width{640}, height{480};

  void validate() const;
};

struct AugmentParams {
  double rot_range_deg = 1.5;    // +/- rotation about the cloud centroid
  double trans_range_m = 0.005;  // +/- per-axis translation
  double dropout_lo = 0.1;
  double dropout_hi = 0.2;
  double noise_sigma = 0.001;    // Gaussian jitter, m
};

// Patch decomposition of a point set: FPS centers plus per-point
// nearest-center assignment (ties to the lowest center index).
struct PatchSet {
  std::vector<Vec3> centers;
  std::vector<int> center_indices;        // indices into the source points
  std::vector<int> assignment;            // per source point: center slot
  std::vector<std::vector<int>> groups;   // per center: member point indices
};

// Surface points sampled on faces, kept iff visible from at least one
// camera (segment from camera to the point hits no nearer triangle and the
// point lies inside the camera's field-of-view cone).
PointCloud render_partial_cloud(const ClothMesh& mesh, const std::vector<CameraPose>& cameras,
                                int samples_per_face, Rng& rng);

// Rigid SO(3)+translation perturbation about the centroid, then random
// dropout, then Gaussian jitter.
PointCloud augment(const PointCloud& cloud, const AugmentParams& params, Rng& rng);

// FPS centers + KNN grouping with a radius cap; groups have exactly
// group_size members, padded by repeating the nearest in-radius point.
PatchSet tokenize_cloud(const PointCloud& cloud, int n_groups, int group_size, double radius, Rng& rng);

// FPS centers on the canonical vertices and Voronoi assignment of every
// vertex; the partition depends only on canonical coordinates, so it is
// shared by all deformed states of the cloth.
PatchSet tokenize_mesh(const ClothMesh& mesh_canonical, int n_patches, uint64_t seed);

// Inverse-distance weights over the k nearest patch centers in canonical
// space, normalized to sum to one per vertex.
struct DecodeWeights {
  int k{3};
  std::vector<std::vector<int>> center_ids;   // per vertex: k center slots
  std::vector<std::vector<double>> weights;   // per vertex: k weights
};

DecodeWeights interpolate_decode_weights(const ClothMesh& mesh_canonical, const PatchSet& patches, int k = 3,
                                         double epsilon = 1e-8);

// Möller-Trumbore segment/triangle test helper, exposed for tests.
bool segment_hits_triangle(const Vec3& a, const Vec3& b, const Vec3& t0, const Vec3& t1, const Vec3& t2,
                           double eps = 1e-9);

}  // namespace clothdiff

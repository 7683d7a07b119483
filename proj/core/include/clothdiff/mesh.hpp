#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "clothdiff/vec3.hpp"

namespace clothdiff {

enum class EdgeKind : uint8_t { Structural = 0, Shear = 1, Bend = 2 };

struct Edge {
  int a{0}, b{0};        // vertex indices, a < b
  EdgeKind kind{EdgeKind::Structural};
};

// Cloth state: vertex positions plus fixed connectivity. Connectivity is
// shared by every deformed state of one cloth instance; only `vertices`
// changes over time.
struct ClothMesh {
  std::vector<Vec3> vertices;
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> faces;

  int num_vertices() const { return static_cast<int>(vertices.size()); }

  // Index/duplicate/symmetry checks on the connectivity. Throws DomainError.
  void validate() const;

  // Same edge and face lists, element-wise.
  bool same_connectivity(const ClothMesh& other) const;
};

struct PointCloud {
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
};

Vec3 centroid(const std::vector<Vec3>& pts);

// Length of the bounding-box diagonal; scene scale for normalization.
double bbox_diagonal(const std::vector<Vec3>& pts);

}  // namespace clothdiff

#include "clothdiff/mesh.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "clothdiff/error.hpp"

namespace clothdiff {

void ClothMesh::validate() const {
  const int nv = num_vertices();
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    if (e.a < 0 || e.b < 0 || e.a >= nv || e.b >= nv)
      throw DomainError("edge index out of range: (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    if (e.a == e.b) throw DomainError("degenerate edge at vertex " + std::to_string(e.a));
    const auto key = std::minmax(e.a, e.b);
    if (!seen.insert(key).second)
      throw DomainError("duplicate undirected edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
  }
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv) throw DomainError("face index out of range: " + std::to_string(idx));
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw DomainError("degenerate face");
  }
}

bool ClothMesh::same_connectivity(const ClothMesh& other) const {
  if (vertices.size() != other.vertices.size()) return false;
  if (edges.size() != other.edges.size() || faces.size() != other.faces.size()) return false;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].a != other.edges[i].a || edges[i].b != other.edges[i].b) return false;
  }
  return faces == other.faces;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c{};
  for (const Vec3& p : pts) c += p;
  return pts.empty() ? c : c / static_cast<double>(pts.size());
}

double bbox_diagonal(const std::vector<Vec3>& pts) {
  if (pts.empty()) return 0.0;
  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& p : pts) {
    lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
  }
  return norm(hi - lo);
}

}  // namespace clothdiff

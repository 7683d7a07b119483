#include "clothdiff/obj_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "clothdiff/error.hpp"

namespace clothdiff {

ClothMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open OBJ file: " + path);
  ClothMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z))
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed vertex line");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      std::string tok;
      int count = 0;
      while (ss >> tok) {
        if (count >= 3)
          throw ConfigError(path + ":" + std::to_string(line_no) + ": non-triangle face");
        // accept "i", "i/..", "i//.." forms, keep the vertex index only
        f[count++] = std::stoi(tok.substr(0, tok.find('/')));
      }
      if (count != 3) throw ConfigError(path + ":" + std::to_string(line_no) + ": non-triangle face");
      for (int& idx : f) idx -= 1;  // OBJ is 1-based
      mesh.faces.push_back(f);
    }
    // other tags ignored
  }
  std::set<std::pair<int, int>> edge_set;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto e = std::minmax(f[k], f[(k + 1) % 3]);
      edge_set.insert(e);
    }
  }
  for (const auto& [a, b] : edge_set) mesh.edges.push_back({a, b, EdgeKind::Structural});
  mesh.validate();
  return mesh;
}

void save_obj(const ClothMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write OBJ file: " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace clothdiff

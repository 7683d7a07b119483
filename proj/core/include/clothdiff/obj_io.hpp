#pragma once

#include <string>

#include "clothdiff/mesh.hpp"

namespace clothdiff {

// Minimal OBJ subset: `v x y z` and triangle-only `f i j k` lines
// (1-based indices, no texture/normal slots). Everything else is ignored
// on read. The edge list of a loaded mesh is the set of unique face edges,
// tagged Structural.
ClothMesh load_obj(const std::string& path);
void save_obj(const ClothMesh& mesh, const std::string& path);

}  // namespace clothdiff

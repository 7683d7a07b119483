#include "clothdiff/cloth_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clothdiff/error.hpp"

namespace clothdiff {

void SimParams::validate() const {
  if (stretch_stiffness < 0 || shear_stiffness < 0 || bend_stiffness < 0)
    throw ConfigError("sim params: stiffness must be >= 0");
  if (dt <= 0) throw ConfigError("sim params: dt must be > 0");
  if (substeps < 1) throw ConfigError("sim params: substeps must be >= 1");
  if (settle_substeps < 0) throw ConfigError("sim params: settle_substeps must be >= 0");
  if (density <= 0 || thickness <= 0) throw ConfigError("sim params: density and thickness must be > 0");
}

ClothMesh make_grid_cloth(int rows, int cols, double spacing) {
  if (rows < 2 || cols < 2) throw DomainError("grid cloth needs rows, cols >= 2");
  if (spacing <= 0) throw DomainError("grid cloth needs spacing > 0");

  ClothMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      mesh.vertices.push_back({c * spacing, r * spacing, 0.0});

  const auto vid = [cols](int r, int c) { return r * cols + c; };

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) mesh.edges.push_back({vid(r, c), vid(r, c + 1), EdgeKind::Structural});
      if (r + 1 < rows) mesh.edges.push_back({vid(r, c), vid(r + 1, c), EdgeKind::Structural});
      if (r + 1 < rows && c + 1 < cols) {
        mesh.edges.push_back({vid(r, c), vid(r + 1, c + 1), EdgeKind::Shear});
        mesh.edges.push_back({vid(r, c + 1), vid(r + 1, c), EdgeKind::Shear});
      }
      if (c + 2 < cols) mesh.edges.push_back({vid(r, c), vid(r, c + 2), EdgeKind::Bend});
      if (r + 2 < rows) mesh.edges.push_back({vid(r, c), vid(r + 2, c), EdgeKind::Bend});
    }
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      mesh.faces.push_back({vid(r, c), vid(r, c + 1), vid(r + 1, c + 1)});
      mesh.faces.push_back({vid(r, c), vid(r + 1, c + 1), vid(r + 1, c)});
    }
  }
  mesh.validate();
  return mesh;
}

ClothSim::ClothSim(const ClothMesh& rest_mesh, const SimParams& params)
    : params_(params), state_(rest_mesh) {
  params_.validate();
  rest_mesh.validate();
  const int nv = rest_mesh.num_vertices();
  velocities_.assign(nv, Vec3{});
  forces_.assign(nv, Vec3{});

  rest_lengths_.reserve(rest_mesh.edges.size());
  for (const Edge& e : rest_mesh.edges)
    rest_lengths_.push_back(norm(rest_mesh.vertices[e.b] - rest_mesh.vertices[e.a]));

  // Lumped masses: a third of each incident face's area, times areal density.
  std::vector<double> area(nv, 0.0);
  for (const auto& f : rest_mesh.faces) {
    const Vec3 ab = rest_mesh.vertices[f[1]] - rest_mesh.vertices[f[0]];
    const Vec3 ac = rest_mesh.vertices[f[2]] - rest_mesh.vertices[f[0]];
    const double a = 0.5 * norm(cross(ab, ac)) / 3.0;
    for (int idx : f) area[idx] += a;
  }
  masses_.resize(nv);
  double mean_area = 0.0;
  for (double a : area) mean_area += a;
  mean_area = nv > 0 ? mean_area / nv : 0.0;
  for (int i = 0; i < nv; ++i) {
    // vertices outside all faces (edge-only meshes) get the mean patch area
    const double a = area[i] > 0.0 ? area[i] : (mean_area > 0.0 ? mean_area : 1e-4);
    masses_[i] = params_.density * params_.thickness * a;
  }
}

void ClothSim::set_positions(const std::vector<Vec3>& positions) {
  if (positions.size() != state_.vertices.size()) throw DomainError("set_positions: size mismatch");
  state_.vertices = positions;
}

void ClothSim::set_velocities(const std::vector<Vec3>& velocities) {
  if (velocities.size() != state_.vertices.size()) throw DomainError("set_velocities: size mismatch");
  velocities_ = velocities;
}

double ClothSim::edge_stiffness(EdgeKind kind) const {
  switch (kind) {
    case EdgeKind::Structural: return params_.stretch_stiffness;
    case EdgeKind::Shear: return params_.shear_stiffness;
    case EdgeKind::Bend: return params_.bend_stiffness;
  }
  return params_.stretch_stiffness;
}

void ClothSim::step(const std::optional<GraspConstraint>& grasp) {
  const int nv = state_.num_vertices();
  const double dt = params_.dt;

  Vec3 grasp_prev{};
  if (grasp) {
    if (grasp->vertex_index < 0 || grasp->vertex_index >= nv)
      throw DomainError("grasp index out of range: " + std::to_string(grasp->vertex_index));
    grasp_prev = state_.vertices[grasp->vertex_index];
  }

  for (int i = 0; i < nv; ++i)
    forces_[i] = Vec3{0.0, 0.0, params_.gravity * masses_[i]} - params_.damping * masses_[i] * velocities_[i];

  for (std::size_t ei = 0; ei < state_.edges.size(); ++ei) {
    const Edge& e = state_.edges[ei];
    const Vec3 d = state_.vertices[e.b] - state_.vertices[e.a];
    const double len = norm(d);
    if (len < 1e-12) continue;
    const Vec3 dir = d / len;
    const double k = edge_stiffness(e.kind);
    const Vec3 fs = k * (len - rest_lengths_[ei]) * dir;
    // damper on the relative velocity along the spring axis
    const double m_red = masses_[e.a] * masses_[e.b] / (masses_[e.a] + masses_[e.b]);
    const double c = 2.0 * params_.spring_damping * std::sqrt(k * m_red);
    const Vec3 fd = c * dot(velocities_[e.b] - velocities_[e.a], dir) * dir;
    forces_[e.a] += fs + fd;
    forces_[e.b] -= fs + fd;
  }

  for (int i = 0; i < nv; ++i) {
    if (!finite(forces_[i]))
      throw NumericalError("simulation blow-up: non-finite force at vertex " + std::to_string(i) +
                           " (step " + std::to_string(step_count_) + ")");
    velocities_[i] += (dt / masses_[i]) * forces_[i];
    state_.vertices[i] += dt * velocities_[i];
  }

  // ground plane: project and apply Coulomb-style tangential scaling
  const double floor_z = params_.ground_height + params_.collision_margin;
  for (int i = 0; i < nv; ++i) {
    Vec3& p = state_.vertices[i];
    if (p.z < floor_z) {
      p.z = floor_z;
      Vec3& v = velocities_[i];
      double removed = 0.0;
      if (v.z < 0.0) {
        removed = -v.z;
        v.z = 0.0;
      }
      const double vt = std::sqrt(v.x * v.x + v.y * v.y);
      if (vt > 1e-12 && removed > 0.0) {
        const double scale = std::max(0.0, 1.0 - params_.friction * removed / vt);
        v.x *= scale;
        v.y *= scale;
      }
    }
  }

  if (grasp) {
    state_.vertices[grasp->vertex_index] = grasp->target_position;
    velocities_[grasp->vertex_index] = (grasp->target_position - grasp_prev) / dt;
  }

  ++step_count_;
}

void ClothSim::apply_action(const ActionStep& action) {
  if (action.grasp_index >= state_.num_vertices())
    throw DomainError("action grasp index out of range: " + std::to_string(action.grasp_index));

  if (action.grasp_index < 0) {
    for (int s = 0; s < params_.substeps + params_.settle_substeps; ++s) step(std::nullopt);
    return;
  }

  const Vec3 start = state_.vertices[action.grasp_index];
  const Vec3 end = start + action.delta;
  for (int s = 1; s <= params_.substeps; ++s) {
    const double t = static_cast<double>(s) / params_.substeps;
    const Vec3 target = start + t * action.delta;
    step(GraspConstraint{action.grasp_index, target});
  }
  for (int s = 0; s < params_.settle_substeps; ++s) step(GraspConstraint{action.grasp_index, end});
}

std::vector<ClothMesh> ClothSim::rollout(const std::vector<ActionStep>& actions) {
  if (actions.empty()) throw DomainError("rollout: empty action sequence");
  std::vector<ClothMesh> out;
  out.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      apply_action(actions[i]);
    } catch (const NumericalError& err) {
      throw NumericalError("rollout step " + std::to_string(i) + ": " + err.what());
    }
    out.push_back(state_);
  }
  return out;
}

SimWorld sim_step(const SimWorld& world, const ClothMesh& rest_mesh, const SimParams& params,
                  const std::optional<GraspConstraint>& grasp) {
  ClothSim sim(rest_mesh, params);
  sim.set_positions(world.mesh.vertices);
  sim.set_velocities(world.velocities);
  sim.step(grasp);
  return SimWorld{sim.mesh(), sim.velocities()};
}

std::vector<ClothMesh> sim_rollout(const SimWorld& world, const ClothMesh& rest_mesh, const SimParams& params,
                                   const std::vector<ActionStep>& actions) {
  ClothSim sim(rest_mesh, params);
  sim.set_positions(world.mesh.vertices);
  sim.set_velocities(world.velocities);
  return sim.rollout(actions);
}

}  // namespace clothdiff

#pragma once

#include <optional>
#include <vector>

#include "clothdiff/mesh.hpp"
#include "clothdiff/rng.hpp"
#include "clothdiff/sim_params.hpp"

namespace clothdiff {

struct GraspConstraint {
  int vertex_index{0};
  Vec3 target_position;
};

struct ActionStep {
  int grasp_index{-1};  // -1: no grasp, settle-only step
  Vec3 delta;           // end-effector displacement over the step, m
};

// Planar grid cloth in the xy-plane at z=0, row-major vertex order.
// Structural edges connect 4-neighbors, shear edges cross cell diagonals,
// bend edges connect 2-hop neighbors along rows/columns.
ClothMesh make_grid_cloth(int rows, int cols, double spacing);

// Semi-implicit Euler mass-spring integrator. The rest mesh fixes spring
// rest lengths and lumped vertex masses; afterwards only positions and
// velocities evolve. One instance is single-threaded; distinct instances
// are independent.
class ClothSim {
 public:
  ClothSim(const ClothMesh& rest_mesh, const SimParams& params);

  const ClothMesh& mesh() const { return state_; }
  const std::vector<Vec3>& velocities() const { return velocities_; }
  const SimParams& params() const { return params_; }

  void set_positions(const std::vector<Vec3>& positions);
  void set_velocities(const std::vector<Vec3>& velocities);

  // One dt advance: springs + gravity + damping, then ground projection
  // with Coulomb-style friction, then the grasp constraint (exact).
  // Throws NumericalError naming the first offending vertex on NaN/Inf.
  void step(const std::optional<GraspConstraint>& grasp = std::nullopt);

  // One action step: `substeps` integrations with the grasp target moved
  // linearly by `action.delta`, then `settle_substeps` with the target
  // held (or unconstrained when grasp_index < 0).
  void apply_action(const ActionStep& action);

  // Apply an action sequence; returns one post-settle mesh per action.
  std::vector<ClothMesh> rollout(const std::vector<ActionStep>& actions);

 private:
  SimParams params_;
  ClothMesh state_;
  std::vector<Vec3> velocities_;
  std::vector<double> rest_lengths_;
  std::vector<double> masses_;
  std::vector<Vec3> forces_;  // scratch
  long step_count_{0};

  double edge_stiffness(EdgeKind kind) const;
};

// Convenience wrappers matching the functional step/rollout contracts.
struct SimWorld {
  ClothMesh mesh;
  std::vector<Vec3> velocities;
};

SimWorld sim_step(const SimWorld& world, const ClothMesh& rest_mesh, const SimParams& params,
                  const std::optional<GraspConstraint>& grasp);

std::vector<ClothMesh> sim_rollout(const SimWorld& world, const ClothMesh& rest_mesh, const SimParams& params,
                                   const std::vector<ActionStep>& actions);

}  // namespace clothdiff

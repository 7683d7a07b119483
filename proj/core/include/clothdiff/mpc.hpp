#pragma once

#include <functional>
#include <vector>

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/planner.hpp"

namespace clothdiff {

// State estimator used between replans: maps the true simulator state to
// the planner's belief (identity for the oracle, render+DPM otherwise).
using StateEstimator = std::function<ClothMesh(const ClothMesh& true_state, Rng&)>;

struct EpisodeResult {
  std::vector<double> emd_curve;  // entry 0 at the initial state, then one per action step
  std::vector<ActionStep> actions;
  bool success{false};
  int success_step{-1};
  double threshold{0.0};
};

// Replanning loop: estimate state, pick a grasp, plan a chunk, execute the
// full chunk in the simulator, repeat. Success when EMD(state, target)
// drops below success_frac * EMD(initial, target).
EpisodeResult mpc_episode(ClothSim& sim, const StateEstimator& estimator, const DynamicsOracle& dynamics,
                          const ClothMesh& target, int max_steps, const PlannerConfig& config, Rng& rng,
                          double success_frac = 0.2);

// Uniform-random actions on a random grasp vertex, same execution loop;
// the paired baseline for planner comparisons.
EpisodeResult random_episode(ClothSim& sim, const ClothMesh& target, int max_steps,
                             const PlannerConfig& config, Rng& rng, double success_frac = 0.2);

// Simulator-backed dynamics oracle: fresh rollout from the last history
// state at rest. Safe for concurrent evaluation (stateless between calls).
DynamicsOracle make_sim_oracle(const ClothMesh& rest_mesh, const SimParams& params);

// Scripted reference fold: grasp one corner and carry it along a lift arc
// onto the opposite corner, then settle. The returned mesh serves as the
// fold-task target state.
ClothMesh scripted_fold_target(const ClothMesh& rest_mesh, const SimParams& params, int corner_from,
                               int corner_to, int steps = 12, int extra_settle = 400);

}  // namespace clothdiff

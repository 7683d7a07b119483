#pragma once

#include <functional>
#include <vector>

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/mesh.hpp"
#include "clothdiff/rng.hpp"

namespace clothdiff {

struct PlannerConfig {
  int n_iterations = 5;       // N
  int n_samples = 16;         // K, even: half Gaussian, half uniform
  int seq_length = 5;         // L
  double action_min = -0.05;  // per-axis bound, m
  double action_max = 0.05;
  double init_std = 0.1;      // sigma_0
  double temperature = 1.0;   // tau
  double w_mse = 1.0;
  double w_cd = 1.0;
  double w_smooth = 0.1;
  double grasp_temperature = 0.02;  // tau_g
  int informed_k = 8;
  double epsilon = 1e-6;
  int threads = 1;  // >1 requires a concurrency-safe oracle

  void validate() const;
};

struct PlanResult {
  std::vector<ActionStep> best_actions;
  double best_cost{0.0};
  std::vector<double> cost_history;   // per-iteration minimum
  std::vector<double> sigma_history;  // sigma after each iteration's annealing
  int grasp_index{-1};
};

// Softmax over per-vertex displacement magnitudes ||target_i - current_i||,
// sharpened by 1/tau_g.
std::vector<double> grasp_probabilities(const ClothMesh& current, const ClothMesh& target, double tau_g);
int select_grasp(const ClothMesh& current, const ClothMesh& target, double tau_g, Rng& rng);

// Inverse-distance weighted sum of (target - current) over the k vertices
// with the largest squared displacement; weights 1/(||p_g - p_i|| + eps).
Vec3 informed_direction(const ClothMesh& current, const ClothMesh& target, int grasp_index, int k,
                        double epsilon);

// Dynamics oracle: predicted per-action-step states for an action sequence
// starting from the given history (most recent frame last). Must return at
// least one state; the final predicted state is scored.
using DynamicsOracle = std::function<std::vector<ClothMesh>(const std::vector<ClothMesh>& history,
                                                            const std::vector<ActionStep>& actions, Rng&)>;

// Sampling-based trajectory optimization: per iteration, K/2 samples from
// the running Gaussian and K/2 uniform samples, all clipped to the bounds;
// the distribution mean moves by exponentially cost-weighted averaging and
// sigma is annealed by (1 - i/N). The mean starts along informed_direction
// scaled to the mid-range per-axis magnitude.
PlanResult plan(const DynamicsOracle& dynamics, const std::vector<ClothMesh>& history,
                const ClothMesh& target, int grasp_index, const PlannerConfig& config, Rng& rng);

}  // namespace clothdiff

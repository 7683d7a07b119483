#pragma once

#include <vector>

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/rng.hpp"

namespace clothdiff {

enum class ActionStrategy { Directional, Pairwise };

struct ActionSamplingConfig {
  int min_len = 15;
  int max_len = 35;
  double min_magnitude = 0.02;  // m per step
  double max_magnitude = 0.05;  // m per step
  double ground_z = 0.0;        // keep grasp targets above this plane
};

// Random manipulation sequence over one grasped vertex.
//   Directional: randomized displacement directions with fold/pick bias.
//   Pairwise: pick a vertex pair by spatial distance and move the source
//   along a lift-then-descend arc onto the target's initial position.
// Sequence length is uniform in [min_len, max_len]; every step magnitude
// lies in [min_magnitude, max_magnitude].
std::vector<ActionStep> sample_action_sequence(const ClothMesh& mesh, ActionStrategy strategy, Rng& rng,
                                               const ActionSamplingConfig& cfg = {});

}  // namespace clothdiff

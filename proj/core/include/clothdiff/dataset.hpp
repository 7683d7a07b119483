#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clothdiff/action_sampling.hpp"
#include "clothdiff/ddm.hpp"
#include "clothdiff/dpm.hpp"
#include "clothdiff/observation.hpp"
#include "clothdiff/sim_params.hpp"

namespace clothdiff {

struct ClothSpec {
  int rows = 8;
  int cols = 8;
  double spacing = 0.03;

  ClothMesh build() const;  // grid resting on the ground plane
};

struct GenDataConfig {
  std::string kind = "dynamics";  // "dynamics" | "perception"
  ClothSpec cloth;
  SimParams sim;
  AugmentParams augment;
  ActionSamplingConfig actions;
  int n_records = 100;          // trajectories (dynamics) or pairs (perception)
  uint64_t seed = 0;
  int n_cameras = 4;
  int samples_per_face = 3;
  double pairwise_fraction = 0.5;
  int settle_tail = 2;          // trailing no-grasp zero actions per trajectory
  int crumple_min = 3;          // perception: action steps before capture
  int crumple_max = 12;

  std::string to_json_string() const;
  static GenDataConfig from_json_string(const std::string& text);
};

std::vector<CameraPose> default_camera_rig(const ClothMesh& cloth, int n_cameras);

struct TrajectoryRecord {
  std::vector<std::vector<Vec3>> states;  // length(actions)+1, settled
  std::vector<ActionStep> actions;
  std::string strategy;
  uint64_t seed{0};
};

// Simulate, render, augment, and write a dataset directory with a
// manifest.json. Reproducible byte-for-byte from (config, seed).
// Trajectories that blow up are resampled with a fresh derived seed, at
// most three times each.
void generate_dataset(const GenDataConfig& config, const std::string& out_dir,
                      const std::function<void(const std::string&)>& log = {});

struct PerceptionDataset {
  GenDataConfig config;
  ClothMesh canonical;
  std::vector<PerceptionPair> pairs;
};

struct DynamicsDataset {
  GenDataConfig config;
  ClothMesh canonical;
  std::vector<TrajectoryRecord> trajectories;

  std::vector<Transition> make_transitions(int history_frames, int future_frames, int max_count = 0,
                                           uint64_t shuffle_seed = 0) const;
};

std::string dataset_kind(const std::string& dir);
PerceptionDataset load_perception_dataset(const std::string& dir);
DynamicsDataset load_dynamics_dataset(const std::string& dir);

}  // namespace clothdiff

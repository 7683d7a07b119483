#pragma once

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/dataset.hpp"
#include "clothdiff/ddm.hpp"
#include "clothdiff/dpm.hpp"
#include "clothdiff/observation.hpp"

namespace clothdiff::test {

inline ClothMesh mini_cloth() {
  ClothMesh mesh = make_grid_cloth(4, 4, 0.05);
  for (auto& v : mesh.vertices) v.z += 1e-3;
  return mesh;
}

inline DpmConfig mini_dpm_config(uint64_t seed = 0) {
  DpmConfig cfg;
  cfg.dim = 40;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.mlp_hidden = 80;
  cfg.mesh_patches = 8;
  cfg.cloud_groups = 10;
  cfg.cloud_group_size = 6;
  cfg.cloud_radius = 0.2;
  cfg.cloud_embed_dim = 32;
  cfg.cloud_encoder_hidden = {24, 32};
  cfg.output_mlp_hidden = {32};
  cfg.diffusion_steps = 20;
  cfg.beta_start = 1e-3;
  cfg.beta_end = 0.25;
  cfg.init_seed = seed;
  return cfg;
}

inline DdmConfig mini_ddm_config(uint64_t seed = 0) {
  DdmConfig cfg;
  cfg.dim = 32;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.mlp_hidden = 64;
  cfg.mesh_patches = 6;
  cfg.history_frames = 1;
  cfg.future_frames = 2;
  cfg.max_frames = 6;
  cfg.action_frequencies = 4;
  cfg.action_embed_dim = 24;
  cfg.action_mlp_hidden = {32};
  cfg.output_mlp_hidden = {32};
  cfg.diffusion_steps = 15;
  cfg.beta_start = 2e-3;
  cfg.beta_end = 0.3;
  cfg.init_seed = seed;
  return cfg;
}

// A handful of (cloud, mesh) pairs from crumpled states of the mini cloth.
inline std::vector<PerceptionPair> mini_perception_pairs(int n, uint64_t seed = 0) {
  const ClothMesh canonical = mini_cloth();
  SimParams params;
  const std::vector<CameraPose> rig = default_camera_rig(canonical, 3);
  std::vector<PerceptionPair> pairs;
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive_seed(seed, i));
    ClothSim sim(canonical, params);
    for (int s = 0; s < params.settle_substeps; ++s) sim.step();
    ActionSamplingConfig acfg;
    acfg.min_len = 4;
    acfg.max_len = 8;
    const auto seq = sample_action_sequence(
        sim.mesh(), i % 2 ? ActionStrategy::Pairwise : ActionStrategy::Directional, rng, acfg);
    sim.rollout(seq);
    PerceptionPair pair;
    pair.mesh = sim.mesh();
    pair.cloud = render_partial_cloud(pair.mesh, rig, 3, rng);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// Transitions harvested from one random trajectory of the mini cloth.
inline std::vector<Transition> mini_transitions(int max_count, int history_frames, int future_frames,
                                                uint64_t seed = 0) {
  const ClothMesh canonical = mini_cloth();
  SimParams params;
  std::vector<Transition> out;
  uint64_t stream = 0;
  while (static_cast<int>(out.size()) < max_count) {
    Rng rng(Rng::derive_seed(seed, stream++));
    ClothSim sim(canonical, params);
    for (int s = 0; s < params.settle_substeps; ++s) sim.step();
    ActionSamplingConfig acfg;
    acfg.min_len = history_frames + future_frames + 4;
    acfg.max_len = history_frames + future_frames + 8;
    auto seq = sample_action_sequence(sim.mesh(), ActionStrategy::Directional, rng, acfg);
    std::vector<std::vector<Vec3>> states = {sim.mesh().vertices};
    for (const auto& a : seq) {
      sim.apply_action(a);
      states.push_back(sim.mesh().vertices);
    }
    for (auto& tr : transitions_from_trajectory(states, seq, history_frames, future_frames)) {
      if (static_cast<int>(out.size()) < max_count) out.push_back(std::move(tr));
    }
  }
  return out;
}

}  // namespace clothdiff::test

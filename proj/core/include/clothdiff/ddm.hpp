#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/diffusion.hpp"
#include "clothdiff/mesh.hpp"
#include "clothdiff/nn/modules.hpp"
#include "clothdiff/observation.hpp"
#include "clothdiff/train.hpp"

namespace clothdiff {

// One dynamics training record: i+1 history frames, j future frames, the
// per-future-step action deltas and the grasped vertex.
struct Transition {
  std::vector<std::vector<Vec3>> history;  // i+1 frames, oldest first
  std::vector<std::vector<Vec3>> future;   // j frames
  std::vector<Vec3> action_deltas;         // j deltas
  int grasp_index{-1};                     // -1: no grasp (settle-only)

  void validate(int nv, int history_frames, int future_frames) const;
};

struct DdmConfig {
  int dim = 48;
  int heads = 4;
  int layers = 2;
  int mlp_hidden = 96;
  int mesh_patches = 16;
  uint64_t patch_seed = 1;
  int decode_k = 3;
  int history_frames = 3;  // i; the model sees i+1 history states
  int future_frames = 5;   // j
  int max_frames = 16;
  // Fourier action embedding
  int action_frequencies = 8;
  int action_embed_dim = 48;
  std::vector<int> action_mlp_hidden = {64, 64};
  std::vector<int> output_mlp_hidden = {64};
  int diffusion_steps = 30;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  double scene_scale = 0.0;
  uint64_t init_seed = 0;

  std::string to_json_string() const;
  static DdmConfig from_json_string(const std::string& text);
};

// Conditional diffusion dynamics: j future frames from i+1 history frames,
// the action chunk, and the grasped-vertex mask.
class DdmModel {
 public:
  DdmModel(const ClothMesh& canonical, const DdmConfig& config);

  const DdmConfig& config() const { return config_; }
  const ClothMesh& canonical() const { return canonical_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // All tensors in the normalized frame. noisy_future: [j,Nv,3];
  // history: [i+1,Nv,3]; action_tokens: [j, action_embed_dim];
  // grasp_mask: [Nv].
  nn::Tensor denoise(const nn::Tensor& noisy_future, int k, const nn::Tensor& history,
                     const nn::Tensor& action_tokens, const std::vector<double>& grasp_mask) const;

  // Fourier-embedded action tokens from normalized deltas [j,3] -> [j,D3].
  nn::Tensor action_tokens(const nn::Tensor& deltas_normalized) const;

  // World-coordinate prediction of j future frames.
  std::vector<ClothMesh> predict(const std::vector<ClothMesh>& history,
                                 const std::vector<Vec3>& action_deltas, int grasp_index, Rng& rng) const;

  // Sliding-window chunked rollout; actions are padded to a multiple of j
  // with no-grasp zero actions and outputs truncated to |actions|.
  std::vector<ClothMesh> rollout_autoregressive(const std::vector<ClothMesh>& initial_history,
                                                const std::vector<ActionStep>& actions, Rng& rng) const;

  nn::Tensor training_loss(const Transition& transition, Rng& rng) const;

 private:
  DdmConfig config_;
  ClothMesh canonical_;
  NoiseSchedule schedule_;
  nn::ParamStore params_;

  PatchSet patches_;
  DecodeWeights decode_;
  std::vector<int> flat_group_index_;  // per-frame padded member rows
  int group_pad_{0};
  nn::Tensor patch_center_offsets_;    // [P, G, C], center-relative canonical cols
  nn::Tensor patch_centers_n_;
  nn::Tensor canonical_n_;             // [Nv, 3]
  std::vector<int> decode_flat_ids_;
  nn::Tensor decode_w_;

  nn::PointNetEncoder frame_encoder_;
  nn::Linear center_embed_;
  nn::FourierActionEmbedder action_embedder_;
  nn::Linear cond_proj_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::Mlp output_mlp_;

  nn::Tensor embed_actions(const std::vector<Vec3>& deltas_normalized) const;
  nn::Tensor normalize_frames(const std::vector<std::vector<Vec3>>& frames, const Vec3& center) const;
};

TrainResult train_ddm(DdmModel& model, const std::vector<Transition>& data, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_step = {});

// Extract transitions from a simulated trajectory (states[0] is the
// pre-action state; actions[t] produced states[t+1]).
std::vector<Transition> transitions_from_trajectory(const std::vector<std::vector<Vec3>>& states,
                                                    const std::vector<ActionStep>& actions,
                                                    int history_frames, int future_frames);

}  // namespace clothdiff

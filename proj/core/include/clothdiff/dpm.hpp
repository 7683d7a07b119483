#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "clothdiff/diffusion.hpp"
#include "clothdiff/mesh.hpp"
#include "clothdiff/nn/modules.hpp"
#include "clothdiff/observation.hpp"
#include "clothdiff/train.hpp"

namespace clothdiff {

struct DpmConfig {
  // transformer
  int dim = 64;
  int heads = 4;
  int layers = 2;
  int mlp_hidden = 128;
  // mesh tokenization (canonical space)
  int mesh_patches = 16;
  uint64_t patch_seed = 1;
  int decode_k = 3;
  // conditioning point-cloud encoder
  int cloud_groups = 32;
  int cloud_group_size = 16;
  double cloud_radius = 0.15;
  int cloud_embed_dim = 64;
  std::vector<int> cloud_encoder_hidden = {32, 64};
  // decoder head
  std::vector<int> output_mlp_hidden = {64};
  // diffusion
  int diffusion_steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.06;
  // normalization; 0 means "take the canonical bbox diagonal"
  double scene_scale = 0.0;
  uint64_t init_seed = 0;

  std::string to_json_string() const;
  static DpmConfig from_json_string(const std::string& text);
};

// Conditional diffusion state estimator: partial point cloud + canonical
// template in, full vertex positions out.
class DpmModel {
 public:
  DpmModel(const ClothMesh& canonical, const DpmConfig& config);

  const DpmConfig& config() const { return config_; }
  const ClothMesh& canonical() const { return canonical_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const PatchSet& mesh_patches() const { return patches_; }

  // Predicted noise for a noisy normalized state. cloud_tokens from
  // encode_cloud on the same normalized frame.
  nn::Tensor denoise(const nn::Tensor& noisy_vertices, int k, const nn::Tensor& cloud_tokens) const;

  // [M, cloud_embed_dim] tokens of a normalized cloud.
  nn::Tensor encode_cloud(const std::vector<Vec3>& cloud_normalized, Rng& rng) const;

  // Full state estimation in world coordinates. n_samples > 1 returns the
  // candidate with the lowest chamfer distance to the conditioning cloud.
  ClothMesh estimate_state(const PointCloud& cloud, Rng& rng, int n_samples = 1) const;

  // One-sample diffusion loss for a (cloud, mesh) training pair.
  nn::Tensor training_loss(const PointCloud& cloud, const ClothMesh& target, Rng& rng) const;

  // normalization helpers (center = observation centroid)
  std::vector<Vec3> normalize(const std::vector<Vec3>& pts, const Vec3& center) const;
  std::vector<Vec3> denormalize(const std::vector<Vec3>& pts, const Vec3& center) const;

 private:
  DpmConfig config_;
  ClothMesh canonical_;
  NoiseSchedule schedule_;
  nn::ParamStore params_;

  PatchSet patches_;
  DecodeWeights decode_;
  std::vector<int> flat_group_index_;   // [P*G] padded member rows
  int group_pad_{0};
  nn::Tensor patch_center_offsets_;     // [P, G, 6], subtracts centers from canonical cols
  nn::Tensor patch_centers_n_;          // [P, 3] normalized canonical centers
  nn::Tensor canonical_n_;              // [Nv, 3] normalized canonical vertices
  std::vector<int> decode_flat_ids_;    // [Nv * k]
  nn::Tensor decode_w_;                 // [Nv * k, 1]

  nn::PointNetEncoder cloud_encoder_;
  nn::Linear cloud_pos_embed_;
  nn::Linear cond_proj_;
  nn::PointNetEncoder mesh_encoder_;
  nn::Linear center_embed_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::Mlp output_mlp_;

  nn::Tensor vertex_features(const nn::Tensor& noisy_vertices) const;
};

struct PerceptionPair {
  PointCloud cloud;
  ClothMesh mesh;
};

TrainResult train_dpm(DpmModel& model, const std::vector<PerceptionPair>& data, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_step = {});

}  // namespace clothdiff

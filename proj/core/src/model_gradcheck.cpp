#include "clothdiff/model_gradcheck.hpp"

#include "clothdiff/cloth_sim.hpp"
#include "clothdiff/ddm.hpp"
#include "clothdiff/dpm.hpp"

namespace clothdiff {

using nn::Tensor;

namespace {

Tensor random_projection_sum(const Tensor& t, uint64_t seed) {
  Rng rng(seed);
  Tensor w = Tensor::randn(t.shape(), rng);
  return nn::sum_all(nn::mul(t, w));
}

}  // namespace

nn::GradCheckReport gradcheck_dpm(uint64_t seed, int max_per_tensor) {
  const ClothMesh cloth = make_grid_cloth(4, 4, 0.05);
  DpmConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.mlp_hidden = 32;
  cfg.mesh_patches = 4;
  cfg.cloud_groups = 6;
  cfg.cloud_group_size = 4;
  cfg.cloud_embed_dim = 16;
  cfg.cloud_encoder_hidden = {16, 16};
  cfg.output_mlp_hidden = {16};
  cfg.diffusion_steps = 10;
  cfg.init_seed = seed;
  DpmModel model(cloth, cfg);

  Rng rng(seed + 1);
  std::vector<Vec3> cloud_n;
  for (int i = 0; i < 20; ++i) cloud_n.push_back({rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3)});

  // perturb the zero-initialized tensors so the check exercises them
  for (const auto& [name, t] : model.params().entries()) {
    bool all_zero = true;
    for (double v : t.values()) all_zero = all_zero && v == 0.0;
    if (all_zero)
      for (auto& v : const_cast<Tensor&>(t).mutable_values()) v = rng.normal(0.0, 0.1);
  }

  std::vector<Tensor> inputs = {Tensor::randn({cloth.num_vertices(), 3}, rng)};
  for (const auto& [name, t] : model.params().entries()) inputs.push_back(t);

  const uint64_t proj_seed = seed + 2;
  const uint64_t cloud_seed = seed + 3;
  const auto f = [&model, cloud_n, proj_seed, cloud_seed](const std::vector<Tensor>& in) {
    Rng cloud_rng(cloud_seed);
    const Tensor tokens = model.encode_cloud(cloud_n, cloud_rng);
    return random_projection_sum(model.denoise(in[0], 4, tokens), proj_seed);
  };
  return nn::check_scalar_fn("dpm_denoise_full", f, std::move(inputs), 1e-5, max_per_tensor);
}

nn::GradCheckReport gradcheck_ddm(uint64_t seed, int max_per_tensor) {
  const ClothMesh cloth = make_grid_cloth(4, 4, 0.05);
  DdmConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.mlp_hidden = 32;
  cfg.mesh_patches = 4;
  cfg.history_frames = 1;
  cfg.future_frames = 2;
  cfg.max_frames = 4;
  cfg.action_frequencies = 2;
  cfg.action_embed_dim = 12;
  cfg.action_mlp_hidden = {16};
  cfg.output_mlp_hidden = {16};
  cfg.diffusion_steps = 10;
  cfg.init_seed = seed;
  DdmModel model(cloth, cfg);

  Rng rng(seed + 1);
  for (const auto& [name, t] : model.params().entries()) {
    bool all_zero = true;
    for (double v : t.values()) all_zero = all_zero && v == 0.0;
    if (all_zero)
      for (auto& v : const_cast<Tensor&>(t).mutable_values()) v = rng.normal(0.0, 0.1);
  }

  const int nv = cloth.num_vertices();
  std::vector<double> mask(nv, 0.0);
  mask[3] = 1.0;

  std::vector<Tensor> inputs = {Tensor::randn({cfg.future_frames, nv, 3}, rng),
                                Tensor::randn({cfg.history_frames + 1, nv, 3}, rng),
                                Tensor::randn({cfg.future_frames, 3}, rng, 0.1)};
  for (const auto& [name, t] : model.params().entries()) inputs.push_back(t);

  const uint64_t proj_seed = seed + 2;
  const auto f = [&model, mask, proj_seed](const std::vector<Tensor>& in) {
    const Tensor out = model.denoise(in[0], 4, in[1], model.action_tokens(in[2]), mask);
    return random_projection_sum(out, proj_seed);
  };
  return nn::check_scalar_fn("ddm_denoise_full", f, std::move(inputs), 1e-5, max_per_tensor);
}

}  // namespace clothdiff

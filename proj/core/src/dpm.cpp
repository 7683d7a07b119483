#include "clothdiff/dpm.hpp"

#include <cmath>
#include <json.hpp>

#include "clothdiff/error.hpp"
#include "clothdiff/metrics.hpp"

namespace clothdiff {

using nn::Tensor;
using nlohmann::json;

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string DpmConfig::to_json_string() const {
  json j;
  j["dim"] = dim;
  j["heads"] = heads;
  j["layers"] = layers;
  j["mlp_hidden"] = mlp_hidden;
  j["mesh_patches"] = mesh_patches;
  j["patch_seed"] = patch_seed;
  j["decode_k"] = decode_k;
  j["cloud_groups"] = cloud_groups;
  j["cloud_group_size"] = cloud_group_size;
  j["cloud_radius"] = cloud_radius;
  j["cloud_embed_dim"] = cloud_embed_dim;
  j["cloud_encoder_hidden"] = cloud_encoder_hidden;
  j["output_mlp_hidden"] = output_mlp_hidden;
  j["diffusion_steps"] = diffusion_steps;
  j["beta_start"] = beta_start;
  j["beta_end"] = beta_end;
  j["scene_scale"] = scene_scale;
  j["init_seed"] = init_seed;
  return j.dump(2);
}

DpmConfig DpmConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dpm config: bad JSON: ") + e.what());
  }
  DpmConfig c;
  static const char* known[] = {"dim", "heads", "layers", "mlp_hidden", "mesh_patches", "patch_seed",
                                "decode_k", "cloud_groups", "cloud_group_size", "cloud_radius",
                                "cloud_embed_dim", "cloud_encoder_hidden", "output_mlp_hidden",
                                "diffusion_steps", "beta_start", "beta_end", "scene_scale", "init_seed"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("dpm config: unknown key '" + key + "'");
  }
  get_if(j, "dim", c.dim);
  get_if(j, "heads", c.heads);
  get_if(j, "layers", c.layers);
  get_if(j, "mlp_hidden", c.mlp_hidden);
  get_if(j, "mesh_patches", c.mesh_patches);
  get_if(j, "patch_seed", c.patch_seed);
  get_if(j, "decode_k", c.decode_k);
  get_if(j, "cloud_groups", c.cloud_groups);
  get_if(j, "cloud_group_size", c.cloud_group_size);
  get_if(j, "cloud_radius", c.cloud_radius);
  get_if(j, "cloud_embed_dim", c.cloud_embed_dim);
  get_if(j, "cloud_encoder_hidden", c.cloud_encoder_hidden);
  get_if(j, "output_mlp_hidden", c.output_mlp_hidden);
  get_if(j, "diffusion_steps", c.diffusion_steps);
  get_if(j, "beta_start", c.beta_start);
  get_if(j, "beta_end", c.beta_end);
  get_if(j, "scene_scale", c.scene_scale);
  get_if(j, "init_seed", c.init_seed);
  return c;
}

DpmModel::DpmModel(const ClothMesh& canonical, const DpmConfig& config)
    : config_(config), canonical_(canonical) {
  canonical_.validate();
  if (config_.scene_scale <= 0.0) config_.scene_scale = bbox_diagonal(canonical_.vertices);
  schedule_ = NoiseSchedule::linear(config_.diffusion_steps, config_.beta_start, config_.beta_end);

  // canonical-space partition, fixed for the model's lifetime
  patches_ = tokenize_mesh(canonical_, config_.mesh_patches, config_.patch_seed);
  decode_ = interpolate_decode_weights(canonical_, patches_, config_.decode_k);

  const int P = config_.mesh_patches;
  group_pad_ = 0;
  for (const auto& g : patches_.groups) group_pad_ = std::max(group_pad_, static_cast<int>(g.size()));
  flat_group_index_.reserve(static_cast<std::size_t>(P) * group_pad_);
  for (const auto& g : patches_.groups) {
    for (int i = 0; i < group_pad_; ++i) flat_group_index_.push_back(g[i < static_cast<int>(g.size()) ? i : 0]);
  }

  const Vec3 canon_center = centroid(canonical_.vertices);
  const double inv_scale = 1.0 / config_.scene_scale;
  std::vector<double> canon_n;
  canon_n.reserve(canonical_.vertices.size() * 3);
  for (const Vec3& v : canonical_.vertices) {
    const Vec3 q = (v - canon_center) * inv_scale;
    canon_n.insert(canon_n.end(), {q.x, q.y, q.z});
  }
  canonical_n_ = Tensor::from_values({canonical_.num_vertices(), 3}, std::move(canon_n));

  std::vector<double> centers_n;
  centers_n.reserve(static_cast<std::size_t>(P) * 3);
  std::vector<double> offsets(static_cast<std::size_t>(P) * group_pad_ * 6, 0.0);
  for (int p = 0; p < P; ++p) {
    const Vec3 c = (patches_.centers[p] - canon_center) * inv_scale;
    centers_n.insert(centers_n.end(), {c.x, c.y, c.z});
    for (int g = 0; g < group_pad_; ++g) {
      double* slot = offsets.data() + (static_cast<std::size_t>(p) * group_pad_ + g) * 6;
      slot[3] = -c.x;  // canonical columns become center-relative
      slot[4] = -c.y;
      slot[5] = -c.z;
    }
  }
  patch_centers_n_ = Tensor::from_values({P, 3}, std::move(centers_n));
  patch_center_offsets_ = Tensor::from_values({P, group_pad_, 6}, std::move(offsets));

  decode_flat_ids_.reserve(static_cast<std::size_t>(canonical_.num_vertices()) * decode_.k);
  std::vector<double> w;
  w.reserve(decode_flat_ids_.capacity());
  for (int v = 0; v < canonical_.num_vertices(); ++v) {
    for (int jx = 0; jx < decode_.k; ++jx) {
      decode_flat_ids_.push_back(decode_.center_ids[v][jx]);
      w.push_back(decode_.weights[v][jx]);
    }
  }
  const int n_weights = static_cast<int>(w.size());
  decode_w_ = Tensor::from_values({n_weights, 1}, std::move(w));

  // parameters; creation order fixes checkpoint layout
  Rng rng(config_.init_seed);
  cloud_encoder_ = nn::PointNetEncoder(params_, "cloud_encoder", 3, config_.cloud_encoder_hidden,
                                       config_.cloud_embed_dim, rng);
  cloud_pos_embed_ = nn::Linear(params_, "cloud_pos_embed", 3, config_.cloud_embed_dim, rng);
  cond_proj_ = nn::Linear(params_, "cond_proj", config_.cloud_embed_dim, config_.dim, rng);
  mesh_encoder_ = nn::PointNetEncoder(params_, "mesh_encoder", 6, {config_.dim, config_.dim}, config_.dim, rng);
  center_embed_ = nn::Linear(params_, "center_embed", 3, config_.dim, rng);
  for (int l = 0; l < config_.layers; ++l)
    blocks_.emplace_back(params_, "block" + std::to_string(l), config_.dim, config_.heads,
                         config_.cloud_embed_dim, config_.dim, config_.mlp_hidden, rng);
  std::vector<int> head_dims = {config_.dim + 6};
  head_dims.insert(head_dims.end(), config_.output_mlp_hidden.begin(), config_.output_mlp_hidden.end());
  head_dims.push_back(3);
  output_mlp_ = nn::Mlp(params_, "output_mlp", head_dims, rng, nn::Mlp::Act::Gelu, /*zero_init_last=*/true);
}

std::vector<Vec3> DpmModel::normalize(const std::vector<Vec3>& pts, const Vec3& center) const {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  const double inv = 1.0 / config_.scene_scale;
  for (const Vec3& p : pts) out.push_back((p - center) * inv);
  return out;
}

std::vector<Vec3> DpmModel::denormalize(const std::vector<Vec3>& pts, const Vec3& center) const {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(p * config_.scene_scale + center);
  return out;
}

Tensor DpmModel::vertex_features(const Tensor& noisy_vertices) const {
  return nn::concat({noisy_vertices, canonical_n_}, 1);  // [Nv, 6]
}

Tensor DpmModel::encode_cloud(const std::vector<Vec3>& cloud_normalized, Rng& rng) const {
  PointCloud pc{cloud_normalized};
  const int groups = std::min(config_.cloud_groups, pc.size());
  const PatchSet ps = tokenize_cloud(pc, groups, config_.cloud_group_size, config_.cloud_radius, rng);

  const int G = config_.cloud_group_size;
  std::vector<double> rel(static_cast<std::size_t>(groups) * G * 3);
  std::vector<double> centers(static_cast<std::size_t>(groups) * 3);
  for (int p = 0; p < groups; ++p) {
    const Vec3& c = ps.centers[p];
    centers[3 * p] = c.x;
    centers[3 * p + 1] = c.y;
    centers[3 * p + 2] = c.z;
    for (int g = 0; g < G; ++g) {
      const Vec3 q = cloud_normalized[ps.groups[p][g]] - c;
      double* slot = rel.data() + (static_cast<std::size_t>(p) * G + g) * 3;
      slot[0] = q.x;
      slot[1] = q.y;
      slot[2] = q.z;
    }
  }
  const Tensor group_tensor = Tensor::from_values({groups, G, 3}, std::move(rel));
  const Tensor center_tensor = Tensor::from_values({groups, 3}, std::move(centers));
  return nn::add(cloud_encoder_.forward(group_tensor), cloud_pos_embed_.forward(center_tensor));
}

Tensor DpmModel::denoise(const Tensor& noisy_vertices, int k, const Tensor& cloud_tokens) const {
  const int nv = canonical_.num_vertices();
  if (noisy_vertices.ndim() != 2 || noisy_vertices.dim(0) != nv || noisy_vertices.dim(1) != 3)
    throw DomainError("dpm denoise: expected [" + std::to_string(nv) + ",3] noisy state");
  const int P = config_.mesh_patches;

  const Tensor feat = vertex_features(noisy_vertices);  // [Nv, 6]
  Tensor grouped = nn::reshape(nn::take_rows(feat, flat_group_index_), {P, group_pad_, 6});
  grouped = nn::add(grouped, patch_center_offsets_);
  Tensor tokens = nn::add(mesh_encoder_.forward(grouped), center_embed_.forward(patch_centers_n_));

  const Tensor pooled = nn::mean_axis(cloud_tokens, 0);  // [D1]
  const Tensor cond_vec = nn::add(
      nn::reshape(cond_proj_.forward(nn::reshape(pooled, {1, config_.cloud_embed_dim})), {config_.dim}),
      step_embedding(k, config_.dim));

  Tensor x = nn::reshape(tokens, {1, P, config_.dim});
  const Tensor cloud3 = nn::reshape(cloud_tokens, {1, cloud_tokens.dim(0), config_.cloud_embed_dim});
  for (const auto& block : blocks_) x = block.forward(x, cloud3, cond_vec);
  x = nn::layernorm_lastdim(x);

  // distance-weighted upsample to vertices
  const Tensor flat_tokens = nn::reshape(x, {P, config_.dim});
  Tensor upsampled = nn::take_rows(flat_tokens, decode_flat_ids_);       // [Nv*k, D]
  upsampled = nn::mul(upsampled, decode_w_);                             // weights broadcast over D
  upsampled = nn::scale(nn::mean_axis(nn::reshape(upsampled, {nv, decode_.k, config_.dim}), 1),
                        static_cast<double>(decode_.k));                 // weighted sum

  const Tensor head_in = nn::concat({upsampled, noisy_vertices, canonical_n_}, 1);
  return output_mlp_.forward(head_in);  // [Nv, 3]
}

ClothMesh DpmModel::estimate_state(const PointCloud& cloud, Rng& rng, int n_samples) const {
  if (cloud.points.empty()) throw DomainError("estimate_state: empty observation");
  nn::NoGradGuard no_grad;
  const Vec3 center = centroid(cloud.points);
  const std::vector<Vec3> cloud_n = normalize(cloud.points, center);

  ClothMesh best = canonical_;
  double best_cd = std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, n_samples); ++s) {
    const Tensor tokens = encode_cloud(cloud_n, rng);
    const DenoiseFn fn = [&](const Tensor& noisy, int k) { return denoise(noisy, k, tokens); };
    const Tensor sample = ddpm_sample(fn, {canonical_.num_vertices(), 3}, schedule_, rng);

    std::vector<Vec3> verts(canonical_.num_vertices());
    const auto& sv = sample.values();
    for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = {sv[3 * i], sv[3 * i + 1], sv[3 * i + 2]};
    ClothMesh mesh = canonical_;
    mesh.vertices = denormalize(verts, center);

    const double cd = chamfer(mesh.vertices, cloud.points);
    if (cd < best_cd) {
      best_cd = cd;
      best = mesh;
    }
  }
  return best;
}

Tensor DpmModel::training_loss(const PointCloud& cloud, const ClothMesh& target, Rng& rng) const {
  if (target.num_vertices() != canonical_.num_vertices())
    throw DomainError("dpm training: target vertex count differs from the canonical template");
  const Vec3 center = centroid(cloud.points);
  const std::vector<Vec3> cloud_n = normalize(cloud.points, center);
  const std::vector<Vec3> mesh_n = normalize(target.vertices, center);

  std::vector<double> s0v;
  s0v.reserve(mesh_n.size() * 3);
  for (const Vec3& p : mesh_n) s0v.insert(s0v.end(), {p.x, p.y, p.z});
  const Tensor s0 = Tensor::from_values({target.num_vertices(), 3}, std::move(s0v));

  const Tensor tokens = encode_cloud(cloud_n, rng);
  const DenoiseFn fn = [&](const Tensor& noisy, int k) { return denoise(noisy, k, tokens); };
  return diffusion_training_loss(fn, s0, schedule_, rng);
}

TrainResult train_dpm(DpmModel& model, const std::vector<PerceptionPair>& data, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_step) {
  if (data.empty()) throw DomainError("train_dpm: empty dataset");
  const int workers = std::max(1, cfg.threads);

  std::vector<std::unique_ptr<DpmModel>> clones;
  std::vector<nn::ParamStore*> stores = {&model.params()};
  for (int w = 1; w < workers; ++w) {
    clones.push_back(std::make_unique<DpmModel>(model.canonical(), model.config()));
    stores.push_back(&clones.back()->params());
  }

  std::vector<DpmModel*> slots = {&model};
  for (auto& c : clones) slots.push_back(c.get());

  const auto item_loss = [&](int slot, int record, Rng& rng) {
    return slots[slot]->training_loss(data[record].cloud, data[record].mesh, rng);
  };
  return run_training(stores, item_loss, static_cast<int>(data.size()), cfg, on_step);
}

}  // namespace clothdiff

#include "clothdiff/ddm.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "clothdiff/error.hpp"

namespace clothdiff {

using nn::Tensor;
using nlohmann::json;

void Transition::validate(int nv, int history_frames, int future_frames) const {
  if (static_cast<int>(history.size()) != history_frames + 1)
    throw DomainError("transition: expected " + std::to_string(history_frames + 1) + " history frames");
  if (static_cast<int>(future.size()) != future_frames)
    throw DomainError("transition: expected " + std::to_string(future_frames) + " future frames");
  if (static_cast<int>(action_deltas.size()) != future_frames)
    throw DomainError("transition: expected one action delta per future frame");
  for (const auto& f : history)
    if (static_cast<int>(f.size()) != nv) throw DomainError("transition: history frame size mismatch");
  for (const auto& f : future)
    if (static_cast<int>(f.size()) != nv) throw DomainError("transition: future frame size mismatch");
  if (grasp_index >= nv) throw DomainError("transition: grasp index out of range");
}

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string DdmConfig::to_json_string() const {
  json j;
  j["dim"] = dim;
  j["heads"] = heads;
  j["layers"] = layers;
  j["mlp_hidden"] = mlp_hidden;
  j["mesh_patches"] = mesh_patches;
  j["patch_seed"] = patch_seed;
  j["decode_k"] = decode_k;
  j["history_frames"] = history_frames;
  j["future_frames"] = future_frames;
  j["max_frames"] = max_frames;
  j["action_frequencies"] = action_frequencies;
  j["action_embed_dim"] = action_embed_dim;
  j["action_mlp_hidden"] = action_mlp_hidden;
  j["output_mlp_hidden"] = output_mlp_hidden;
  j["diffusion_steps"] = diffusion_steps;
  j["beta_start"] = beta_start;
  j["beta_end"] = beta_end;
  j["scene_scale"] = scene_scale;
  j["init_seed"] = init_seed;
  return j.dump(2);
}

DdmConfig DdmConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ddm config: bad JSON: ") + e.what());
  }
  static const char* known[] = {"dim", "heads", "layers", "mlp_hidden", "mesh_patches", "patch_seed",
                                "decode_k", "history_frames", "future_frames", "max_frames",
                                "action_frequencies", "action_embed_dim", "action_mlp_hidden",
                                "output_mlp_hidden", "diffusion_steps", "beta_start", "beta_end",
                                "scene_scale", "init_seed"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("ddm config: unknown key '" + key + "'");
  }
  DdmConfig c;
  get_if(j, "dim", c.dim);
  get_if(j, "heads", c.heads);
  get_if(j, "layers", c.layers);
  get_if(j, "mlp_hidden", c.mlp_hidden);
  get_if(j, "mesh_patches", c.mesh_patches);
  get_if(j, "patch_seed", c.patch_seed);
  get_if(j, "decode_k", c.decode_k);
  get_if(j, "history_frames", c.history_frames);
  get_if(j, "future_frames", c.future_frames);
  get_if(j, "max_frames", c.max_frames);
  get_if(j, "action_frequencies", c.action_frequencies);
  get_if(j, "action_embed_dim", c.action_embed_dim);
  get_if(j, "action_mlp_hidden", c.action_mlp_hidden);
  get_if(j, "output_mlp_hidden", c.output_mlp_hidden);
  get_if(j, "diffusion_steps", c.diffusion_steps);
  get_if(j, "beta_start", c.beta_start);
  get_if(j, "beta_end", c.beta_end);
  get_if(j, "scene_scale", c.scene_scale);
  get_if(j, "init_seed", c.init_seed);
  return c;
}

DdmModel::DdmModel(const ClothMesh& canonical, const DdmConfig& config)
    : config_(config), canonical_(canonical) {
  canonical_.validate();
  if (config_.scene_scale <= 0.0) config_.scene_scale = bbox_diagonal(canonical_.vertices);
  if (config_.history_frames + 1 + config_.future_frames > config_.max_frames)
    throw ConfigError("ddm config: max_frames too small for the frame window");
  schedule_ = NoiseSchedule::linear(config_.diffusion_steps, config_.beta_start, config_.beta_end);

  patches_ = tokenize_mesh(canonical_, config_.mesh_patches, config_.patch_seed);
  decode_ = interpolate_decode_weights(canonical_, patches_, config_.decode_k);

  const int P = config_.mesh_patches;
  group_pad_ = 0;
  for (const auto& g : patches_.groups) group_pad_ = std::max(group_pad_, static_cast<int>(g.size()));
  for (const auto& g : patches_.groups)
    for (int i = 0; i < group_pad_; ++i)
      flat_group_index_.push_back(g[i < static_cast<int>(g.size()) ? i : 0]);

  const Vec3 canon_center = centroid(canonical_.vertices);
  const double inv_scale = 1.0 / config_.scene_scale;
  std::vector<double> canon_n;
  for (const Vec3& v : canonical_.vertices) {
    const Vec3 q = (v - canon_center) * inv_scale;
    canon_n.insert(canon_n.end(), {q.x, q.y, q.z});
  }
  canonical_n_ = Tensor::from_values({canonical_.num_vertices(), 3}, std::move(canon_n));

  // per-vertex channels: position(3) + canonical(3) + grasp mask(1)
  constexpr int kChannels = 7;
  std::vector<double> centers_n;
  std::vector<double> offsets(static_cast<std::size_t>(P) * group_pad_ * kChannels, 0.0);
  for (int p = 0; p < P; ++p) {
    const Vec3 c = (patches_.centers[p] - canon_center) * inv_scale;
    centers_n.insert(centers_n.end(), {c.x, c.y, c.z});
    for (int g = 0; g < group_pad_; ++g) {
      double* slot = offsets.data() + (static_cast<std::size_t>(p) * group_pad_ + g) * kChannels;
      slot[3] = -c.x;
      slot[4] = -c.y;
      slot[5] = -c.z;
    }
  }
  patch_centers_n_ = Tensor::from_values({P, 3}, std::move(centers_n));
  patch_center_offsets_ = Tensor::from_values({P, group_pad_, kChannels}, std::move(offsets));

  for (int v = 0; v < canonical_.num_vertices(); ++v)
    for (int jx = 0; jx < decode_.k; ++jx) decode_flat_ids_.push_back(decode_.center_ids[v][jx]);
  std::vector<double> w;
  for (int v = 0; v < canonical_.num_vertices(); ++v)
    for (int jx = 0; jx < decode_.k; ++jx) w.push_back(decode_.weights[v][jx]);
  const int n_weights = static_cast<int>(w.size());
  decode_w_ = Tensor::from_values({n_weights, 1}, std::move(w));

  Rng rng(config_.init_seed);
  frame_encoder_ = nn::PointNetEncoder(params_, "frame_encoder", kChannels, {config_.dim, config_.dim},
                                       config_.dim, rng);
  center_embed_ = nn::Linear(params_, "center_embed", 3, config_.dim, rng);
  action_embedder_ = nn::FourierActionEmbedder(params_, "action_embedder", config_.action_frequencies,
                                               config_.action_embed_dim, config_.action_mlp_hidden, rng);
  cond_proj_ = nn::Linear(params_, "cond_proj", config_.action_embed_dim, config_.dim, rng);
  for (int l = 0; l < config_.layers; ++l)
    blocks_.emplace_back(params_, "block" + std::to_string(l), config_.dim, config_.heads,
                         config_.action_embed_dim, config_.dim, config_.mlp_hidden, rng,
                         /*with_temporal=*/true, config_.max_frames);
  std::vector<int> head_dims = {config_.dim + kChannels};
  head_dims.insert(head_dims.end(), config_.output_mlp_hidden.begin(), config_.output_mlp_hidden.end());
  head_dims.push_back(3);
  output_mlp_ = nn::Mlp(params_, "output_mlp", head_dims, rng, nn::Mlp::Act::Gelu, /*zero_init_last=*/true);
}

Tensor DdmModel::action_tokens(const Tensor& deltas_normalized) const {
  return action_embedder_.forward(deltas_normalized);  // [j, D3]
}

Tensor DdmModel::embed_actions(const std::vector<Vec3>& deltas_normalized) const {
  std::vector<double> flat;
  flat.reserve(deltas_normalized.size() * 3);
  for (const Vec3& d : deltas_normalized) flat.insert(flat.end(), {d.x, d.y, d.z});
  return action_tokens(Tensor::from_values({static_cast<int>(deltas_normalized.size()), 3}, std::move(flat)));
}

Tensor DdmModel::normalize_frames(const std::vector<std::vector<Vec3>>& frames, const Vec3& center) const {
  const int nv = canonical_.num_vertices();
  std::vector<double> flat;
  flat.reserve(frames.size() * nv * 3);
  const double inv = 1.0 / config_.scene_scale;
  for (const auto& frame : frames) {
    if (static_cast<int>(frame.size()) != nv) throw DomainError("ddm: frame vertex count mismatch");
    for (const Vec3& p : frame) {
      const Vec3 q = (p - center) * inv;
      flat.insert(flat.end(), {q.x, q.y, q.z});
    }
  }
  return Tensor::from_values({static_cast<int>(frames.size()), nv, 3}, std::move(flat));
}

Tensor DdmModel::denoise(const Tensor& noisy_future, int k, const Tensor& history,
                         const Tensor& action_tokens, const std::vector<double>& grasp_mask) const {
  const int nv = canonical_.num_vertices();
  const int hist_frames = config_.history_frames + 1;
  const int j = config_.future_frames;
  if (noisy_future.ndim() != 3 || noisy_future.dim(0) != j || noisy_future.dim(1) != nv)
    throw DomainError("ddm denoise: expected [" + std::to_string(j) + "," + std::to_string(nv) +
                      ",3] noisy future");
  if (history.ndim() != 3 || history.dim(0) != hist_frames || history.dim(1) != nv)
    throw DomainError("ddm denoise: history frame count mismatch");
  if (static_cast<int>(grasp_mask.size()) != nv) throw DomainError("ddm denoise: mask length mismatch");

  const int F = hist_frames + j;
  const int P = config_.mesh_patches;
  constexpr int kChannels = 7;

  // per-frame per-vertex features [F, Nv, 7]
  const Tensor mask =
      Tensor::from_values({1, nv, 1}, std::vector<double>(grasp_mask.begin(), grasp_mask.end()));
  const Tensor positions = nn::concat({history, noisy_future}, 0);  // [F, Nv, 3]
  const Tensor canon_tiled = nn::reshape(canonical_n_, {1, nv, 3});
  std::vector<Tensor> feat_parts;
  feat_parts.push_back(positions);
  {
    std::vector<Tensor> canon_copies(F, canon_tiled), mask_copies(F, mask);
    feat_parts.push_back(nn::concat(canon_copies, 0));
    feat_parts.push_back(nn::concat(mask_copies, 0));
  }
  const Tensor feat = nn::concat(feat_parts, 2);  // [F, Nv, 7]

  // gather the canonical patch partition within each frame
  std::vector<int> frame_rows;
  frame_rows.reserve(static_cast<std::size_t>(F) * flat_group_index_.size());
  for (int f = 0; f < F; ++f)
    for (int idx : flat_group_index_) frame_rows.push_back(f * nv + idx);
  Tensor grouped = nn::reshape(nn::take_rows(nn::reshape(feat, {F * nv, kChannels}), frame_rows),
                               {F, P, group_pad_, kChannels});
  grouped = nn::add(grouped, patch_center_offsets_);  // broadcast over frames

  Tensor tokens = frame_encoder_.forward(nn::reshape(grouped, {F * P, group_pad_, kChannels}));
  tokens = nn::reshape(tokens, {F, P, config_.dim});
  tokens = nn::add(tokens, center_embed_.forward(patch_centers_n_));

  const Tensor pooled = nn::mean_axis(action_tokens, 0);
  const Tensor cond_vec = nn::add(
      nn::reshape(cond_proj_.forward(nn::reshape(pooled, {1, config_.action_embed_dim})), {config_.dim}),
      step_embedding(k, config_.dim));

  Tensor x = tokens;  // [F, P, D]; frame axis doubles as the batch axis
  const Tensor action3 = nn::reshape(action_tokens, {1, j, config_.action_embed_dim});
  for (const auto& block : blocks_) x = block.forward(x, action3, cond_vec);
  x = nn::layernorm_lastdim(x);

  // decode only the future frames
  const Tensor future_tokens = nn::slice(x, 0, hist_frames, j);  // [j, P, D]
  std::vector<int> decode_rows;
  decode_rows.reserve(static_cast<std::size_t>(j) * decode_flat_ids_.size());
  for (int f = 0; f < j; ++f)
    for (int idx : decode_flat_ids_) decode_rows.push_back(f * P + idx);
  Tensor upsampled = nn::take_rows(nn::reshape(future_tokens, {j * P, config_.dim}), decode_rows);
  {
    std::vector<Tensor> w_copies(j, decode_w_);
    upsampled = nn::mul(upsampled, nn::concat(w_copies, 0));
  }
  upsampled = nn::scale(nn::mean_axis(nn::reshape(upsampled, {j, nv, decode_.k, config_.dim}), 2),
                        static_cast<double>(decode_.k));  // [j, Nv, D]

  std::vector<Tensor> mask_copies(j, mask);
  std::vector<Tensor> canon_copies(j, canon_tiled);
  const Tensor head_in = nn::concat(
      {upsampled, noisy_future, nn::concat(canon_copies, 0), nn::concat(mask_copies, 0)}, 2);
  return output_mlp_.forward(head_in);  // [j, Nv, 3]
}

std::vector<ClothMesh> DdmModel::predict(const std::vector<ClothMesh>& history,
                                         const std::vector<Vec3>& action_deltas, int grasp_index,
                                         Rng& rng) const {
  const int nv = canonical_.num_vertices();
  const int hist_frames = config_.history_frames + 1;
  const int j = config_.future_frames;
  if (static_cast<int>(history.size()) != hist_frames)
    throw DomainError("ddm predict: expected " + std::to_string(hist_frames) + " history frames");
  if (static_cast<int>(action_deltas.size()) != j)
    throw DomainError("ddm predict: expected " + std::to_string(j) + " action deltas");
  if (grasp_index >= nv) throw DomainError("ddm predict: grasp index out of range");

  nn::NoGradGuard no_grad;
  const Vec3 center = centroid(history.back().vertices);
  std::vector<std::vector<Vec3>> hist_frames_v;
  for (const auto& m : history) hist_frames_v.push_back(m.vertices);
  const Tensor history_n = normalize_frames(hist_frames_v, center);

  std::vector<Vec3> deltas_n;
  deltas_n.reserve(action_deltas.size());
  const double inv = 1.0 / config_.scene_scale;
  for (const Vec3& d : action_deltas) deltas_n.push_back(d * inv);
  const Tensor action_tokens = embed_actions(deltas_n);

  std::vector<double> mask(nv, 0.0);
  if (grasp_index >= 0) mask[grasp_index] = 1.0;

  const DenoiseFn fn = [&](const Tensor& noisy, int k) {
    return denoise(noisy, k, history_n, action_tokens, mask);
  };
  const Tensor sample = ddpm_sample(fn, {j, nv, 3}, schedule_, rng);

  std::vector<ClothMesh> out;
  out.reserve(j);
  const auto& sv = sample.values();
  for (int f = 0; f < j; ++f) {
    ClothMesh mesh = canonical_;
    for (int v = 0; v < nv; ++v) {
      const std::size_t base = (static_cast<std::size_t>(f) * nv + v) * 3;
      mesh.vertices[v] = Vec3{sv[base], sv[base + 1], sv[base + 2]} * config_.scene_scale + center;
    }
    out.push_back(std::move(mesh));
  }
  return out;
}

std::vector<ClothMesh> DdmModel::rollout_autoregressive(const std::vector<ClothMesh>& initial_history,
                                                        const std::vector<ActionStep>& actions,
                                                        Rng& rng) const {
  const int j = config_.future_frames;
  const int hist_frames = config_.history_frames + 1;
  if (static_cast<int>(initial_history.size()) != hist_frames)
    throw DomainError("ddm rollout: wrong history length");
  if (actions.empty()) throw DomainError("ddm rollout: empty action list");

  std::vector<ActionStep> padded = actions;
  while (padded.size() % j != 0) padded.push_back(ActionStep{-1, Vec3{}});

  std::vector<ClothMesh> window = initial_history;
  std::vector<ClothMesh> outputs;
  outputs.reserve(padded.size());
  for (std::size_t chunk = 0; chunk < padded.size() / j; ++chunk) {
    std::vector<Vec3> deltas(j);
    const int grasp = padded[chunk * j].grasp_index;
    for (int t = 0; t < j; ++t) deltas[t] = padded[chunk * j + t].delta;
    std::vector<ClothMesh> preds = predict(window, deltas, grasp, rng);
    for (auto& m : preds) outputs.push_back(m);
    // slide: keep the last hist_frames states
    std::vector<ClothMesh> next_window;
    for (int f = static_cast<int>(outputs.size()) - hist_frames; f < static_cast<int>(outputs.size()); ++f) {
      if (f < 0)
        next_window.push_back(window[window.size() + f]);
      else
        next_window.push_back(outputs[f]);
    }
    window = std::move(next_window);
  }
  outputs.resize(actions.size(), canonical_);
  return outputs;
}

Tensor DdmModel::training_loss(const Transition& transition, Rng& rng) const {
  const int nv = canonical_.num_vertices();
  transition.validate(nv, config_.history_frames, config_.future_frames);

  const Vec3 center = centroid(transition.history.back());
  const Tensor history_n = normalize_frames(transition.history, center);
  const Tensor s0 = normalize_frames(transition.future, center);

  std::vector<Vec3> deltas_n;
  const double inv = 1.0 / config_.scene_scale;
  for (const Vec3& d : transition.action_deltas) deltas_n.push_back(d * inv);
  const Tensor action_tokens = embed_actions(deltas_n);

  std::vector<double> mask(nv, 0.0);
  if (transition.grasp_index >= 0) mask[transition.grasp_index] = 1.0;

  const DenoiseFn fn = [&](const Tensor& noisy, int k) {
    return denoise(noisy, k, history_n, action_tokens, mask);
  };
  return diffusion_training_loss(fn, s0, schedule_, rng);
}

TrainResult train_ddm(DdmModel& model, const std::vector<Transition>& data, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_step) {
  if (data.empty()) throw DomainError("train_ddm: empty dataset");
  const int workers = std::max(1, cfg.threads);

  std::vector<std::unique_ptr<DdmModel>> clones;
  std::vector<nn::ParamStore*> stores = {&model.params()};
  for (int w = 1; w < workers; ++w) {
    clones.push_back(std::make_unique<DdmModel>(model.canonical(), model.config()));
    stores.push_back(&clones.back()->params());
  }
  std::vector<DdmModel*> slots = {&model};
  for (auto& c : clones) slots.push_back(c.get());

  const auto item_loss = [&](int slot, int record, Rng& rng) {
    return slots[slot]->training_loss(data[record], rng);
  };
  return run_training(stores, item_loss, static_cast<int>(data.size()), cfg, on_step);
}

std::vector<Transition> transitions_from_trajectory(const std::vector<std::vector<Vec3>>& states,
                                                    const std::vector<ActionStep>& actions,
                                                    int history_frames, int future_frames) {
  std::vector<Transition> out;
  if (states.size() != actions.size() + 1) throw DomainError("transitions: states must be actions+1");
  const int n = static_cast<int>(states.size());
  // window anchored at t: history s_{t-i..t}, future s_{t+1..t+j}
  for (int t = history_frames; t + future_frames < n; ++t) {
    Transition tr;
    for (int f = t - history_frames; f <= t; ++f) tr.history.push_back(states[f]);
    for (int f = t + 1; f <= t + future_frames; ++f) tr.future.push_back(states[f]);
    for (int f = t; f < t + future_frames; ++f) tr.action_deltas.push_back(actions[f].delta);
    tr.grasp_index = actions[t].grasp_index;
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace clothdiff

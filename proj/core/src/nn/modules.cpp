#include "clothdiff/nn/modules.hpp"

#include <cmath>

#include "clothdiff/error.hpp"

namespace clothdiff::nn {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

Tensor ParamStore::create(const std::string& name, const std::vector<int>& shape, Rng& rng, double stddev) {
  if (has(name)) throw DomainError("param store: duplicate name " + name);
  Tensor t = Tensor::randn(shape, rng, stddev, true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, const std::vector<int>& shape) {
  if (has(name)) throw DomainError("param store: duplicate name " + name);
  Tensor t = Tensor::zeros(shape, true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw DomainError("param store: no parameter named " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return true;
  return false;
}

int64_t ParamStore::total_params() const {
  int64_t total = 0;
  for (const auto& [n, t] : entries_) total += t.numel();
  return total;
}

void ParamStore::zero_grads() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

void ParamStore::load_values(const std::vector<std::pair<std::string, std::vector<double>>>& named_values) {
  if (named_values.size() != entries_.size())
    throw ConfigError("param store: checkpoint has " + std::to_string(named_values.size()) +
                      " tensors, model has " + std::to_string(entries_.size()));
  for (const auto& [name, values] : named_values) {
    bool found = false;
    for (auto& [n, t] : entries_) {
      if (n != name) continue;
      if (values.size() != t.values().size())
        throw ConfigError("param store: size mismatch for " + name);
      t.mutable_values() = values;
      found = true;
      break;
    }
    if (!found) throw ConfigError("param store: unexpected tensor " + name);
  }
}

Linear::Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, bool zero_init) {
  if (zero_init) {
    weight = ps.create_zeros(prefix + ".weight", {in, out});
  } else {
    weight = ps.create(prefix + ".weight", {in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  }
  bias = ps.create_zeros(prefix + ".bias", {out});
}

Mlp::Mlp(ParamStore& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng, Act act_,
         bool zero_init_last)
    : act(act_) {
  if (dims.size() < 2) throw DomainError("mlp: need at least [in, out] dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.emplace_back(ps, prefix + ".l" + std::to_string(i), dims[i], dims[i + 1], rng,
                        zero_init_last && last);
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = act == Act::Gelu ? gelu(h) : silu(h);
  }
  return h;
}

// q,k,v: [B, T, D] -> heads split -> scaled dot-product -> [B, T, D] merge.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, int heads, int head_dim) {
  const int B = q.dim(0);
  const int T = q.dim(1);
  const int M = k.dim(1);
  const auto split = [&](const Tensor& t, int len) {
    return permute(reshape(t, {B, len, heads, head_dim}), {0, 2, 1, 3});  // [B,H,len,dh]
  };
  const Tensor qh = split(q, T);
  const Tensor kh = split(k, M);
  const Tensor vh = split(v, M);
  const Tensor scores = scale(matmul(qh, transpose_last2(kh)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
  const Tensor attn = softmax_lastdim(scores);          // rows sum to 1
  const Tensor mixed = matmul(attn, vh);                // [B,H,T,dh]
  return reshape(permute(mixed, {0, 2, 1, 3}), {B, T, heads * head_dim});
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim, int n_heads,
                                       Rng& rng)
    : heads(n_heads), head_dim(dim / n_heads) {
  if (dim % n_heads != 0) throw DomainError("mhsa: dim must be divisible by heads");
  wq = Linear(ps, prefix + ".wq", dim, dim, rng);
  wk = Linear(ps, prefix + ".wk", dim, dim, rng);
  wv = Linear(ps, prefix + ".wv", dim, dim, rng);
  wo = Linear(ps, prefix + ".wo", dim, dim, rng);
}

Tensor MultiHeadAttention::forward(const Tensor& x) const {
  if (x.ndim() != 3) throw DomainError("mhsa: expected [B,T,D], got " + shape_str(x.shape()));
  return wo.forward(attention_core(wq.forward(x), wk.forward(x), wv.forward(x), heads, head_dim));
}

CrossAttention::CrossAttention(ParamStore& ps, const std::string& prefix, int dim, int cond_dim,
                               int n_heads, Rng& rng)
    : heads(n_heads), head_dim(dim / n_heads) {
  if (dim % n_heads != 0) throw DomainError("cross attention: dim must be divisible by heads");
  wq = Linear(ps, prefix + ".wq", dim, dim, rng);
  wk = Linear(ps, prefix + ".wk", cond_dim, dim, rng);
  wv = Linear(ps, prefix + ".wv", cond_dim, dim, rng);
  wo = Linear(ps, prefix + ".wo", dim, dim, rng);
}

Tensor CrossAttention::forward(const Tensor& x, const Tensor& cond) const {
  if (x.ndim() != 3) throw DomainError("cross attention: expected [B,T,D] hidden states");
  Tensor c = cond;
  if (c.ndim() == 2) c = reshape(c, {1, c.dim(0), c.dim(1)});
  if (c.dim(0) == 1 && x.dim(0) > 1) {
    // broadcast the condition over the batch/frame axis
    std::vector<Tensor> copies(x.dim(0), c);
    c = concat(copies, 0);
  }
  return wo.forward(attention_core(wq.forward(x), wk.forward(c), wv.forward(c), heads, head_dim));
}

AdaLayerNorm::AdaLayerNorm(ParamStore& ps, const std::string& prefix, int dim, int cond_dim, Rng& rng) {
  to_scale = Linear(ps, prefix + ".to_scale", cond_dim, dim, rng, /*zero_init=*/true);
  to_shift = Linear(ps, prefix + ".to_shift", cond_dim, dim, rng, /*zero_init=*/true);
}

Tensor AdaLayerNorm::forward(const Tensor& x, const Tensor& cond) const {
  const Tensor normed = layernorm_lastdim(x, eps);
  Tensor c = cond;
  if (c.ndim() == 1) c = reshape(c, {1, c.dim(0)});
  const int dim = x.dim(-1);
  Tensor gamma = reshape(to_scale.forward(c), {1, 1, dim});
  Tensor beta = reshape(to_shift.forward(c), {1, 1, dim});
  if (x.ndim() == 2) {
    gamma = reshape(gamma, {1, dim});
    beta = reshape(beta, {1, dim});
  }
  return add(mul(normed, add_scalar(gamma, 1.0)), beta);
}

PointNetEncoder::PointNetEncoder(ParamStore& ps, const std::string& prefix, int in_channels,
                                 const std::vector<int>& hidden, int out_dim, Rng& rng) {
  std::vector<int> dims = {in_channels};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  point_mlp = Mlp(ps, prefix + ".point_mlp", dims, rng, Mlp::Act::Gelu);
  project = Linear(ps, prefix + ".project", hidden.back(), out_dim, rng);
}

Tensor PointNetEncoder::forward(const Tensor& groups) const {
  if (groups.ndim() != 3) throw DomainError("point encoder: expected [M,G,C]");
  const Tensor per_point = point_mlp.forward(groups);   // [M,G,H]
  const Tensor pooled = max_axis(per_point, 1);         // [M,H]
  return project.forward(pooled);                       // [M,D]
}

FourierActionEmbedder::FourierActionEmbedder(ParamStore& ps, const std::string& prefix, int n_freq,
                                             int out_dim_, const std::vector<int>& hidden, Rng& rng)
    : n_frequencies(n_freq), out_dim(out_dim_) {
  if (out_dim % 6 != 0) throw DomainError("action embedder: out_dim must be divisible by 6");
  std::vector<int> dims = {6 * n_freq};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  mlp = Mlp(ps, prefix + ".mlp", dims, rng, Mlp::Act::Silu);
}

Tensor FourierActionEmbedder::features(const Tensor& actions) const {
  if (actions.ndim() != 2 || actions.dim(1) != 3)
    throw DomainError("action embedder: expected [N,3], got " + shape_str(actions.shape()));
  const double bands = static_cast<double>(out_dim) / 6.0;
  std::vector<Tensor> cols;
  cols.reserve(6 * n_frequencies);
  for (int d = 0; d < n_frequencies; ++d) {
    const double freq = std::pow(100.0, static_cast<double>(d) / bands);
    for (int axis = 0; axis < 3; ++axis) {
      const Tensor comp = scale(slice(actions, 1, axis, 1), kTwoPi * freq);
      cols.push_back(sin_op(comp));
      cols.push_back(cos_op(comp));
    }
  }
  return concat(cols, 1);  // [N, 6F]
}

Tensor FourierActionEmbedder::forward(const Tensor& actions) const { return mlp.forward(features(actions)); }

TemporalAttention::TemporalAttention(ParamStore& ps, const std::string& prefix, int dim, int n_heads,
                                     int max_frames, Rng& rng)
    : heads(n_heads), head_dim(dim / n_heads) {
  if (dim % n_heads != 0) throw DomainError("temporal attention: dim must be divisible by heads");
  wq = Linear(ps, prefix + ".wq", dim, dim, rng);
  wk = Linear(ps, prefix + ".wk", dim, dim, rng);
  wv = Linear(ps, prefix + ".wv", dim, dim, rng);
  wo = Linear(ps, prefix + ".wo", dim, dim, rng);
  frame_pos = ps.create(prefix + ".frame_pos", {max_frames, dim}, rng, 0.02);
}

Tensor TemporalAttention::forward(const Tensor& x) const {
  if (x.ndim() != 3) throw DomainError("temporal attention: expected [F,T,D]");
  const int F = x.dim(0);
  const int D = x.dim(2);
  if (F > frame_pos.dim(0)) throw DomainError("temporal attention: more frames than position slots");

  // per spatial token: attend along the frame axis
  const Tensor xt = permute(x, {1, 0, 2});  // [T,F,D]
  const Tensor fpe = reshape(take_rows(frame_pos, [&] {
                               std::vector<int> idx(F);
                               for (int i = 0; i < F; ++i) idx[i] = i;
                               return idx;
                             }()),
                             {1, F, D});
  const Tensor xq = add(xt, fpe);  // position terms on queries/keys only
  const Tensor mixed =
      attention_core(wq.forward(xq), wk.forward(xq), wv.forward(xt), heads, head_dim);  // [T,F,D]
  return add(x, permute(wo.forward(mixed), {1, 0, 2}));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& prefix, int dim, int n_heads,
                                   int cond_token_dim, int cond_vec_dim, int mlp_hidden, Rng& rng,
                                   bool with_temporal, int max_frames)
    : has_cross(cond_token_dim > 0), has_temporal(with_temporal) {
  ln_attn = AdaLayerNorm(ps, prefix + ".ln_attn", dim, cond_vec_dim, rng);
  attn = MultiHeadAttention(ps, prefix + ".attn", dim, n_heads, rng);
  if (has_cross) {
    ln_cross = AdaLayerNorm(ps, prefix + ".ln_cross", dim, cond_vec_dim, rng);
    cross = CrossAttention(ps, prefix + ".cross", dim, cond_token_dim, n_heads, rng);
  }
  ln_mlp = AdaLayerNorm(ps, prefix + ".ln_mlp", dim, cond_vec_dim, rng);
  mlp = Mlp(ps, prefix + ".mlp", {dim, mlp_hidden, dim}, rng, Mlp::Act::Gelu);
  if (with_temporal) temporal = TemporalAttention(ps, prefix + ".temporal", dim, n_heads, max_frames, rng);
}

Tensor TransformerBlock::forward(const Tensor& x, const Tensor& cond_tokens, const Tensor& cond_vec) const {
  Tensor h = add(x, attn.forward(ln_attn.forward(x, cond_vec)));
  if (has_temporal) h = temporal.forward(h);
  if (has_cross && cond_tokens.defined())
    h = add(h, cross.forward(ln_cross.forward(h, cond_vec), cond_tokens));
  return add(h, mlp.forward(ln_mlp.forward(h, cond_vec)));
}

}  // namespace clothdiff::nn

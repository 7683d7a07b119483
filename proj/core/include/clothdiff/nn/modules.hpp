#pragma once

#include <string>
#include <vector>

#include "clothdiff/nn/ops.hpp"
#include "clothdiff/nn/tensor.hpp"

namespace clothdiff::nn {

// Named parameter registry. Modules create their tensors here; the
// optimizer and checkpoints address them by name. Creation order is fixed
// by construction order, which keeps training deterministic.
class ParamStore {
 public:
  Tensor create(const std::string& name, const std::vector<int>& shape, Rng& rng, double stddev);
  Tensor create_zeros(const std::string& name, const std::vector<int>& shape);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;
  int64_t total_params() const;
  void zero_grads();
  // Overwrite values by name; missing/extra names throw.
  void load_values(const std::vector<std::pair<std::string, std::vector<double>>>& named_values);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  // He-style init: N(0, 1/sqrt(in)); zero_init forces both to zero (output
  // heads and AdaLN modulation maps).
  Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, bool zero_init = false);

  Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }
};

struct Mlp {
  std::vector<Linear> layers;
  enum class Act { Gelu, Silu } act{Act::Gelu};

  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng, Act act_,
      bool zero_init_last = false);

  Tensor forward(const Tensor& x) const;
};

// Scaled dot-product self-attention over the second-to-last axis.
// Input [B, T, D] with D = heads * head_dim.
struct MultiHeadAttention {
  int heads{1};
  int head_dim{1};
  Linear wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim, int n_heads, Rng& rng);

  Tensor forward(const Tensor& x) const;
};

// Queries from the hidden states, keys/values from the condition tokens.
// x: [B, T, D], cond: [B, M, Dc] (or [M, Dc], broadcast over the batch).
struct CrossAttention {
  int heads{1};
  int head_dim{1};
  Linear wq, wk, wv, wo;

  CrossAttention() = default;
  CrossAttention(ParamStore& ps, const std::string& prefix, int dim, int cond_dim, int n_heads, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond) const;
};

// Layer norm whose scale/shift come from a conditioning vector. The maps
// are zero-initialized, so at init this is exactly the plain layer norm.
struct AdaLayerNorm {
  Linear to_scale, to_shift;
  double eps{1e-5};

  AdaLayerNorm() = default;
  AdaLayerNorm(ParamStore& ps, const std::string& prefix, int dim, int cond_dim, Rng& rng);

  // cond: [C] vector.
  Tensor forward(const Tensor& x, const Tensor& cond) const;
};

// Per-point shared MLP + max-pool per patch, PointNet style.
// groups: [M, G, C] with points already expressed relative to their patch
// center; returns [M, D].
struct PointNetEncoder {
  Mlp point_mlp;   // applied per point
  Linear project;  // after pooling

  PointNetEncoder() = default;
  PointNetEncoder(ParamStore& ps, const std::string& prefix, int in_channels,
                  const std::vector<int>& hidden, int out_dim, Rng& rng);

  Tensor forward(const Tensor& groups) const;
};

// Sine/cosine features per axis at geometric frequencies, then an MLP.
// Feature layout per frequency d: [sin x, cos x, sin y, cos y, sin z, cos z].
struct FourierActionEmbedder {
  int n_frequencies{8};
  int out_dim{48};
  Mlp mlp;

  FourierActionEmbedder() = default;
  FourierActionEmbedder(ParamStore& ps, const std::string& prefix, int n_freq, int out_dim_,
                        const std::vector<int>& hidden, Rng& rng);

  // Raw bounded features, before the MLP: [N, 6*F].
  Tensor features(const Tensor& actions) const;
  // actions: [N, 3] -> [N, out_dim].
  Tensor forward(const Tensor& actions) const;
};

// Self-attention along the frame axis, one attention problem per spatial
// token, with learned frame-position embeddings on queries/keys and a
// built-in residual: out = x + Wo(attn * V(x)).
struct TemporalAttention {
  int heads{1};
  int head_dim{1};
  Linear wq, wk, wv, wo;
  Tensor frame_pos;  // [max_frames, D]

  TemporalAttention() = default;
  TemporalAttention(ParamStore& ps, const std::string& prefix, int dim, int n_heads, int max_frames,
                    Rng& rng);

  // x: [F, T, D]
  Tensor forward(const Tensor& x) const;
};

// Pre-norm transformer block with AdaLN conditioning, optional
// cross-attention on condition tokens, and optional temporal attention
// (applied on [F, T, D] inputs between self- and cross-attention).
struct TransformerBlock {
  AdaLayerNorm ln_attn, ln_cross, ln_mlp;
  MultiHeadAttention attn;
  CrossAttention cross;
  Mlp mlp;
  TemporalAttention temporal;
  bool has_cross{false};
  bool has_temporal{false};

  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& prefix, int dim, int n_heads, int cond_token_dim,
                   int cond_vec_dim, int mlp_hidden, Rng& rng, bool with_temporal = false,
                   int max_frames = 0);

  // x: [B, T, D]; cond_tokens: [B?, M, Dc]; cond_vec: [C].
  // For temporal blocks, B is the frame axis.
  Tensor forward(const Tensor& x, const Tensor& cond_tokens, const Tensor& cond_vec) const;
};

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, int heads, int head_dim);

}  // namespace clothdiff::nn

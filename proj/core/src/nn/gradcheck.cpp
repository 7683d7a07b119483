#include "clothdiff/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "clothdiff/error.hpp"
#include "clothdiff/nn/modules.hpp"
#include "clothdiff/nn/ops.hpp"

namespace clothdiff::nn {

GradCheckReport check_scalar_fn(const std::string& name,
                                const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                std::vector<Tensor> inputs, double h, int max_per_tensor) {
  for (Tensor& t : inputs) t.set_requires_grad(true);
  Tensor loss = f(inputs);
  if (loss.numel() != 1) throw DomainError("gradcheck " + name + ": fn must return a scalar");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (Tensor& t : inputs) {
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0));
    t.zero_grad();
  }

  GradCheckReport report{name, 0.0, 0};
  NoGradGuard no_grad;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& values = inputs[ti].mutable_values();
    const int64_t n = static_cast<int64_t>(values.size());
    const int64_t stride =
        max_per_tensor > 0 ? std::max<int64_t>(1, n / max_per_tensor) : 1;
    for (int64_t e = 0; e < n; e += stride) {
      const double saved = values[e];
      values[e] = saved + h;
      const double fp = f(inputs).item();
      values[e] = saved - h;
      const double fm = f(inputs).item();
      values[e] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[ti][e];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      report.max_rel_err = std::max(report.max_rel_err, err);
      ++report.checks;
    }
  }
  return report;
}

namespace {

Tensor project_to_scalar(const Tensor& t, Rng& rng) {
  // fixed random projection so every output element influences the loss
  Tensor w = Tensor::randn(t.shape(), rng);
  return sum_all(mul(t, w));
}

using CaseFn = std::function<Tensor(const std::vector<Tensor>&)>;

GradCheckCase make_case(const std::string& name, uint64_t seed,
                        const std::function<GradCheckReport(uint64_t)>& run) {
  return GradCheckCase{name, [run, seed] { return run(seed); }};
}

}  // namespace

std::vector<GradCheckCase> builtin_gradcheck_cases(uint64_t seed) {
  std::vector<GradCheckCase> cases;
  const auto add_case = [&](const std::string& name, const std::function<GradCheckReport(uint64_t)>& run) {
    cases.push_back(make_case(name, seed + cases.size(), run));
  };

  const auto simple = [](const std::string& name, uint64_t s,
                         const std::function<Tensor(const std::vector<Tensor>&, Rng&)>& body,
                         std::vector<std::vector<int>> shapes) {
    Rng data_rng(s);
    std::vector<Tensor> inputs;
    for (const auto& sh : shapes) inputs.push_back(Tensor::randn(sh, data_rng));
    const uint64_t proj_seed = s + 999;
    CaseFn f = [body, proj_seed](const std::vector<Tensor>& in) {
      Rng r(proj_seed);
      return body(in, r);
    };
    return check_scalar_fn(name, f, std::move(inputs));
  };

  add_case("add_broadcast", [simple](uint64_t s) {
    return simple("add_broadcast", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(add(in[0], in[1]), r);
                  },
                  {{2, 3, 4}, {3, 4}});
  });
  add_case("sub", [simple](uint64_t s) {
    return simple("sub", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(sub(in[0], in[1]), r);
                  },
                  {{4, 5}, {4, 5}});
  });
  add_case("mul_broadcast", [simple](uint64_t s) {
    return simple("mul_broadcast", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(mul(in[0], in[1]), r);
                  },
                  {{2, 3, 4}, {1, 3, 1}});
  });
  add_case("scale_add_scalar", [simple](uint64_t s) {
    return simple("scale_add_scalar", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(add_scalar(scale(in[0], -1.7), 0.3), r);
                  },
                  {{3, 4}});
  });
  add_case("sigmoid", [simple](uint64_t s) {
    return simple("sigmoid", s,
                  [](const std::vector<Tensor>& in, Rng& r) { return project_to_scalar(sigmoid(in[0]), r); },
                  {{4, 4}});
  });
  add_case("gelu", [simple](uint64_t s) {
    return simple("gelu", s,
                  [](const std::vector<Tensor>& in, Rng& r) { return project_to_scalar(gelu(in[0]), r); },
                  {{4, 4}});
  });
  add_case("silu", [simple](uint64_t s) {
    return simple("silu", s,
                  [](const std::vector<Tensor>& in, Rng& r) { return project_to_scalar(silu(in[0]), r); },
                  {{4, 4}});
  });
  add_case("sin_cos", [simple](uint64_t s) {
    return simple("sin_cos", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(add(sin_op(in[0]), cos_op(in[0])), r);
                  },
                  {{3, 5}});
  });
  add_case("square", [simple](uint64_t s) {
    return simple("square", s,
                  [](const std::vector<Tensor>& in, Rng& r) { return project_to_scalar(square(in[0]), r); },
                  {{3, 3}});
  });
  add_case("matmul_weight", [simple](uint64_t s) {
    return simple("matmul_weight", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(matmul(in[0], in[1]), r);
                  },
                  {{2, 3, 4}, {4, 5}});
  });
  add_case("matmul_batched", [simple](uint64_t s) {
    return simple("matmul_batched", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(matmul(in[0], in[1]), r);
                  },
                  {{2, 3, 4}, {2, 4, 3}});
  });
  add_case("transpose_permute", [simple](uint64_t s) {
    return simple("transpose_permute", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(permute(transpose_last2(in[0]), {1, 0, 2}), r);
                  },
                  {{2, 3, 4}});
  });
  add_case("reshape", [simple](uint64_t s) {
    return simple("reshape", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(reshape(in[0], {4, 6}), r);
                  },
                  {{2, 3, 4}});
  });
  add_case("concat", [simple](uint64_t s) {
    return simple("concat", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(concat({in[0], in[1]}, 1), r);
                  },
                  {{2, 3}, {2, 2}});
  });
  add_case("slice", [simple](uint64_t s) {
    return simple("slice", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(slice(in[0], 1, 1, 2), r);
                  },
                  {{3, 4, 2}});
  });
  add_case("take_rows_repeated", [simple](uint64_t s) {
    return simple("take_rows_repeated", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(take_rows(in[0], {0, 2, 2, 1}), r);
                  },
                  {{4, 3}});
  });
  add_case("softmax", [simple](uint64_t s) {
    return simple("softmax", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(softmax_lastdim(in[0]), r);
                  },
                  {{3, 5}});
  });
  add_case("layernorm", [simple](uint64_t s) {
    return simple("layernorm", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(layernorm_lastdim(in[0]), r);
                  },
                  {{3, 6}});
  });
  add_case("max_axis", [simple](uint64_t s) {
    return simple("max_axis", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(max_axis(in[0], 1), r);
                  },
                  {{3, 4, 2}});
  });
  add_case("mean_axis", [simple](uint64_t s) {
    return simple("mean_axis", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    return project_to_scalar(mean_axis(in[0], 1), r);
                  },
                  {{3, 4, 2}});
  });
  add_case("sum_mean_all", [simple](uint64_t s) {
    return simple("sum_mean_all", s,
                  [](const std::vector<Tensor>& in, Rng&) {
                    return add(sum_all(in[0]), mean_all(in[0]));
                  },
                  {{4, 3}});
  });
  add_case("mse_loss", [simple](uint64_t s) {
    return simple("mse_loss", s,
                  [](const std::vector<Tensor>& in, Rng&) { return mse_loss(in[0], in[1]); },
                  {{4, 3}, {4, 3}});
  });
  add_case("parameter_reuse", [simple](uint64_t s) {
    return simple("parameter_reuse", s,
                  [](const std::vector<Tensor>& in, Rng& r) {
                    // same tensor on two paths: grads must sum
                    return project_to_scalar(add(matmul(in[0], in[1]), matmul(square(in[0]), in[1])), r);
                  },
                  {{2, 3}, {3, 3}});
  });

  // composite modules: parameters and inputs all checked
  add_case("linear_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    Linear lin(ps, "lin", 4, 3, rng);
    std::vector<Tensor> inputs = {Tensor::randn({2, 4}, rng), lin.weight, lin.bias};
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("linear_module",
                           [lin, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(lin.forward(in[0]), r);
                           },
                           std::move(inputs));
  });
  add_case("mhsa_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    MultiHeadAttention attn(ps, "attn", 8, 2, rng);
    std::vector<Tensor> inputs = {Tensor::randn({1, 3, 8}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("mhsa_module",
                           [attn, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(attn.forward(in[0]), r);
                           },
                           std::move(inputs));
  });
  add_case("cross_attention_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    CrossAttention cross(ps, "cross", 8, 6, 2, rng);
    std::vector<Tensor> inputs = {Tensor::randn({1, 3, 8}, rng), Tensor::randn({1, 4, 6}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("cross_attention_module",
                           [cross, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(cross.forward(in[0], in[1]), r);
                           },
                           std::move(inputs));
  });
  add_case("adaln_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    AdaLayerNorm ln(ps, "ln", 6, 5, rng);
    // zero-init modulation maps get off-zero values so the check is non-trivial
    Tensor scale_w = ln.to_scale.weight;
    Rng wr(s + 1);
    for (auto& v : scale_w.mutable_values()) v = wr.normal(0.0, 0.3);
    Tensor shift_w = ln.to_shift.weight;
    for (auto& v : shift_w.mutable_values()) v = wr.normal(0.0, 0.3);
    std::vector<Tensor> inputs = {Tensor::randn({2, 4, 6}, rng), Tensor::randn({5}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("adaln_module",
                           [ln, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(ln.forward(in[0], in[1]), r);
                           },
                           std::move(inputs));
  });
  add_case("pointnet_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    PointNetEncoder enc(ps, "enc", 3, {8, 8}, 6, rng);
    std::vector<Tensor> inputs = {Tensor::randn({2, 5, 3}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("pointnet_module",
                           [enc, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(enc.forward(in[0]), r);
                           },
                           std::move(inputs));
  });
  add_case("fourier_embed_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    FourierActionEmbedder emb(ps, "emb", 2, 12, {8}, rng);
    std::vector<Tensor> inputs = {Tensor::randn({3, 3}, rng, 0.05)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("fourier_embed_module",
                           [emb, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(emb.forward(in[0]), r);
                           },
                           std::move(inputs));
  });
  add_case("temporal_attention_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    TemporalAttention temporal(ps, "temporal", 8, 2, 4, rng);
    std::vector<Tensor> inputs = {Tensor::randn({3, 2, 8}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("temporal_attention_module",
                           [temporal, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(temporal.forward(in[0]), r);
                           },
                           std::move(inputs));
  });
  add_case("transformer_block_module", [](uint64_t s) {
    Rng rng(s);
    ParamStore ps;
    TransformerBlock block(ps, "block", 8, 2, 6, 5, 16, rng);
    std::vector<Tensor> inputs = {Tensor::randn({1, 3, 8}, rng), Tensor::randn({1, 4, 6}, rng),
                                  Tensor::randn({5}, rng)};
    for (const auto& [n, t] : ps.entries()) inputs.push_back(t);
    const uint64_t ps_seed = s + 999;
    return check_scalar_fn("transformer_block_module",
                           [block, ps_seed](const std::vector<Tensor>& in) {
                             Rng r(ps_seed);
                             return project_to_scalar(block.forward(in[0], in[1], in[2]), r);
                           },
                           std::move(inputs));
  });

  return cases;
}

}  // namespace clothdiff::nn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clothdiff/error.hpp"
#include "clothdiff/nn/gradcheck.hpp"
#include "clothdiff/nn/modules.hpp"
#include "clothdiff/nn/ops.hpp"

using namespace clothdiff;
using namespace clothdiff::nn;

TEST_CASE("backward: sum of squares") {
  Tensor x = Tensor::from_values({3}, {1, 2, 3}, true);
  Tensor loss = sum_all(square(x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: reuse accumulates both paths") {
  Tensor x = Tensor::from_values({2}, {1.5, -0.5}, true);
  Tensor loss = add(sum_all(square(x)), sum_all(scale(x, 3.0)));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * 1.5 + 3.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0 * -0.5 + 3.0));
}

TEST_CASE("backward rejects non-scalar loss and accumulates across calls") {
  Tensor x = Tensor::from_values({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(square(x)), DomainError);
  Tensor loss = sum_all(x);
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));  // two sweeps accumulate
}

TEST_CASE("every builtin op passes central finite differences") {
  for (const auto& c : builtin_gradcheck_cases()) {
    const GradCheckReport r = c.run();
    INFO(c.name, " max_rel_err=", r.max_rel_err);
    CHECK(r.max_rel_err < 1e-6);
    CHECK(r.checks > 0);
  }
}

namespace {

// identity forward with a deliberately wrong backward (claims d/dx = 0.5)
Tensor corrupted_identity(const Tensor& a) {
  auto n = std::make_shared<Node>();
  n->shape = a.shape();
  n->values = a.values();
  n->requires_grad = a.requires_grad();
  n->parents = {a};
  Node* an = a.node();
  n->backward_fn = [an](const Node& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.values.size(); ++i) an->grad[i] += 0.5 * self.grad[i];
  };
  return Tensor::wrap(n);
}

}  // namespace

TEST_CASE("gradcheck negative control flags a corrupted gradient") {
  const auto f = [](const std::vector<Tensor>& in) { return sum_all(corrupted_identity(in[0])); };
  Rng rng(5);
  const GradCheckReport r = check_scalar_fn("corrupted", f, {Tensor::randn({3, 3}, rng)});
  CHECK(r.max_rel_err > 1e-4);
}

TEST_CASE("mhsa single token: attention weight is exactly one") {
  Rng rng(1);
  ParamStore ps;
  MultiHeadAttention attn(ps, "attn", 8, 2, rng);
  Tensor x = Tensor::randn({1, 1, 8}, rng);
  // T=1: softmax over one key = 1, so out == Wo(Wv x)
  const Tensor expect = attn.wo.forward(attn.wv.forward(x));
  const Tensor got = attn.forward(x);
  for (std::size_t i = 0; i < got.values().size(); ++i)
    CHECK(got.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
}

TEST_CASE("mhsa permutation equivariance") {
  Rng rng(2);
  ParamStore ps;
  MultiHeadAttention attn(ps, "attn", 12, 3, rng);
  Tensor x = Tensor::randn({1, 5, 12}, rng);
  const Tensor y = attn.forward(x);

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  std::vector<double> xp(x.numel());
  for (int t = 0; t < 5; ++t)
    for (int d = 0; d < 12; ++d) xp[t * 12 + d] = x.values()[perm[t] * 12 + d];
  const Tensor yp = attn.forward(Tensor::from_values({1, 5, 12}, std::move(xp)));
  for (int t = 0; t < 5; ++t)
    for (int d = 0; d < 12; ++d)
      CHECK(yp.values()[t * 12 + d] == doctest::Approx(y.values()[perm[t] * 12 + d]).epsilon(1e-9));
}

TEST_CASE("mhsa two-token case matches hand computation") {
  // dim 1, single head: everything scalar
  ParamStore ps;
  Rng rng(3);
  MultiHeadAttention attn(ps, "attn", 1, 1, rng);
  const double wq = attn.wq.weight.values()[0];
  const double wk = attn.wk.weight.values()[0];
  const double wv = attn.wv.weight.values()[0];
  const double wo = attn.wo.weight.values()[0];

  const double x0 = 0.7, x1 = -0.4;
  Tensor x = Tensor::from_values({1, 2, 1}, {x0, x1});
  const Tensor y = attn.forward(x);

  const auto hand = [&](double q, double k0, double k1, double v0, double v1) {
    const double s0 = q * k0, s1 = q * k1;  // head_dim 1: scale 1
    const double m = std::max(s0, s1);
    const double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
    return (e0 * v0 + e1 * v1) / (e0 + e1);
  };
  const double v0 = wv * x0, v1 = wv * x1;
  const double y0 = wo * hand(wq * x0, wk * x0, wk * x1, v0, v1);
  const double y1 = wo * hand(wq * x1, wk * x0, wk * x1, v0, v1);
  CHECK(y.values()[0] == doctest::Approx(y0).epsilon(1e-12));
  CHECK(y.values()[1] == doctest::Approx(y1).epsilon(1e-12));
}

TEST_CASE("attention rows sum to one") {
  Rng rng(4);
  Tensor scores = Tensor::randn({2, 3, 4, 4}, rng, 2.0);
  Tensor attn = softmax_lastdim(scores);
  for (int64_t r = 0; r < attn.numel() / 4; ++r) {
    double total = 0;
    for (int i = 0; i < 4; ++i) total += attn.values()[r * 4 + i];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cross attention M=1 degenerates to value broadcast") {
  Rng rng(5);
  ParamStore ps;
  CrossAttention cross(ps, "cross", 8, 6, 2, rng);
  Tensor x = Tensor::randn({1, 4, 8}, rng);
  Tensor cond = Tensor::randn({1, 1, 6}, rng);
  const Tensor got = cross.forward(x, cond);
  const Tensor expect = cross.wo.forward(
      concat(std::vector<Tensor>(4, cross.wv.forward(cond)), 1));  // value repeated per query
  for (std::size_t i = 0; i < got.values().size(); ++i)
    CHECK(got.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-9));
}

TEST_CASE("cross attention invariant to duplicated condition tokens") {
  Rng rng(6);
  ParamStore ps;
  CrossAttention cross(ps, "cross", 8, 6, 2, rng);
  Tensor x = Tensor::randn({1, 3, 8}, rng);
  Tensor cond = Tensor::randn({1, 5, 6}, rng);
  const Tensor once = cross.forward(x, cond);
  const Tensor twice = cross.forward(x, concat({cond, cond}, 1));
  for (std::size_t i = 0; i < once.values().size(); ++i)
    CHECK(once.values()[i] == doctest::Approx(twice.values()[i]).epsilon(1e-9));
}

TEST_CASE("adaln zero-init equals plain layernorm") {
  Rng rng(7);
  ParamStore ps;
  AdaLayerNorm ln(ps, "ln", 10, 6, rng);
  Tensor x = Tensor::randn({2, 3, 10}, rng);
  Tensor cond = Tensor::randn({6}, rng);
  const Tensor got = ln.forward(x, cond);
  const Tensor plain = layernorm_lastdim(x, ln.eps);
  for (std::size_t i = 0; i < got.values().size(); ++i)
    CHECK(got.values()[i] == doctest::Approx(plain.values()[i]).epsilon(1e-12));
}

TEST_CASE("layernorm of a constant row is zero") {
  Tensor x = Tensor::full({1, 8}, 3.25);
  const Tensor y = layernorm_lastdim(x);
  for (double v : y.values()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("pointnet permutation and translation invariance") {
  Rng rng(8);
  ParamStore ps;
  PointNetEncoder enc(ps, "enc", 3, {16, 16}, 8, rng);
  Tensor groups = Tensor::randn({2, 6, 3}, rng);
  const Tensor base = enc.forward(groups);

  // permute the points of patch 0
  std::vector<double> v = groups.values();
  for (int d = 0; d < 3; ++d) {
    std::swap(v[0 * 3 + d], v[4 * 3 + d]);
    std::swap(v[2 * 3 + d], v[5 * 3 + d]);
  }
  const Tensor permuted = enc.forward(Tensor::from_values({2, 6, 3}, std::move(v)));
  for (std::size_t i = 0; i < base.values().size(); ++i)
    CHECK(permuted.values()[i] == doctest::Approx(base.values()[i]).epsilon(1e-12));

  // center-relative coordinates make whole-cloud translation a no-op by
  // construction: the caller subtracts centers, so equal inputs in, equal out
  const Tensor again = enc.forward(groups);
  for (std::size_t i = 0; i < base.values().size(); ++i)
    CHECK(again.values()[i] == base.values()[i]);
}

TEST_CASE("fourier action features: zero action and hand case") {
  Rng rng(9);
  ParamStore ps;
  FourierActionEmbedder emb(ps, "emb", 2, 12, {8}, rng);

  Tensor zero = Tensor::zeros({1, 3});
  const Tensor f0 = emb.features(zero);
  REQUIRE(f0.dim(1) == 12);  // 2*3*F with F=2
  for (int i = 0; i < 12; ++i) {
    if (i % 2 == 0)
      CHECK(f0.values()[i] == doctest::Approx(0.0));  // sin slots
    else
      CHECK(f0.values()[i] == doctest::Approx(1.0));  // cos slots
  }

  // F=1, D3=6: f_0 = 100^0 = 1; action x=0.25 -> sin(2*pi*0.25) = 1
  ParamStore ps1;
  FourierActionEmbedder emb1(ps1, "emb1", 1, 6, {8}, rng);
  Tensor a = Tensor::from_values({1, 3}, {0.25, 0, 0});
  const Tensor f = emb1.features(a);
  CHECK(f.values()[0] == doctest::Approx(1.0).epsilon(1e-12));  // sin x
  CHECK(f.values()[1] == doctest::Approx(std::cos(0.5 * 3.14159265358979323846)).epsilon(1e-9));

  // paper-scale check: F=8 -> 48 raw features
  ParamStore ps8;
  FourierActionEmbedder emb8(ps8, "emb8", 8, 48, {16}, rng);
  CHECK(emb8.features(Tensor::zeros({2, 3})).dim(1) == 48);

  // bounded in [-1, 1]
  Tensor big = Tensor::randn({5, 3}, rng, 3.0);
  for (double v : emb8.features(big).values()) {
    CHECK(v <= 1.0 + 1e-12);
    CHECK(v >= -1.0 - 1e-12);
  }
}

TEST_CASE("temporal attention F=1 is residual value pass") {
  Rng rng(10);
  ParamStore ps;
  TemporalAttention temporal(ps, "t", 8, 2, 4, rng);
  Tensor x = Tensor::randn({1, 3, 8}, rng);
  const Tensor got = temporal.forward(x);
  const Tensor xt = permute(x, {1, 0, 2});
  const Tensor expect = add(x, permute(temporal.wo.forward(temporal.wv.forward(xt)), {1, 0, 2}));
  for (std::size_t i = 0; i < got.values().size(); ++i)
    CHECK(got.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
}

TEST_CASE("temporal attention does not mix spatial tokens") {
  Rng rng(11);
  ParamStore ps;
  TemporalAttention temporal(ps, "t", 8, 2, 6, rng);
  Tensor x = Tensor::randn({4, 3, 8}, rng);
  const Tensor base = temporal.forward(x);

  // zero out token 1's features in every frame; tokens 0 and 2 unchanged
  std::vector<double> v = x.values();
  for (int f = 0; f < 4; ++f)
    for (int d = 0; d < 8; ++d) v[(f * 3 + 1) * 8 + d] = 0.0;
  const Tensor poked = temporal.forward(Tensor::from_values({4, 3, 8}, std::move(v)));
  for (int f = 0; f < 4; ++f)
    for (int t = 0; t < 3; ++t) {
      if (t == 1) continue;
      for (int d = 0; d < 8; ++d)
        CHECK(poked.values()[(f * 3 + t) * 8 + d] ==
              doctest::Approx(base.values()[(f * 3 + t) * 8 + d]).epsilon(1e-12));
    }
}

TEST_CASE("transformer block at init has no condition influence") {
  Rng rng(12);
  ParamStore ps;
  TransformerBlock block(ps, "b", 8, 2, 6, 5, 16, rng);
  Tensor x = Tensor::randn({1, 4, 8}, rng);
  Tensor cond_tokens = Tensor::randn({1, 3, 6}, rng);
  Tensor cond_a = Tensor::randn({5}, rng);
  Tensor cond_b = Tensor::randn({5}, rng);
  // AdaLN maps are zero-initialized: swapping the conditioning vector
  // cannot change the output at init
  const Tensor ya = block.forward(x, cond_tokens, cond_a);
  const Tensor yb = block.forward(x, cond_tokens, cond_b);
  for (std::size_t i = 0; i < ya.values().size(); ++i)
    CHECK(ya.values()[i] == doctest::Approx(yb.values()[i]).epsilon(1e-12));
}

TEST_CASE("forward and backward are deterministic") {
  const auto run = [] {
    Rng rng(13);
    ParamStore ps;
    MultiHeadAttention attn(ps, "attn", 8, 2, rng);
    Tensor x = Tensor::randn({1, 4, 8}, rng, 1.0, true);
    Tensor loss = mean_all(square(attn.forward(x)));
    backward(loss);
    std::vector<double> out = {loss.item()};
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

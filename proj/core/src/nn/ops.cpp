#include "clothdiff/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "clothdiff/error.hpp"

namespace clothdiff::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void accum(Node* n, int64_t idx, double v) {
  n->ensure_grad();
  n->grad[idx] += v;
}

std::shared_ptr<Node> result_node(const std::vector<int>& shape, std::vector<double> values,
                                  std::vector<Tensor> parents) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->values = std::move(values);
  if (grad_enabled()) {
    for (const Tensor& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
    if (n->requires_grad) n->parents = std::move(parents);
  }
  return n;
}

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::vector<int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
  return s;
}

// Right-aligned broadcast: per output dim, each input contributes stride 0
// where its size is 1 (or the dim is missing).
struct BroadcastPlan {
  std::vector<int> out_shape;
  std::vector<int64_t> stride_a, stride_b;
  int64_t out_numel{0};
};

BroadcastPlan make_broadcast_plan(const std::vector<int>& a, const std::vector<int>& b) {
  const int nd = std::max(a.size(), b.size());
  BroadcastPlan plan;
  plan.out_shape.resize(nd);
  std::vector<int> ash(nd, 1), bsh(nd, 1);
  std::copy(a.begin(), a.end(), ash.begin() + (nd - a.size()));
  std::copy(b.begin(), b.end(), bsh.begin() + (nd - b.size()));
  for (int i = 0; i < nd; ++i) {
    if (ash[i] != bsh[i] && ash[i] != 1 && bsh[i] != 1)
      throw DomainError("broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
    plan.out_shape[i] = std::max(ash[i], bsh[i]);
  }
  const auto sa = strides_of(ash), sb = strides_of(bsh);
  plan.stride_a.resize(nd);
  plan.stride_b.resize(nd);
  for (int i = 0; i < nd; ++i) {
    plan.stride_a[i] = ash[i] == 1 ? 0 : sa[i];
    plan.stride_b[i] = bsh[i] == 1 ? 0 : sb[i];
  }
  plan.out_numel = numel_of(plan.out_shape);
  return plan;
}

template <typename F>
void broadcast_walk(const BroadcastPlan& plan, F&& body) {
  const int nd = static_cast<int>(plan.out_shape.size());
  if (nd == 0) {
    body(0, 0, 0);
    return;
  }
  std::vector<int> idx(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t o = 0; o < plan.out_numel; ++o) {
    body(o, ia, ib);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (idx[d] < plan.out_shape[d]) break;
      idx[d] = 0;
      ia -= plan.stride_a[d] * plan.out_shape[d];
      ib -= plan.stride_b[d] * plan.out_shape[d];
    }
  }
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  auto plan = make_broadcast_plan(a.shape(), b.shape());
  std::vector<double> out(plan.out_numel);
  const auto& av = a.values();
  const auto& bv = b.values();

  if (a.shape() == b.shape()) {  // fast path
    switch (kind) {
      case BinKind::Add: for (int64_t i = 0; i < plan.out_numel; ++i) out[i] = av[i] + bv[i]; break;
      case BinKind::Sub: for (int64_t i = 0; i < plan.out_numel; ++i) out[i] = av[i] - bv[i]; break;
      case BinKind::Mul: for (int64_t i = 0; i < plan.out_numel; ++i) out[i] = av[i] * bv[i]; break;
    }
  } else {
    broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
      switch (kind) {
        case BinKind::Add: out[o] = av[ia] + bv[ib]; break;
        case BinKind::Sub: out[o] = av[ia] - bv[ib]; break;
        case BinKind::Mul: out[o] = av[ia] * bv[ib]; break;
      }
    });
  }

  auto node = result_node(plan.out_shape, std::move(out), {a, b});
  if (node->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    node->backward_fn = [an, bn, plan, kind](const Node& self) {
      broadcast_walk(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        const double g = self.grad[o];
        switch (kind) {
          case BinKind::Add:
            if (an->requires_grad) accum(an, ia, g);
            if (bn->requires_grad) accum(bn, ib, g);
            break;
          case BinKind::Sub:
            if (an->requires_grad) accum(an, ia, g);
            if (bn->requires_grad) accum(bn, ib, -g);
            break;
          case BinKind::Mul:
            if (an->requires_grad) accum(an, ia, g * bn->values[ib]);
            if (bn->requires_grad) accum(bn, ib, g * an->values[ia]);
            break;
        }
      });
    };
  }
  return Tensor::wrap(node);
}

template <typename FwdFn, typename DerivFn>
Tensor unary_op(const Tensor& a, FwdFn fwd, DerivFn deriv) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto node = result_node(a.shape(), std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, deriv](const Node& self) {
      for (std::size_t i = 0; i < self.values.size(); ++i)
        accum(an, i, self.grad[i] * deriv(an->values[i], self.values[i]));
    };
  }
  return Tensor::wrap(node);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }

Tensor scale(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Tensor silu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor sin_op(const Tensor& a) {
  return unary_op(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos_op(const Tensor& a) {
  return unary_op(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace {

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool transpose_a,
          bool transpose_b) {
  // c[m,n] += op(a) * op(b)
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = transpose_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = transpose_b ? nullptr : b + static_cast<int64_t>(p) * n;
      double* crow = c + static_cast<int64_t>(i) * n;
      if (transpose_b) {
        for (int j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2) throw DomainError("matmul: left operand must have >= 2 dims");
  const int m = a.dim(-2);
  const int k = a.dim(-1);
  const bool weight_case = b.ndim() == 2;
  if (weight_case) {
    if (b.dim(0) != k)
      throw DomainError("matmul: inner dims " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  } else {
    if (b.ndim() != a.ndim() || b.dim(-2) != k ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()))
      throw DomainError("matmul: batch shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int n = weight_case ? b.dim(1) : b.dim(-1);
  const int64_t batch = a.numel() / (static_cast<int64_t>(m) * k);

  std::vector<int> out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (int64_t t = 0; t < batch; ++t) {
    gemm(av + t * m * k, weight_case ? bv : bv + t * k * n, out.data() + t * m * n, m, k, n, false, false);
  }

  auto node = result_node(out_shape, std::move(out), {a, b});
  if (node->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    node->backward_fn = [an, bn, m, k, n, batch, weight_case](const Node& self) {
      const double* g = self.values.empty() ? nullptr : self.grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        for (int64_t t = 0; t < batch; ++t) {
          const double* bt = weight_case ? bn->values.data() : bn->values.data() + t * k * n;
          gemm(g + t * m * n, bt, an->grad.data() + t * m * k, m, n, k, false, true);  // G * B^T
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t t = 0; t < batch; ++t) {
          const double* at = an->values.data() + t * m * k;
          double* gb = weight_case ? bn->grad.data() : bn->grad.data() + t * k * n;
          gemm(at, g + t * m * n, gb, k, m, n, true, false);  // A^T * G
        }
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor transpose_last2(const Tensor& a) {
  std::vector<int> axes(a.ndim());
  for (int i = 0; i < a.ndim(); ++i) axes[i] = i;
  std::swap(axes[a.ndim() - 1], axes[a.ndim() - 2]);
  return permute(a, axes);
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  const int nd = a.ndim();
  if (static_cast<int>(axes.size()) != nd) throw DomainError("permute: axes rank mismatch");
  std::vector<int> out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = a.dim(axes[i]);

  const auto in_strides = strides_of(a.shape());
  // stride of output dim i in the INPUT flat layout
  std::vector<int64_t> walk_strides(nd);
  for (int i = 0; i < nd; ++i) walk_strides[i] = in_strides[axes[i]];

  const int64_t total = a.numel();
  std::vector<double> out(total);
  std::vector<int64_t> src_index(total);
  std::vector<int> idx(nd, 0);
  int64_t src = 0;
  const auto& av = a.values();
  for (int64_t o = 0; o < total; ++o) {
    out[o] = av[src];
    src_index[o] = src;
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      src += walk_strides[d];
      if (idx[d] < out_shape[d]) break;
      idx[d] = 0;
      src -= walk_strides[d] * out_shape[d];
    }
  }

  auto node = result_node(out_shape, std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, src_index = std::move(src_index)](const Node& self) {
      an->ensure_grad();
      for (std::size_t o = 0; o < self.values.size(); ++o) an->grad[src_index[o]] += self.grad[o];
    };
  }
  return Tensor::wrap(node);
}

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
  if (numel_of(shape) != a.numel())
    throw DomainError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
  auto node = result_node(shape, a.values(), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an](const Node& self) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) an->grad[i] += self.grad[i];
    };
  }
  return Tensor::wrap(node);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DomainError("concat: no tensors");
  const int nd = parts[0].ndim();
  if (axis < 0) axis += nd;
  std::vector<int> out_shape = parts[0].shape();
  int64_t axis_total = 0;
  for (const Tensor& t : parts) {
    if (t.ndim() != nd) throw DomainError("concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && t.dim(d) != out_shape[d]) throw DomainError("concat: shape mismatch off axis");
    axis_total += t.dim(axis);
  }
  out_shape[axis] = static_cast<int>(axis_total);

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < nd; ++d) inner *= out_shape[d];

  std::vector<double> out(numel_of(out_shape));
  int64_t offset = 0;
  for (const Tensor& t : parts) {
    const int64_t block = t.dim(axis) * inner;
    const auto& tv = t.values();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(tv.begin() + o * block, tv.begin() + (o + 1) * block,
                out.begin() + o * axis_total * inner + offset);
    offset += block;
  }

  auto node = result_node(out_shape, std::move(out), parts);
  if (node->requires_grad) {
    std::vector<Node*> pnodes;
    std::vector<int64_t> blocks;
    for (const Tensor& t : parts) {
      pnodes.push_back(t.node());
      blocks.push_back(t.dim(axis) * inner);
    }
    node->backward_fn = [pnodes, blocks, outer, inner, axis_total](const Node& self) {
      int64_t offset = 0;
      for (std::size_t p = 0; p < pnodes.size(); ++p) {
        if (pnodes[p]->requires_grad) {
          pnodes[p]->ensure_grad();
          for (int64_t o = 0; o < outer; ++o) {
            const double* g = self.grad.data() + o * axis_total * inner + offset;
            double* dst = pnodes[p]->grad.data() + o * blocks[p];
            for (int64_t i = 0; i < blocks[p]; ++i) dst[i] += g[i];
          }
        }
        offset += blocks[p];
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (start < 0 || len < 1 || start + len > a.dim(axis)) throw DomainError("slice: range out of bounds");
  std::vector<int> out_shape = a.shape();
  out_shape[axis] = len;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
  const int64_t in_axis = a.dim(axis);

  std::vector<double> out(numel_of(out_shape));
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(av.begin() + (o * in_axis + start) * inner, av.begin() + (o * in_axis + start + len) * inner,
              out.begin() + o * len * inner);

  auto node = result_node(out_shape, std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, outer, inner, in_axis, start, len](const Node& self) {
      an->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const double* g = self.grad.data() + o * len * inner;
        double* dst = an->grad.data() + (o * in_axis + start) * inner;
        for (int64_t i = 0; i < len * inner; ++i) dst[i] += g[i];
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor take_rows(const Tensor& a, const std::vector<int>& rows) {
  if (a.ndim() < 1) throw DomainError("take_rows: needs >= 1 dim");
  const int64_t row_size = a.numel() / a.dim(0);
  for (int r : rows)
    if (r < 0 || r >= a.dim(0)) throw DomainError("take_rows: index out of range");

  std::vector<int> out_shape = a.shape();
  out_shape[0] = static_cast<int>(rows.size());
  std::vector<double> out(rows.size() * row_size);
  const auto& av = a.values();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(av.begin() + rows[i] * row_size, av.begin() + (rows[i] + 1) * row_size,
              out.begin() + i * row_size);

  auto node = result_node(out_shape, std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, rows, row_size](const Node& self) {
      an->ensure_grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* g = self.grad.data() + i * row_size;
        double* dst = an->grad.data() + rows[i] * row_size;
        for (int64_t j = 0; j < row_size; ++j) dst[j] += g[j];
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor softmax_lastdim(const Tensor& a) {
  const int L = a.dim(-1);
  const int64_t rows = a.numel() / L;
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * L;
    double* y = out.data() + r * L;
    double mx = x[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, x[i]);
    double total = 0.0;
    for (int i = 0; i < L; ++i) {
      y[i] = std::exp(x[i] - mx);
      total += y[i];
    }
    for (int i = 0; i < L; ++i) y[i] /= total;
  }

  auto node = result_node(a.shape(), std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, L, rows](const Node& self) {
      an->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = self.values.data() + r * L;
        const double* g = self.grad.data() + r * L;
        double gy = 0.0;
        for (int i = 0; i < L; ++i) gy += g[i] * y[i];
        double* dst = an->grad.data() + r * L;
        for (int i = 0; i < L; ++i) dst[i] += y[i] * (g[i] - gy);
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor layernorm_lastdim(const Tensor& a, double eps) {
  const int L = a.dim(-1);
  const int64_t rows = a.numel() / L;
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(rows);
  const auto& av = a.values();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * L;
    double mu = 0.0;
    for (int i = 0; i < L; ++i) mu += x[i];
    mu /= L;
    double var = 0.0;
    for (int i = 0; i < L; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= L;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    double* y = out.data() + r * L;
    for (int i = 0; i < L; ++i) y[i] = (x[i] - mu) * inv;
  }

  auto node = result_node(a.shape(), std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, L, rows, inv_std = std::move(inv_std)](const Node& self) {
      an->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = self.values.data() + r * L;
        const double* g = self.grad.data() + r * L;
        double mean_g = 0.0, mean_gy = 0.0;
        for (int i = 0; i < L; ++i) {
          mean_g += g[i];
          mean_gy += g[i] * y[i];
        }
        mean_g /= L;
        mean_gy /= L;
        double* dst = an->grad.data() + r * L;
        for (int i = 0; i < L; ++i) dst[i] += inv_std[r] * (g[i] - mean_g - y[i] * mean_gy);
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor max_axis(const Tensor& a, int axis) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
  const int64_t n = a.dim(axis);

  std::vector<int> out_shape;
  for (int d = 0; d < nd; ++d)
    if (d != axis) out_shape.push_back(a.dim(d));

  std::vector<double> out(outer * inner);
  std::vector<int64_t> arg(outer * inner);
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      double best = av[o * n * inner + i];
      int64_t best_j = 0;
      for (int64_t j = 1; j < n; ++j) {
        const double v = av[(o * n + j) * inner + i];
        if (v > best) {  // first max wins ties
          best = v;
          best_j = j;
        }
      }
      out[o * inner + i] = best;
      arg[o * inner + i] = (o * n + best_j) * inner + i;
    }
  }

  auto node = result_node(out_shape, std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, arg = std::move(arg)](const Node& self) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) an->grad[arg[i]] += self.grad[i];
    };
  }
  return Tensor::wrap(node);
}

Tensor mean_axis(const Tensor& a, int axis) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
  const int64_t n = a.dim(axis);

  std::vector<int> out_shape;
  for (int d = 0; d < nd; ++d)
    if (d != axis) out_shape.push_back(a.dim(d));

  std::vector<double> out(outer * inner, 0.0);
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t j = 0; j < n; ++j)
      for (int64_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * n + j) * inner + i];
  for (auto& v : out) v /= static_cast<double>(n);

  auto node = result_node(out_shape, std::move(out), {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an, outer, inner, n](const Node& self) {
      an->ensure_grad();
      const double inv = 1.0 / static_cast<double>(n);
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < n; ++j)
          for (int64_t i = 0; i < inner; ++i)
            an->grad[(o * n + j) * inner + i] += self.grad[o * inner + i] * inv;
    };
  }
  return Tensor::wrap(node);
}

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  auto node = result_node({}, {total}, {a});
  if (node->requires_grad) {
    Node* an = a.node();
    node->backward_fn = [an](const Node& self) {
      an->ensure_grad();
      const double g = self.grad[0];
      for (auto& gv : an->grad) gv += g;
    };
  }
  return Tensor::wrap(node);
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mse_loss(const Tensor& a, const Tensor& b) { return mean_all(square(sub(a, b))); }

}  // namespace clothdiff::nn

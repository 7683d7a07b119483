#pragma once

#include <vector>

#include "clothdiff/nn/tensor.hpp"

namespace clothdiff::nn {

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor sin_op(const Tensor& a);
Tensor cos_op(const Tensor& a);
Tensor square(const Tensor& a);

// a: [..., M, K]. b: either a 2-D weight [K, N] shared across the batch, or
// a tensor with identical leading dims and trailing [K, N].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose_last2(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor reshape(const Tensor& a, const std::vector<int>& shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

// Row gather along axis 0; backward scatter-adds, so repeated indices
// accumulate.
Tensor take_rows(const Tensor& a, const std::vector<int>& rows);

Tensor softmax_lastdim(const Tensor& a);
// Normalization only (zero mean, unit variance over the last dim); any
// affine modulation is composed outside.
Tensor layernorm_lastdim(const Tensor& a, double eps = 1e-5);

Tensor max_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);

// mean((a-b)^2) over all elements.
Tensor mse_loss(const Tensor& a, const Tensor& b);

}  // namespace clothdiff::nn

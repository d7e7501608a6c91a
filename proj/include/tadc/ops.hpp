#pragma once

// Differentiable tensor operations.
//
// Broadcasting is limited to scalar-with-tensor and a last-axis vector over a
// tensor (the *_rowvec ops). Every op materializes its result; there are no
// strided views.

#include <cstddef>
#include <span>
#include <vector>

#include "tadc/tensor.hpp"

namespace tadc::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor square(const Tensor& x);

Tensor add_scalar(const Tensor& x, float s);
Tensor scale(const Tensor& x, float s);

/// x[..., d] + v[d]
Tensor add_rowvec(const Tensor& x, const Tensor& v);
/// x[..., d] * v[d]
Tensor mul_rowvec(const Tensor& x, const Tensor& v);

/// a[m,k] x b[k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[N,in] x w[in,out] + bias[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
/// Batched product over the leading axis: a[G,m,k] x b[G,k,n], or
/// a[G,m,k] x b[G,n,k]^T when transpose_b is set.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// 2-D transpose, materialized.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// Generalized transpose: output axis i is input axis axes[i].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
/// Rows [begin, end) along the first axis.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-6f);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Rows of x[N,d] at the given indices -> [len,d].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Places row r of x[len,d] at row indices[r] of a zero [size,d] tensor.
Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> indices, std::size_t size);
/// v[d] repeated as `count` rows -> [count,d].
Tensor repeat_row(const Tensor& v, std::size_t count);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Separable blur of x[P,H,W] with a normalized 1-D kernel (odd length) and
/// symmetric (edge-including mirror) padding. Kernel radius must not exceed
/// the plane sides.
Tensor blur2d(const Tensor& x, std::span<const float> kernel);

/// Mean over all elements of pos_weight*m*softplus(-z) + (1-m)*softplus(z),
/// i.e. weighted binary cross-entropy evaluated from logits.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets, float pos_weight);

}  // namespace tadc::ops

/* Copyright 2026 The natcpu Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "nat/tensor.hpp"

namespace nat {

/// c[..., m, n] = sum_k a[..., m, k] * b[..., k, n]. `b` is either a plain matrix
/// shared by every leading batch of `a`, or carries the same leading extents.
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Affine map over the last axis: y = x * weight + bias, weight stored [in, out].
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias);

/// Softmax over the last axis with max subtraction. Throws NumericError on NaN/Inf input.
template <typename Scalar>
Tensor<Scalar> softmax_last(const Tensor<Scalar>& x);

inline constexpr double kLayerNormEps = 1e-5;

/// Per-slice normalization over the last axis (population variance) followed by
/// the affine map gamma * xhat + beta.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                          double eps = kLayerNormEps);

// x * Phi(x), erf form.
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x);

/// Zero-padded cross-correlation. x is [H, W, Cin], weight is [k, k, Cin, Cout],
/// bias is [Cout]. Each output sums over (ki, kj, cin) in that order.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      Index stride, Index pad);

/// Output extent of a strided, padded convolution along one axis.
inline Index conv_output_extent(Index n, Index k, Index stride, Index pad) {
  const Index span = n + 2 * pad - k;
  return span < 0 ? 0 : span / stride + 1;
}

// [H, W, C] -> [C]
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x);

}  // namespace nat

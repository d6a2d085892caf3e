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

#include <array>
#include <cmath>
#include <vector>

#include "nat/neighborhood.hpp"
#include "nat/tensor.hpp"

namespace nat {

// Neighborhood attention operands use the layout [H, W, heads, d] for Q, K, V and
// outputs, [heads, 2L-1, 2L-1] for the relative positional bias table, and
// [H, W, heads, Lh * Lw] for attention weights, where Lh = min(L, H) and
// Lw = min(L, W). Weight slot m enumerates the window row-major.

/// Logit divisor for per-head channel count d.
inline double attention_scale(Index head_dim) { return std::sqrt(static_cast<double>(head_dim)); }

/// Pre-softmax logits (Q K^T + B) / scale, with the bias added as each
/// dot product is formed.
template <typename Scalar>
Tensor<Scalar> na_qk(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& bias,
                     const NeighborhoodSpec& spec);

/// Weighted sum of neighborhood values.
template <typename Scalar>
Tensor<Scalar> na_av(const Tensor<Scalar>& probs, const Tensor<Scalar>& v, const NeighborhoodSpec& spec);

template <typename Scalar>
Tensor<Scalar> na_forward(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                          const Tensor<Scalar>& bias, const NeighborhoodSpec& spec);

template <typename Scalar>
struct AttentionGrads {
  Tensor<Scalar> dq;
  Tensor<Scalar> dk;
  Tensor<Scalar> dv;
  Tensor<Scalar> dbias;
  // Gradient with respect to Q K^T + B before the division by scale, in the
  // attention-weight layout. dbias is the scatter of this tensor into the table.
  Tensor<Scalar> dlogits;
};

/// Exact gradients of na_forward given the upstream gradient dout.
template <typename Scalar>
AttentionGrads<Scalar> na_backward(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                   const Tensor<Scalar>& bias, const NeighborhoodSpec& spec,
                                   const Tensor<Scalar>& dout);

/// softmax(Q K^T / sqrt(d)) V over the whole token axis. Q, K, V are [M, d].
template <typename Scalar>
Tensor<Scalar> self_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v);

/// Dense neighborhood attention built from materialized neighborhoods: every
/// stride-1 window of K and V is extracted, the grid of windows is edge-replicated
/// back to H x W, and attention is evaluated on the resulting
/// [H, W, heads, d, Lh, Lw] tensors. Slow and memory hungry; used to check the
/// fused kernels.
template <typename Scalar>
Tensor<Scalar> na_reference(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                            const Tensor<Scalar>& bias, const NeighborhoodSpec& spec);

/// Neighbor sets produced by the extract-and-replicate route, applied to a map of
/// pixel coordinates. Entry i * W + j lists the keys of query (i, j) row-major.
std::vector<std::vector<Pixel>> reference_neighbor_indices(Index height, Index width, const NeighborhoodSpec& spec);

template <typename Scalar>
struct AttentionParams {
  Index heads = 1;
  Tensor<Scalar> qkv_weight;   // [C, 3C], output axis laid out [3][heads][d]
  Tensor<Scalar> qkv_bias;     // [3C]
  Tensor<Scalar> proj_weight;  // [C, C]
  Tensor<Scalar> proj_bias;    // [C]
  Tensor<Scalar> rel_bias;     // [heads, 2L-1, 2L-1]
};

/// Multi-head neighborhood attention on an [H, W, C] map.
template <typename Scalar>
Tensor<Scalar> mhna_layer(const Tensor<Scalar>& x, const AttentionParams<Scalar>& params,
                          const NeighborhoodSpec& spec);

// [H, W, 3C] -> three [H, W, heads, d] tensors.
template <typename Scalar>
std::array<Tensor<Scalar>, 3> split_qkv(const Tensor<Scalar>& qkv, Index heads);

}  // namespace nat

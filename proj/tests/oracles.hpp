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

// Deliberately naive versions of the library's kernels. They share no code
// with src/ beyond the Tensor container and use long double accumulators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <utility>
#include <vector>

#include "nat/tensor.hpp"

namespace oracle {

using nat::Index;
using nat::Tensor;

// The L consecutive indices containing i whose center is nearest to i, found by
// trying every placement. Returns the first index.
inline Index window_first(Index i, Index n, Index kernel) {
  if (kernel >= n) return 0;
  const Index half = (kernel - 1) / 2;
  Index best = -1;
  Index best_distance = std::numeric_limits<Index>::max();
  for (Index s = 0; s + kernel <= n; ++s) {
    if (i < s || i >= s + kernel) continue;
    const Index distance = std::llabs(s + half - i);
    if (distance < best_distance) {
      best_distance = distance;
      best = s;
    }
  }
  return best;
}

inline std::vector<std::pair<Index, Index>> neighbors(Index i, Index j, Index height, Index width, Index kernel) {
  const Index rows = std::min(kernel, height);
  const Index cols = std::min(kernel, width);
  const Index r0 = window_first(i, height, kernel);
  const Index c0 = window_first(j, width, kernel);
  std::vector<std::pair<Index, Index>> out;
  for (Index r = r0; r < r0 + rows; ++r) {
    for (Index c = c0; c < c0 + cols; ++c) out.emplace_back(r, c);
  }
  return out;
}

// softmax over keys of (q.k + bias[offset]) / sqrt(d), then a weighted sum of v.
template <typename Scalar>
Tensor<Scalar> neighborhood_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                      const Tensor<Scalar>& bias, Index kernel) {
  const Index height = q.dim(0);
  const Index width = q.dim(1);
  const Index heads = q.dim(2);
  const Index dim = q.dim(3);
  const long double scale = std::sqrt(static_cast<long double>(dim));
  Tensor<Scalar> out(q.shape());
  for (Index i = 0; i < height; ++i) {
    for (Index j = 0; j < width; ++j) {
      const auto keys = neighbors(i, j, height, width, kernel);
      for (Index h = 0; h < heads; ++h) {
        std::vector<long double> logits;
        for (const auto& [r, c] : keys) {
          long double dot = 0;
          for (Index e = 0; e < dim; ++e) dot += static_cast<long double>(q(i, j, h, e)) * k(r, c, h, e);
          dot += bias(h, r - i + kernel - 1, c - j + kernel - 1);
          logits.push_back(dot / scale);
        }
        const long double top = *std::max_element(logits.begin(), logits.end());
        long double total = 0;
        for (auto& x : logits) {
          x = std::exp(x - top);
          total += x;
        }
        for (Index e = 0; e < dim; ++e) {
          long double acc = 0;
          for (std::size_t m = 0; m < keys.size(); ++m) {
            acc += logits[m] / total * v(keys[m].first, keys[m].second, h, e);
          }
          out(i, j, h, e) = static_cast<Scalar>(acc);
        }
      }
    }
  }
  return out;
}

// Plain softmax attention over an [M, d] token list.
template <typename Scalar>
Tensor<Scalar> full_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v) {
  const Index tokens = q.dim(0);
  const Index dim = q.dim(1);
  const long double scale = std::sqrt(static_cast<long double>(dim));
  Tensor<Scalar> out(q.shape());
  for (Index a = 0; a < tokens; ++a) {
    std::vector<long double> w(static_cast<std::size_t>(tokens));
    long double top = -std::numeric_limits<long double>::infinity();
    for (Index b = 0; b < tokens; ++b) {
      long double dot = 0;
      for (Index e = 0; e < dim; ++e) dot += static_cast<long double>(q(a, e)) * k(b, e);
      w[static_cast<std::size_t>(b)] = dot / scale;
      top = std::max(top, w[static_cast<std::size_t>(b)]);
    }
    long double total = 0;
    for (auto& x : w) {
      x = std::exp(x - top);
      total += x;
    }
    for (Index e = 0; e < dim; ++e) {
      long double acc = 0;
      for (Index b = 0; b < tokens; ++b) acc += w[static_cast<std::size_t>(b)] / total * v(b, e);
      out(a, e) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

// Zero-padded cross-correlation, x [H, W, Cin], w [k, k, Cin, Cout].
template <typename Scalar>
Tensor<Scalar> conv(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b, Index stride,
                    Index pad) {
  const Index kernel = w.dim(0);
  const Index out_h = (x.dim(0) + 2 * pad - kernel) / stride + 1;
  const Index out_w = (x.dim(1) + 2 * pad - kernel) / stride + 1;
  Tensor<Scalar> out({out_h, out_w, w.dim(3)});
  for (Index oi = 0; oi < out_h; ++oi) {
    for (Index oj = 0; oj < out_w; ++oj) {
      for (Index co = 0; co < w.dim(3); ++co) {
        long double acc = b[co];
        for (Index ki = 0; ki < kernel; ++ki) {
          for (Index kj = 0; kj < kernel; ++kj) {
            const Index r = oi * stride + ki - pad;
            const Index c = oj * stride + kj - pad;
            if (r < 0 || c < 0 || r >= x.dim(0) || c >= x.dim(1)) continue;
            for (Index ci = 0; ci < x.dim(2); ++ci) acc += static_cast<long double>(x(r, c, ci)) * w(ki, kj, ci, co);
          }
        }
        out(oi, oj, co) = static_cast<Scalar>(acc);
      }
    }
  }
  return out;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  double worst = 0;
  for (Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return worst;
}

// Per-level spatial extent after the tokenizer and l downsamplers.
inline std::int64_t level_extent(std::int64_t input, int level) {
  std::int64_t n = input;
  for (int s = 0; s < level + 2; ++s) n = (n + 2 - 3) / 2 + 1;
  return n;
}

}  // namespace oracle

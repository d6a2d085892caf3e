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

#include <utility>
#include <vector>

#include "nat/tensor.hpp"

namespace nat {

/// Per-axis extent of the attention window. Odd and at least 3.
class NeighborhoodSpec {
 public:
  explicit NeighborhoodSpec(Index kernel);

  Index kernel() const { return kernel_; }
  Index radius() const { return (kernel_ - 1) / 2; }
  // Side of the relative positional bias table, 2L - 1.
  Index bias_extent() const { return 2 * kernel_ - 1; }
  // Window length along an axis of extent n.
  Index window_len(Index n) const { return std::min(kernel_, n); }

 private:
  Index kernel_;
};

/// Contiguous window [start, start + len) on one axis.
struct WindowGeometry {
  Index start;
  Index len;

  bool contains(Index p) const { return p >= start && p < start + len; }
  bool operator==(const WindowGeometry&) const = default;
};

/// Window of query i on an axis of extent n. Windows are centered where possible
/// and shifted inward at the borders so that every query keeps min(L, n) entries;
/// for L >= n the window is the whole axis.
WindowGeometry window_start(Index i, Index n, Index kernel);

using Pixel = std::pair<Index, Index>;

/// Row-major Cartesian product of the two axis windows of query (i, j).
std::vector<Pixel> neighborhood_indices(Index i, Index j, Index height, Index width, Index kernel);

/// Bias table coordinate (p - i) + (L - 1) for key p in the window of query i.
/// Relative offsets never exceed L - 1 in magnitude, so the result is in [0, 2L - 2].
Index rel_bias_index(Index i, Index p, Index kernel);

// As above, additionally checking that p lies in the window of i on an axis of extent n.
Index rel_bias_index(Index i, Index p, Index n, Index kernel);

}  // namespace nat

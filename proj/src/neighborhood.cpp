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

#include "nat/neighborhood.hpp"

#include <algorithm>
#include <string>

namespace nat {

namespace {
void check_kernel(Index kernel) {
  if (kernel < 3 || kernel % 2 == 0) {
    throw ConfigError("neighborhood size must be an odd integer >= 3, got " + std::to_string(kernel));
  }
}
}  // namespace

NeighborhoodSpec::NeighborhoodSpec(Index kernel) : kernel_(kernel) { check_kernel(kernel); }

WindowGeometry window_start(Index i, Index n, Index kernel) {
  check_kernel(kernel);
  if (n < 1 || i < 0 || i >= n) {
    throw IndexError("query index " + std::to_string(i) + " outside axis of extent " + std::to_string(n));
  }
  if (kernel >= n) return {0, n};
  const Index radius = (kernel - 1) / 2;
  return {std::clamp(i - radius, Index{0}, n - kernel), kernel};
}

std::vector<Pixel> neighborhood_indices(Index i, Index j, Index height, Index width, Index kernel) {
  const WindowGeometry rows = window_start(i, height, kernel);
  const WindowGeometry cols = window_start(j, width, kernel);
  std::vector<Pixel> out;
  out.reserve(static_cast<std::size_t>(rows.len * cols.len));
  for (Index r = rows.start; r < rows.start + rows.len; ++r) {
    for (Index c = cols.start; c < cols.start + cols.len; ++c) out.emplace_back(r, c);
  }
  return out;
}

Index rel_bias_index(Index i, Index p, Index kernel) {
  check_kernel(kernel);
  const Index offset = p - i;
  if (offset < -(kernel - 1) || offset > kernel - 1) {
    throw IndexError("key " + std::to_string(p) + " cannot lie in the window of query " + std::to_string(i) +
                     " for neighborhood size " + std::to_string(kernel));
  }
  return offset + kernel - 1;
}

Index rel_bias_index(Index i, Index p, Index n, Index kernel) {
  if (!window_start(i, n, kernel).contains(p)) {
    throw IndexError("key " + std::to_string(p) + " is outside the window of query " + std::to_string(i));
  }
  return rel_bias_index(i, p, kernel);
}

}  // namespace nat

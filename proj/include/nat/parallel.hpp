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

#include <cstddef>
#include <functional>

namespace nat {

/// Worker count used by parallel_for. Defaults to the hardware concurrency.
int num_threads();
void set_num_threads(int n);

/// Runs body(begin, end) over contiguous shards of [0, count). Shards never
/// overlap, so any kernel whose outputs are owned by exactly one index computes
/// identical bits for every worker count.
void parallel_for(std::ptrdiff_t count, const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& body,
                  std::ptrdiff_t min_grain = 1);

}  // namespace nat

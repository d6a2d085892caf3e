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

#include <cstdint>
#include <map>
#include <string>

#include "nat/errors.hpp"
#include "nat/model.hpp"

namespace nat {

// Analytic cost model. One multiply-accumulate counts as one operation. Softmax,
// normalization divisions and activations are left out of `macs` and reported
// separately under `estimates`.
struct CostReport {
  std::int64_t macs = 0;
  std::int64_t memory_scalars = 0;
  std::map<std::string, std::int64_t> mac_terms;
  std::map<std::string, std::int64_t> memory_terms;
  std::map<std::string, std::int64_t> estimates;

  void add_macs(const std::string& term, std::int64_t value);
  void add_memory(const std::string& term, std::int64_t value);

  // {"macs":..,"memory_scalars":..,"breakdown":{"macs":{..},"memory_scalars":{..},"estimates":{..}}}
  std::string to_json() const;
};

// Raised when window attention would need the feature map padded to a multiple of
// the window size.
class PaddingRequiredError : public Error {
 public:
  using Error::Error;
};

/// 3HWC^2 + 2H^2W^2C MACs; 3HWC + H^2W^2 scalars.
CostReport cost_self_attention(std::int64_t height, std::int64_t width, std::int64_t channels);

/// Non-overlapping L x L windows: 3HWC^2 + 2HWCL^2 MACs; 3HWC + HWL^2 scalars.
/// Throws PaddingRequiredError unless L divides H and W.
CostReport cost_window_attention(std::int64_t height, std::int64_t width, std::int64_t channels, std::int64_t kernel);
bool window_requires_padding(std::int64_t height, std::int64_t width, std::int64_t kernel);

/// 3HWC^2 + 2HWC*Lw^2 MACs; 3HWC + HW*Lw^2 scalars with Lw^2 = min(L,H) min(L,W).
CostReport cost_na(std::int64_t height, std::int64_t width, std::int64_t channels, std::int64_t kernel);

/// HWC^2L^2 MACs; HWC scalars.
CostReport cost_conv(std::int64_t height, std::int64_t width, std::int64_t channels, std::int64_t kernel);

/// Smallest C with 3C^2 + 2CL^2 < C^2 L^2, the per-pixel condition for NA to need
/// fewer MACs than an L x L convolution with C input and output channels.
std::int64_t crossover_channels(std::int64_t kernel);

struct ModelStats {
  std::int64_t params = 0;
  CostReport cost;

  std::string to_json() const;
};

/// Parameter count and per-layer MAC total at input resolution H x W.
ModelStats model_stats(const NATConfig& config, std::int64_t height, std::int64_t width);

}  // namespace nat

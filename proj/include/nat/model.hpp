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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nat/attention.hpp"
#include "nat/io.hpp"
#include "nat/tensor.hpp"

namespace nat {

inline constexpr int kLevels = 4;

/// Architecture hyperparameters. Level l in [0, 4) has base_heads * 2^l heads of
/// head_dim channels each.
struct NATConfig {
  std::array<Index, kLevels> depths{};
  Index head_dim = 32;
  Index base_heads = 2;
  double mlp_ratio = 3.0;
  Index kernel = 7;
  Index num_classes = 1000;
  std::optional<double> layer_scale;

  Index heads(int level) const { return base_heads << level; }
  Index channels(int level) const { return head_dim * heads(level); }
  Index mlp_hidden(int level) const;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  bool operator==(const NATConfig&) const = default;
};

/// mini, tiny, small, base, desk.
NATConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Parses the JSON config object. A "preset" key selects a registered variant and
/// the remaining keys are then ignored; otherwise every field must be present and
/// no other keys are accepted.
NATConfig parse_config_json(const std::string& text);
std::string config_to_json(const NATConfig& config);
NATConfig load_config(const std::string& path);

struct TensorSpec {
  std::string name;
  Shape shape;
};

/// Every parameter tensor implied by the config, in initialization order.
std::vector<TensorSpec> weight_manifest(const NATConfig& config);

/// Exact scalar parameter count.
std::int64_t count_params(const NATConfig& config);

/// Named parameter store. Immutable once built; forward passes only read it.
template <typename Scalar>
class NATWeights {
 public:
  using Map = std::map<std::string, Tensor<Scalar>>;

  NATWeights() = default;
  explicit NATWeights(Map tensors) : tensors_(std::move(tensors)) {}

  const Tensor<Scalar>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Map& tensors() const { return tensors_; }
  Map& mutable_tensors() { return tensors_; }

  /// Throws ConfigError naming every missing, mis-shaped and orphan tensor.
  void check_against(const NATConfig& config) const;

 private:
  Map tensors_;
};

/// Random initialization: truncated normal (stddev 0.02) for convolution, linear and
/// bias-table weights; zeros for additive biases and norm offsets; ones for norm
/// gains; the config's layer-scale value for layer-scale vectors.
template <typename Scalar>
NATWeights<Scalar> init_weights(const NATConfig& config, std::uint64_t seed);

template <typename Scalar>
void save_weights(const std::string& path, const NATWeights<Scalar>& weights);
template <typename Scalar>
NATWeights<Scalar> load_weights(const std::string& path);

template <typename Scalar>
struct BlockWeights {
  Tensor<Scalar> norm1_weight, norm1_bias;
  AttentionParams<Scalar> attn;
  Tensor<Scalar> norm2_weight, norm2_bias;
  Tensor<Scalar> fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  std::optional<Tensor<Scalar>> gamma1, gamma2;
};

template <typename Scalar>
BlockWeights<Scalar> block_weights(const NATWeights<Scalar>& weights, const NATConfig& config, int level, Index block);

std::string block_prefix(int level, Index block);

/// Two stride-2 3x3 convolutions: [H, W, 3] -> [H/4, W/4, C0]. H and W must be
/// multiples of 32.
template <typename Scalar>
Tensor<Scalar> tokenizer_forward(const Tensor<Scalar>& image, const NATWeights<Scalar>& weights);

/// x + s1 * MHNA(LN(x)), then + s2 * MLP(LN(.)); s1, s2 are the layer-scale vectors
/// when present.
template <typename Scalar>
Tensor<Scalar> nat_block_forward(const Tensor<Scalar>& x, const BlockWeights<Scalar>& block,
                                 const NeighborhoodSpec& spec);

/// Stride-2 3x3 convolution, [h, w, C] -> [h/2, w/2, 2C]. h and w must be even.
template <typename Scalar>
Tensor<Scalar> downsample_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias);

template <typename Scalar>
struct FeaturePyramid {
  std::array<Tensor<Scalar>, kLevels> levels;
};

/// Per-level outputs before each downsampler, at H/4 .. H/32.
template <typename Scalar>
FeaturePyramid<Scalar> extract_pyramid(const Tensor<Scalar>& image, const NATConfig& config,
                                       const NATWeights<Scalar>& weights);

/// Class logits: levels, final norm, average pool, linear head.
template <typename Scalar>
Tensor<Scalar> nat_forward(const Tensor<Scalar>& image, const NATConfig& config, const NATWeights<Scalar>& weights);

// Logits from the last pyramid level.
template <typename Scalar>
Tensor<Scalar> classifier_forward(const Tensor<Scalar>& last_level, const NATWeights<Scalar>& weights);

}  // namespace nat

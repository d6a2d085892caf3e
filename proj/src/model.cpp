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

#include "nat/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nat/ops.hpp"
#include "nat/rng.hpp"

namespace nat {

Index NATConfig::mlp_hidden(int level) const {
  return static_cast<Index>(std::llround(mlp_ratio * static_cast<double>(channels(level))));
}

void NATConfig::validate() const {
  for (int l = 0; l < kLevels; ++l) {
    if (depths[static_cast<std::size_t>(l)] < 1) throw ConfigError("every level needs at least one block");
  }
  if (head_dim < 1 || base_heads < 1) throw ConfigError("head_dim and base_heads must be positive");
  if (channels(0) % 2 != 0) throw ConfigError("level-0 channel count must be even for the tokenizer");
  if (!(mlp_ratio > 0.0) || mlp_hidden(0) < 1) throw ConfigError("mlp_ratio must be positive");
  static_cast<void>(NeighborhoodSpec(kernel));
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (layer_scale && !(*layer_scale > 0.0)) throw ConfigError("layer_scale must be positive when set");
}

NATConfig preset_config(std::string_view name) {
  NATConfig c;
  c.head_dim = 32;
  c.kernel = 7;
  c.num_classes = 1000;
  if (name == "mini") {
    c.depths = {3, 4, 6, 5};
    c.base_heads = 2;
    c.mlp_ratio = 3.0;
  } else if (name == "tiny") {
    c.depths = {3, 4, 18, 5};
    c.base_heads = 2;
    c.mlp_ratio = 3.0;
  } else if (name == "small") {
    c.depths = {3, 4, 18, 5};
    c.base_heads = 3;
    c.mlp_ratio = 2.0;
    c.layer_scale = 1e-5;
  } else if (name == "base") {
    c.depths = {3, 4, 18, 5};
    c.base_heads = 4;
    c.mlp_ratio = 2.0;
    c.layer_scale = 1e-5;
  } else if (name == "desk") {
    c.depths = {1, 1, 1, 1};
    c.head_dim = 8;
    c.base_heads = 2;
    c.mlp_ratio = 2.0;
    c.kernel = 3;
    c.num_classes = 10;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> preset_names() { return {"mini", "tiny", "small", "base", "desk"}; }

NATConfig parse_config_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("\"preset\" must be a string");
    return preset_config(j["preset"].get<std::string>());
  }

  static const std::set<std::string> keys{"depths",      "head_dim",    "base_heads", "mlp_ratio",
                                          "kernel",      "num_classes", "layer_scale"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown config key \"" + key + "\"");
  }
  for (const auto& key : keys) {
    if (!j.contains(key)) throw ConfigError("config is missing \"" + key + "\"");
  }
  NATConfig c;
  try {
    const auto& depths = j.at("depths");
    if (!depths.is_array() || depths.size() != kLevels) throw ConfigError("\"depths\" must list 4 integers");
    for (int l = 0; l < kLevels; ++l) c.depths[static_cast<std::size_t>(l)] = depths[l].get<Index>();
    c.head_dim = j.at("head_dim").get<Index>();
    c.base_heads = j.at("base_heads").get<Index>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.kernel = j.at("kernel").get<Index>();
    c.num_classes = j.at("num_classes").get<Index>();
    if (!j.at("layer_scale").is_null()) c.layer_scale = j.at("layer_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const NATConfig& c) {
  nlohmann::json j;
  j["depths"] = c.depths;
  j["head_dim"] = c.head_dim;
  j["base_heads"] = c.base_heads;
  j["mlp_ratio"] = c.mlp_ratio;
  j["kernel"] = c.kernel;
  j["num_classes"] = c.num_classes;
  j["layer_scale"] = c.layer_scale ? nlohmann::json(*c.layer_scale) : nlohmann::json(nullptr);
  return j.dump();
}

NATConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_json(buffer.str());
}

std::string block_prefix(int level, Index block) {
  return "levels." + std::to_string(level) + ".blocks." + std::to_string(block) + ".";
}

std::vector<TensorSpec> weight_manifest(const NATConfig& config) {
  config.validate();
  std::vector<TensorSpec> specs;
  const Index c0 = config.channels(0);
  specs.push_back({"tokenizer.conv0.weight", {3, 3, 3, c0 / 2}});
  specs.push_back({"tokenizer.conv0.bias", {c0 / 2}});
  specs.push_back({"tokenizer.conv1.weight", {3, 3, c0 / 2, c0}});
  specs.push_back({"tokenizer.conv1.bias", {c0}});
  const Index table = 2 * config.kernel - 1;
  for (int l = 0; l < kLevels; ++l) {
    const Index c = config.channels(l);
    const Index hidden = config.mlp_hidden(l);
    for (Index b = 0; b < config.depths[static_cast<std::size_t>(l)]; ++b) {
      const std::string p = block_prefix(l, b);
      specs.push_back({p + "norm1.weight", {c}});
      specs.push_back({p + "norm1.bias", {c}});
      specs.push_back({p + "attn.qkv.weight", {c, 3 * c}});
      specs.push_back({p + "attn.qkv.bias", {3 * c}});
      specs.push_back({p + "attn.rpb", {config.heads(l), table, table}});
      specs.push_back({p + "attn.proj.weight", {c, c}});
      specs.push_back({p + "attn.proj.bias", {c}});
      specs.push_back({p + "norm2.weight", {c}});
      specs.push_back({p + "norm2.bias", {c}});
      specs.push_back({p + "mlp.fc1.weight", {c, hidden}});
      specs.push_back({p + "mlp.fc1.bias", {hidden}});
      specs.push_back({p + "mlp.fc2.weight", {hidden, c}});
      specs.push_back({p + "mlp.fc2.bias", {c}});
      if (config.layer_scale) {
        specs.push_back({p + "gamma1", {c}});
        specs.push_back({p + "gamma2", {c}});
      }
    }
    if (l + 1 < kLevels) {
      const std::string p = "levels." + std::to_string(l) + ".downsample.";
      specs.push_back({p + "weight", {3, 3, c, 2 * c}});
      specs.push_back({p + "bias", {2 * c}});
    }
  }
  const Index last = config.channels(kLevels - 1);
  specs.push_back({"norm.weight", {last}});
  specs.push_back({"norm.bias", {last}});
  specs.push_back({"head.weight", {last, config.num_classes}});
  specs.push_back({"head.bias", {config.num_classes}});
  return specs;
}

std::int64_t count_params(const NATConfig& config) {
  std::int64_t total = 0;
  for (const auto& spec : weight_manifest(config)) total += shape_size(spec.shape);
  return total;
}

template <typename Scalar>
const Tensor<Scalar>& NATWeights<Scalar>::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("weights are missing tensor '" + name + "'");
  return it->second;
}

template <typename Scalar>
void NATWeights<Scalar>::check_against(const NATConfig& config) const {
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& spec : weight_manifest(config)) {
    expected.insert(spec.name);
    auto it = tensors_.find(spec.name);
    if (it == tensors_.end()) {
      problems.push_back("missing " + spec.name);
    } else if (it->second.shape() != spec.shape) {
      problems.push_back(spec.name + " has shape " + shape_string(it->second.shape()) + ", expected " +
                         shape_string(spec.shape));
    }
  }
  for (const auto& [name, _] : tensors_) {
    if (!expected.count(name)) problems.push_back("orphan " + name);
  }
  if (problems.empty()) return;
  std::string message = "weights do not match config:";
  for (const auto& p : problems) message += "\n  " + p;
  throw ConfigError(message);
}

namespace {
bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

template <typename Scalar>
NATWeights<Scalar> init_weights(const NATConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  typename NATWeights<Scalar>::Map tensors;
  for (const auto& spec : weight_manifest(config)) {
    const bool is_norm = spec.name.find("norm") != std::string::npos;
    Tensor<Scalar> t(spec.shape);
    if (ends_with(spec.name, "gamma1") || ends_with(spec.name, "gamma2")) {
      t = Tensor<Scalar>::constant(spec.shape, static_cast<Scalar>(*config.layer_scale));
    } else if (is_norm && ends_with(spec.name, ".weight")) {
      t = Tensor<Scalar>::constant(spec.shape, Scalar(1));
    } else if (ends_with(spec.name, ".weight") || ends_with(spec.name, ".rpb")) {
      t = random_truncated_normal<Scalar>(spec.shape, rng, 0.02);
    }
    tensors.emplace(spec.name, std::move(t));
  }
  return NATWeights<Scalar>(std::move(tensors));
}

template <typename Scalar>
void save_weights(const std::string& path, const NATWeights<Scalar>& weights) {
  save_natw(path, weights.tensors());
}

template <typename Scalar>
NATWeights<Scalar> load_weights(const std::string& path) {
  typename NATWeights<Scalar>::Map tensors;
  for (auto& [name, t] : load_natw(path)) tensors.emplace(name, to_precision<Scalar>(t));
  return NATWeights<Scalar>(std::move(tensors));
}

template <typename Scalar>
BlockWeights<Scalar> block_weights(const NATWeights<Scalar>& weights, const NATConfig& config, int level,
                                   Index block) {
  const std::string p = block_prefix(level, block);
  BlockWeights<Scalar> b;
  b.norm1_weight = weights.get(p + "norm1.weight");
  b.norm1_bias = weights.get(p + "norm1.bias");
  b.attn.heads = config.heads(level);
  b.attn.qkv_weight = weights.get(p + "attn.qkv.weight");
  b.attn.qkv_bias = weights.get(p + "attn.qkv.bias");
  b.attn.proj_weight = weights.get(p + "attn.proj.weight");
  b.attn.proj_bias = weights.get(p + "attn.proj.bias");
  b.attn.rel_bias = weights.get(p + "attn.rpb");
  b.norm2_weight = weights.get(p + "norm2.weight");
  b.norm2_bias = weights.get(p + "norm2.bias");
  b.fc1_weight = weights.get(p + "mlp.fc1.weight");
  b.fc1_bias = weights.get(p + "mlp.fc1.bias");
  b.fc2_weight = weights.get(p + "mlp.fc2.weight");
  b.fc2_bias = weights.get(p + "mlp.fc2.bias");
  if (config.layer_scale) {
    b.gamma1 = weights.get(p + "gamma1");
    b.gamma2 = weights.get(p + "gamma2");
  }
  return b;
}

template <typename Scalar>
Tensor<Scalar> tokenizer_forward(const Tensor<Scalar>& image, const NATWeights<Scalar>& weights) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("image must be [H,W,3], got " + shape_string(image.shape()));
  }
  if (image.dim(0) % 32 != 0 || image.dim(1) % 32 != 0) {
    throw ConfigError("image extents must be multiples of 32, got " + shape_string(image.shape()));
  }
  Tensor<Scalar> x = conv2d(image, weights.get("tokenizer.conv0.weight"), weights.get("tokenizer.conv0.bias"), 2, 1);
  return conv2d(x, weights.get("tokenizer.conv1.weight"), weights.get("tokenizer.conv1.bias"), 2, 1);
}

namespace {

// x += scale * branch, where scale is a per-channel vector or absent.
template <typename Scalar>
void add_residual(Tensor<Scalar>& x, const Tensor<Scalar>& branch, const std::optional<Tensor<Scalar>>& scale) {
  if (branch.shape() != x.shape()) {
    throw DimensionError("residual branch shape " + shape_string(branch.shape()) + " differs from " +
                         shape_string(x.shape()));
  }
  if (scale) {
    x.matrix().array() += branch.matrix().array().rowwise() * scale->matrix().row(0).array();
  } else {
    x.matrix() += branch.matrix();
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> nat_block_forward(const Tensor<Scalar>& x, const BlockWeights<Scalar>& block,
                                 const NeighborhoodSpec& spec) {
  Tensor<Scalar> out = x;
  add_residual(out, mhna_layer(layer_norm(x, block.norm1_weight, block.norm1_bias), block.attn, spec), block.gamma1);
  Tensor<Scalar> hidden = gelu(linear(layer_norm(out, block.norm2_weight, block.norm2_bias), block.fc1_weight,
                                      block.fc1_bias));
  add_residual(out, linear(hidden, block.fc2_weight, block.fc2_bias), block.gamma2);
  return out;
}

template <typename Scalar>
Tensor<Scalar> downsample_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (x.rank() != 3) throw DimensionError("downsampler expects [h,w,C], got " + shape_string(x.shape()));
  if (x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0) {
    throw ConfigError("downsampler needs even spatial extents, got " + shape_string(x.shape()));
  }
  return conv2d(x, weight, bias, 2, 1);
}

template <typename Scalar>
FeaturePyramid<Scalar> extract_pyramid(const Tensor<Scalar>& image, const NATConfig& config,
                                       const NATWeights<Scalar>& weights) {
  weights.check_against(config);
  const NeighborhoodSpec spec(config.kernel);
  FeaturePyramid<Scalar> pyramid;
  Tensor<Scalar> x = tokenizer_forward(image, weights);
  for (int l = 0; l < kLevels; ++l) {
    if (l > 0) {
      const std::string p = "levels." + std::to_string(l - 1) + ".downsample.";
      x = downsample_forward(x, weights.get(p + "weight"), weights.get(p + "bias"));
    }
    for (Index b = 0; b < config.depths[static_cast<std::size_t>(l)]; ++b) {
      x = nat_block_forward(x, block_weights(weights, config, l, b), spec);
    }
    pyramid.levels[static_cast<std::size_t>(l)] = x;
  }
  return pyramid;
}

template <typename Scalar>
Tensor<Scalar> classifier_forward(const Tensor<Scalar>& last_level, const NATWeights<Scalar>& weights) {
  const Tensor<Scalar> pooled =
      global_avg_pool(layer_norm(last_level, weights.get("norm.weight"), weights.get("norm.bias")));
  const Tensor<Scalar> logits =
      linear(pooled.reshaped({1, pooled.size()}), weights.get("head.weight"), weights.get("head.bias"));
  return logits.reshaped({logits.size()});
}

template <typename Scalar>
Tensor<Scalar> nat_forward(const Tensor<Scalar>& image, const NATConfig& config, const NATWeights<Scalar>& weights) {
  FeaturePyramid<Scalar> pyramid = extract_pyramid(image, config, weights);
  return classifier_forward(pyramid.levels[kLevels - 1], weights);
}

#define NAT_INSTANTIATE_MODEL(S)                                                                            \
  template class NATWeights<S>;                                                                             \
  template NATWeights<S> init_weights(const NATConfig&, std::uint64_t);                                     \
  template void save_weights(const std::string&, const NATWeights<S>&);                                     \
  template NATWeights<S> load_weights(const std::string&);                                                  \
  template BlockWeights<S> block_weights(const NATWeights<S>&, const NATConfig&, int, Index);               \
  template Tensor<S> tokenizer_forward(const Tensor<S>&, const NATWeights<S>&);                             \
  template Tensor<S> nat_block_forward(const Tensor<S>&, const BlockWeights<S>&, const NeighborhoodSpec&);   \
  template Tensor<S> downsample_forward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);              \
  template FeaturePyramid<S> extract_pyramid(const Tensor<S>&, const NATConfig&, const NATWeights<S>&);     \
  template Tensor<S> classifier_forward(const Tensor<S>&, const NATWeights<S>&);                            \
  template Tensor<S> nat_forward(const Tensor<S>&, const NATConfig&, const NATWeights<S>&);

NAT_INSTANTIATE_MODEL(float)
NAT_INSTANTIATE_MODEL(double)

#undef NAT_INSTANTIATE_MODEL

}  // namespace nat

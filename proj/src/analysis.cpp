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

#include "nat/analysis.hpp"

#include <algorithm>
#include <string>

#include <json.hpp>

#include "nat/neighborhood.hpp"
#include "nat/ops.hpp"

namespace nat {

namespace {

std::int64_t mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw ConfigError("cost expression overflows 64-bit integers");
  return out;
}

template <typename... Rest>
std::int64_t mul(std::int64_t a, std::int64_t b, Rest... rest) {
  return mul(mul(a, b), rest...);
}

std::int64_t add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw ConfigError("cost expression overflows 64-bit integers");
  return out;
}

void check_extents(std::int64_t height, std::int64_t width, std::int64_t channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("cost model extents must be positive, got H=" + std::to_string(height) +
                      " W=" + std::to_string(width) + " C=" + std::to_string(channels));
  }
}

nlohmann::json terms_json(const std::map<std::string, std::int64_t>& terms) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : terms) j[k] = v;
  return j;
}

nlohmann::json report_json(const CostReport& r) {
  return {{"macs", r.macs},
          {"memory_scalars", r.memory_scalars},
          {"breakdown",
           {{"macs", terms_json(r.mac_terms)},
            {"memory_scalars", terms_json(r.memory_terms)},
            {"estimates", terms_json(r.estimates)}}}};
}

}  // namespace

void CostReport::add_macs(const std::string& term, std::int64_t value) {
  mac_terms[term] = add(mac_terms[term], value);
  macs = add(macs, value);
}

void CostReport::add_memory(const std::string& term, std::int64_t value) {
  memory_terms[term] = add(memory_terms[term], value);
  memory_scalars = add(memory_scalars, value);
}

std::string CostReport::to_json() const { return report_json(*this).dump(); }

std::string ModelStats::to_json() const {
  nlohmann::json j = report_json(cost);
  j["params"] = params;
  return j.dump();
}

CostReport cost_self_attention(std::int64_t height, std::int64_t width, std::int64_t channels) {
  check_extents(height, width, channels);
  const std::int64_t pixels = mul(height, width);
  CostReport r;
  r.add_macs("qkv_projection", mul(3, pixels, channels, channels));
  r.add_macs("attention_weights", mul(pixels, pixels, channels));
  r.add_macs("attention_values", mul(pixels, pixels, channels));
  r.add_memory("qkv", mul(3, pixels, channels));
  r.add_memory("attention_weights", mul(pixels, pixels));
  r.estimates["softmax_exp"] = mul(pixels, pixels);
  return r;
}

bool window_requires_padding(std::int64_t height, std::int64_t width, std::int64_t kernel) {
  return kernel < 1 || height % kernel != 0 || width % kernel != 0;
}

CostReport cost_window_attention(std::int64_t height, std::int64_t width, std::int64_t channels,
                                 std::int64_t kernel) {
  check_extents(height, width, channels);
  if (kernel < 1) throw ConfigError("window size must be positive");
  if (window_requires_padding(height, width, kernel)) {
    throw PaddingRequiredError("window size " + std::to_string(kernel) + " does not divide " +
                               std::to_string(height) + "x" + std::to_string(width) +
                               "; the feature map would need zero padding");
  }
  const std::int64_t pixels = mul(height, width);
  const std::int64_t window = mul(kernel, kernel);
  CostReport r;
  r.add_macs("qkv_projection", mul(3, pixels, channels, channels));
  r.add_macs("attention_weights", mul(pixels, channels, window));
  r.add_macs("attention_values", mul(pixels, channels, window));
  r.add_memory("qkv", mul(3, pixels, channels));
  r.add_memory("attention_weights", mul(pixels, window));
  r.estimates["softmax_exp"] = mul(pixels, window);
  return r;
}

CostReport cost_na(std::int64_t height, std::int64_t width, std::int64_t channels, std::int64_t kernel) {
  check_extents(height, width, channels);
  const NeighborhoodSpec spec(kernel);
  const std::int64_t pixels = mul(height, width);
  const std::int64_t window = mul(spec.window_len(height), spec.window_len(width));
  CostReport r;
  r.add_macs("qkv_projection", mul(3, pixels, channels, channels));
  r.add_macs("attention_weights", mul(pixels, channels, window));
  r.add_macs("attention_values", mul(pixels, channels, window));
  r.add_memory("qkv", mul(3, pixels, channels));
  r.add_memory("attention_weights", mul(pixels, window));
  r.estimates["softmax_exp"] = mul(pixels, window);
  return r;
}

CostReport cost_conv(std::int64_t height, std::int64_t width, std::int64_t channels, std::int64_t kernel) {
  check_extents(height, width, channels);
  if (kernel < 1) throw ConfigError("kernel size must be positive");
  CostReport r;
  r.add_macs("convolution", mul(height, width, channels, channels, kernel, kernel));
  r.add_memory("output", mul(height, width, channels));
  return r;
}

std::int64_t crossover_channels(std::int64_t kernel) {
  const NeighborhoodSpec spec(kernel);
  // 3C + 2L^2 < C L^2  <=>  C > 2L^2 / (L^2 - 3), and L^2 - 3 > 0 for L >= 3.
  const std::int64_t area = mul(kernel, kernel);
  return mul(2, area) / (area - 3) + 1;
}

ModelStats model_stats(const NATConfig& config, std::int64_t height, std::int64_t width) {
  config.validate();
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("input resolution must be a positive multiple of 32, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  ModelStats stats;
  stats.params = count_params(config);
  CostReport& r = stats.cost;
  const NeighborhoodSpec spec(config.kernel);

  auto conv_macs = [](std::int64_t out_h, std::int64_t out_w, std::int64_t cin, std::int64_t cout) {
    return mul(out_h, out_w, cin, cout, 9);
  };

  const std::int64_t c0 = config.channels(0);
  std::int64_t h = conv_output_extent(height, 3, 2, 1);
  std::int64_t w = conv_output_extent(width, 3, 2, 1);
  r.add_macs("tokenizer", conv_macs(h, w, 3, c0 / 2));
  h = conv_output_extent(h, 3, 2, 1);
  w = conv_output_extent(w, 3, 2, 1);
  r.add_macs("tokenizer", conv_macs(h, w, c0 / 2, c0));

  for (int l = 0; l < kLevels; ++l) {
    const std::int64_t c = config.channels(l);
    const std::int64_t heads = config.heads(l);
    const std::int64_t hidden = config.mlp_hidden(l);
    if (l > 0) {
      const std::int64_t out_h = conv_output_extent(h, 3, 2, 1);
      const std::int64_t out_w = conv_output_extent(w, 3, 2, 1);
      r.add_macs("downsample", conv_macs(out_h, out_w, c / 2, c));
      h = out_h;
      w = out_w;
    }
    const std::int64_t pixels = mul(h, w);
    const std::int64_t window = mul(spec.window_len(h), spec.window_len(w));
    for (std::int64_t b = 0; b < config.depths[static_cast<std::size_t>(l)]; ++b) {
      r.add_macs("norm", mul(2, pixels, c));
      r.add_macs("qkv_projection", mul(3, pixels, c, c));
      r.add_macs("attention", mul(2, pixels, c, window));
      r.add_macs("output_projection", mul(pixels, c, c));
      r.add_macs("mlp", mul(2, pixels, c, hidden));
      if (config.layer_scale) r.add_macs("layer_scale", mul(2, pixels, c));
      r.add_memory("qkv", mul(3, pixels, c));
      r.add_memory("attention_weights", mul(pixels, heads, window));
      r.estimates["softmax_exp"] += mul(pixels, heads, window);
      r.estimates["gelu"] += mul(pixels, hidden);
    }
  }
  const std::int64_t last = config.channels(kLevels - 1);
  r.add_macs("norm", mul(h, w, last));
  r.add_macs("classifier", mul(last, config.num_classes));
  return stats;
}

}  // namespace nat

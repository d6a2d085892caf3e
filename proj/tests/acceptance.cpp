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

// Acceptance suite. One line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "nat/analysis.hpp"
#include "nat/attention.hpp"
#include "nat/harness.hpp"
#include "nat/model.hpp"
#include "nat/neighborhood.hpp"
#include "nat/parallel.hpp"
#include "nat/rng.hpp"
#include "oracles.hpp"

using namespace nat;

namespace {

struct Outcome {
  bool passed = false;
  double measured = 0;
  double tolerance = 0;
  std::string note;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Criterion {
  int id;
  std::string title;
  double time_limit;  // seconds; 0 for none
  std::function<Outcome()> run;
};

template <typename Scalar>
struct Qkv {
  Tensor<Scalar> q, k, v, bias;
};

template <typename Scalar>
Qkv<Scalar> random_qkv(Rng& rng, Index h, Index w, Index heads, Index d, Index kernel, bool zero_bias = false) {
  const Shape s{h, w, heads, d};
  const Index t = 2 * kernel - 1;
  Qkv<Scalar> in{random_normal<Scalar>(s, rng), random_normal<Scalar>(s, rng), random_normal<Scalar>(s, rng),
                 Tensor<Scalar>({heads, t, t})};
  if (!zero_bias) in.bias = random_normal<Scalar>({heads, t, t}, rng, 0.5);
  return in;
}

template <typename Scalar>
Tensor<Scalar> head_slice(const Tensor<Scalar>& t, Index head) {
  const Index pixels = t.dim(0) * t.dim(1);
  Tensor<Scalar> out({pixels, t.dim(3)});
  for (Index p = 0; p < pixels; ++p) {
    for (Index e = 0; e < t.dim(3); ++e) out(p, e) = t[(p * t.dim(2) + head) * t.dim(3) + e];
  }
  return out;
}

template <typename Scalar>
double sa_equivalence_error(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (Index heads : {1, 2}) {
    for (Index kernel : {5, 7}) {
      const auto in = random_qkv<Scalar>(rng, 5, 5, heads, 8, kernel, true);
      const Tensor<Scalar> na = na_forward(in.q, in.k, in.v, in.bias, NeighborhoodSpec(kernel));
      for (Index h = 0; h < heads; ++h) {
        const Tensor<Scalar> sa = self_attention(head_slice(in.q, h), head_slice(in.k, h), head_slice(in.v, h));
        worst = std::max(worst, oracle::max_abs_diff(head_slice(na, h), sa));
      }
    }
  }
  return worst;
}

Outcome criterion_sa() {
  const double f32 = sa_equivalence_error<float>(101);
  const double f64 = sa_equivalence_error<double>(101);
  Outcome o;
  o.passed = f32 <= 1e-5 && f64 <= 1e-12;
  o.measured = std::max(f32 / 1e-5, f64 / 1e-12);
  o.tolerance = 1.0;
  o.note = "f32 err " + sci(f32) + " (tol 1e-5), f64 err " + sci(f64) + " (tol 1e-12)";
  return o;
}

template <typename Scalar>
double oracle_grid_error(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (Index h = 3; h <= 12; ++h) {
    for (Index w = 3; w <= 12; ++w) {
      for (Index kernel : {3, 5, 7}) {
        for (Index heads : {1, 2, 4}) {
          for (Index d : {2, 4, 8}) {
            const auto in = random_qkv<Scalar>(rng, h, w, heads, d, kernel);
            const NeighborhoodSpec spec(kernel);
            worst = std::max(worst, oracle::max_abs_diff(na_forward(in.q, in.k, in.v, in.bias, spec),
                                                         na_reference(in.q, in.k, in.v, in.bias, spec)));
          }
        }
      }
    }
  }
  return worst;
}

Outcome criterion_oracle() {
  const double f32 = oracle_grid_error<float>(202);
  const double f64 = oracle_grid_error<double>(202);
  bool sets = true;
  for (Index h = 3; h <= 12; ++h) {
    for (Index w = 3; w <= 12; ++w) {
      for (Index kernel : {3, 5, 7}) {
        const auto ref = reference_neighbor_indices(h, w, NeighborhoodSpec(kernel));
        for (Index i = 0; i < h; ++i) {
          for (Index j = 0; j < w; ++j) {
            sets = sets && ref[static_cast<std::size_t>(i * w + j)] == neighborhood_indices(i, j, h, w, kernel);
          }
        }
      }
    }
  }
  Outcome o;
  o.measured = std::max(f32, f64);
  o.tolerance = 1e-6;
  o.passed = o.measured <= o.tolerance && sets;
  o.note = "2700 cases per precision; neighbor sets " + std::string(sets ? "identical" : "DIFFER");
  return o;
}

Outcome criterion_gradient() {
  Rng rng(303);
  double worst = 0;
  for (int t = 0; t < 3; ++t) {
    const auto in = random_qkv<double>(rng, 4, 5, 1, 6, 3);
    const Tensord dout = random_normal<double>(in.q.shape(), rng);
    worst = std::max(worst, gradient_error(in.q, in.k, in.v, in.bias, 3, dout, 1e-5).max());
  }
  return {worst <= 1e-4, worst, 1e-4, "3 instances, 4x5 map, d=6, L=3, h=1e-5"};
}

Outcome criterion_corner() {
  bool ok = true;
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) ok = ok && neighborhood_indices(i, j, 5, 5, 3).size() == 9;
  }
  const auto set = neighborhood_indices(4, 0, 5, 5, 3);
  std::vector<Pixel> want;
  for (Index r : {2, 3, 4}) {
    for (Index c : {0, 1, 2}) want.emplace_back(r, c);
  }
  ok = ok && set == want;
  for (Index i = 0; i < 5; ++i) {
    const WindowGeometry w = window_start(i, 5, 3);
    ok = ok && w.contains(i);
    if (i > 0) ok = ok && w.start >= window_start(i - 1, 5, 3).start;
  }
  return {ok, ok ? 0.0 : 1.0, 0.0, "5x5 map, L=3"};
}

Outcome criterion_cost_parity() {
  int points = 0;
  int mismatches = 0;
  for (std::int64_t kernel : {3, 5, 7}) {
    for (std::int64_t a = 1; a <= 4; ++a) {
      for (std::int64_t b = 1; b <= 4; ++b) {
        for (std::int64_t c : {1, 3, 16, 48, 96}) {
          const CostReport na = cost_na(kernel * a, kernel * b, c, kernel);
          const CostReport win = cost_window_attention(kernel * a, kernel * b, c, kernel);
          ++points;
          if (na.macs != win.macs || na.memory_scalars != win.memory_scalars) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0 && points >= 200, static_cast<double>(mismatches), 0.0,
          std::to_string(points) + " points, exact integer comparison"};
}

Outcome criterion_table() {
  struct Row {
    const char* name;
    double params_m, gmacs;
  };
  const Row rows[] = {{"mini", 20, 2.7}, {"tiny", 28, 4.3}, {"small", 51, 7.8}, {"base", 90, 13.7}};
  double worst_params = 0;
  double worst_macs = 0;
  std::string note;
  for (const Row& r : rows) {
    const ModelStats s = model_stats(preset_config(r.name), 224, 224);
    const double p = s.params / 1e6;
    const double g = s.cost.macs / 1e9;
    worst_params = std::max(worst_params, std::abs(p - r.params_m) / r.params_m);
    worst_macs = std::max(worst_macs, std::abs(g - r.gmacs) / r.gmacs);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.1fM/%.2fG ", r.name, p, g);
    note += buf;
  }
  Outcome o;
  o.passed = worst_params <= 0.05 && worst_macs <= 0.10;
  o.measured = std::max(worst_params / 0.05, worst_macs / 0.10);
  o.tolerance = 1.0;
  o.note = note + "(params rel " + sci(worst_params) + ", macs rel " + sci(worst_macs) + ")";
  return o;
}

Outcome criterion_crossover() {
  bool ok = crossover_channels(3) == 4;
  for (std::int64_t kernel : {3, 5, 7}) {
    for (std::int64_t c = 1; c <= 64; ++c) {
      const bool cheaper = cost_na(16, 16, c, kernel).macs < cost_conv(16, 16, c, kernel).macs;
      ok = ok && cheaper == (c >= crossover_channels(kernel));
    }
  }
  return {ok, static_cast<double>(crossover_channels(3)), 4.0,
          "L=5 computed threshold C>=" + std::to_string(crossover_channels(5)) +
              " (differs from the C>1 claim for L>=5); L=7 C>=" + std::to_string(crossover_channels(7))};
}

Outcome criterion_full_model() {
  const NATConfig config = preset_config("tiny");
  const auto weights = init_weights<float>(config, 42);
  Rng rng(808);
  const Tensorf image = random_normal<float>({224, 224, 3}, rng);
  const int saved = num_threads();
  set_num_threads(1);
  const auto start = std::chrono::steady_clock::now();
  const Tensorf a = nat_forward(image, config, weights);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Tensorf b = nat_forward(image, config, weights);
  set_num_threads(4);
  const Tensorf c = nat_forward(image, config, weights);
  set_num_threads(saved);
  bool finite = a.size() == 1000;
  for (float v : a.data()) finite = finite && std::isfinite(v);
  Outcome o;
  o.passed = finite && a == b && a == c && seconds < 120.0;
  o.measured = seconds;
  o.tolerance = 120.0;
  o.note = std::string("single-thread f32 seconds; finite=") + (finite ? "yes" : "no") +
           ", rerun identical=" + (a == b ? "yes" : "no") + ", 4 threads identical=" + (a == c ? "yes" : "no");
  return o;
}

template <typename Scalar>
double equivariance_error(std::uint64_t seed) {
  Rng rng(seed);
  const Index n = 12, channels = 8, heads = 2, dy = 2, dx = 3;
  double worst = 0;
  for (Index kernel : {3, 5, 7}) {
    const Index t = 2 * kernel - 1;
    AttentionParams<Scalar> p;
    p.heads = heads;
    p.qkv_weight = random_normal<Scalar>({channels, 3 * channels}, rng, 0.35);
    p.qkv_bias = random_normal<Scalar>({3 * channels}, rng, 0.1);
    p.proj_weight = random_normal<Scalar>({channels, channels}, rng, 0.35);
    p.proj_bias = random_normal<Scalar>({channels}, rng, 0.1);
    p.rel_bias = random_normal<Scalar>({heads, t, t}, rng, 0.5);
    const Tensor<Scalar> x = random_normal<Scalar>({n, n, channels}, rng);
    Tensor<Scalar> shifted = random_normal<Scalar>({n, n, channels}, rng);
    for (Index i = 0; i + dy < n; ++i) {
      for (Index j = 0; j + dx < n; ++j) {
        for (Index c = 0; c < channels; ++c) shifted(i + dy, j + dx, c) = x(i, j, c);
      }
    }
    const NeighborhoodSpec spec(kernel);
    const Tensor<Scalar> y = mhna_layer(x, p, spec);
    const Tensor<Scalar> ys = mhna_layer(shifted, p, spec);
    const Index r = spec.radius();
    for (Index i = r; i + dy < n - r; ++i) {
      for (Index j = r; j + dx < n - r; ++j) {
        for (Index c = 0; c < channels; ++c) {
          worst = std::max(worst, std::abs(static_cast<double>(y(i, j, c)) - ys(i + dy, j + dx, c)));
        }
      }
    }
  }
  return worst;
}

Outcome criterion_equivariance() {
  const double worst = std::max(equivariance_error<float>(909), equivariance_error<double>(909));
  return {worst <= 1e-6, worst, 1e-6, "12x12, shift (2,3), L in {3,5,7}, bias on, f32 and f64"};
}

Outcome criterion_memory() {
  Rng rng(1010);
  int exact = 0;
  std::string note;
  for (int t = 0; t < 10; ++t) {
    const Index h = 1 + static_cast<Index>(rng.next_u64() % 24);
    const Index w = 1 + static_cast<Index>(rng.next_u64() % 24);
    const Index kernel = 3 + 2 * static_cast<Index>(rng.next_u64() % 4);
    const auto in = random_qkv<float>(rng, h, w, 1, 4, kernel);
    const Tensorf weights = na_qk(in.q, in.k, in.bias, NeighborhoodSpec(kernel));
    if (weights.size() == cost_na(h, w, 4, kernel).memory_terms.at("attention_weights")) ++exact;
    note += std::to_string(h) + "x" + std::to_string(w) + "/L" + std::to_string(kernel) + " ";
  }
  return {exact == 10, static_cast<double>(10 - exact), 0.0, note};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "NA equals self attention when the window covers the map", 1.0, criterion_sa},
      {2, "fused kernels equal the unfold reference", 60.0, criterion_oracle},
      {3, "backward matches central differences", 30.0, criterion_gradient},
      {4, "corner neighborhoods", 0.0, criterion_corner},
      {5, "NA and window attention cost parity", 0.0, criterion_cost_parity},
      {6, "variant parameter and MAC counts", 1.0, criterion_table},
      {7, "channel crossover against convolution", 0.0, criterion_crossover},
      {8, "Tiny forward at 224", 0.0, criterion_full_model},
      {9, "translation equivariance", 0.0, criterion_equivariance},
      {10, "attention weight memory accounting", 0.0, criterion_memory},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.note = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit <= 0 || seconds < c.time_limit;
    const bool passed = o.passed && in_time;
    if (!passed) ++failures;
    std::printf("[%s] %2d %s: measured=%.3g tolerance=%.3g time=%.2fs%s | %s\n", passed ? "PASS" : "FAIL", c.id,
                c.title.c_str(), o.measured, o.tolerance, seconds,
                in_time ? "" : (" (limit " + std::to_string(c.time_limit) + "s)").c_str(), o.note.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

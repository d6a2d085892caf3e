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

#include "nat/harness.hpp"

#include <algorithm>
#include <chrono>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "nat/analysis.hpp"
#include "nat/attention.hpp"
#include "nat/model.hpp"
#include "nat/neighborhood.hpp"
#include "nat/ops.hpp"
#include "nat/parallel.hpp"
#include "nat/rng.hpp"

namespace nat {

Precision parse_precision(const std::string& text) {
  if (text == "f32") return Precision::kFloat32;
  if (text == "f64") return Precision::kFloat64;
  throw ConfigError("precision must be f32 or f64, got '" + text + "'");
}

std::string precision_name(Precision p) { return p == Precision::kFloat32 ? "f32" : "f64"; }

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json RunReport::to_json(bool include_timing) const {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = seed;
  j["precision"] = precision_name(precision);
  j["status"] = passed() ? "pass" : "fail";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json item{{"name", c.name},
                        {"status", c.passed ? "pass" : "fail"},
                        {"measured", number(c.measured)},
                        {"tolerance", number(c.tolerance)}};
    if (!c.detail.empty()) item["detail"] = c.detail;
    list.push_back(std::move(item));
  }
  j["checks"] = std::move(list);
  j["metrics"] = metrics;
  if (include_timing) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [k, v] : timing) t[k] = number(v);
    j["timing"] = std::move(t);
  }
  return j;
}

double GradError::max() const { return std::max({dq, dk, dv, dbias}); }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double worst = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, d);
  }
  return worst;
}

Check bound_check(std::string name, double measured, double tolerance, std::string detail = {}) {
  return Check{std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

Check bool_check(std::string name, bool ok, std::string detail = {}) {
  return Check{std::move(name), ok, ok ? 0.0 : 1.0, 0.0, std::move(detail)};
}

// Tolerances for comparisons between two routes computing the same quantity.
template <typename Scalar>
constexpr double route_tolerance() {
  return std::is_same_v<Scalar, float> ? 1e-6 : 1e-12;
}
template <typename Scalar>
constexpr double sa_tolerance() {
  return std::is_same_v<Scalar, float> ? 1e-5 : 1e-12;
}

template <typename Scalar>
struct NaInputs {
  Tensor<Scalar> q, k, v, bias;
};

template <typename Scalar>
NaInputs<Scalar> random_na_inputs(Rng& rng, Index height, Index width, Index heads, Index dim, Index kernel,
                                  bool zero_bias = false) {
  const Shape shape{height, width, heads, dim};
  const Index table = 2 * kernel - 1;
  NaInputs<Scalar> in{random_normal<Scalar>(shape, rng), random_normal<Scalar>(shape, rng),
                      random_normal<Scalar>(shape, rng), Tensor<Scalar>({heads, table, table})};
  if (!zero_bias) in.bias = random_normal<Scalar>({heads, table, table}, rng, 0.5);
  return in;
}

// Flattens one head of an [H, W, heads, d] tensor to [H*W, d].
template <typename Scalar>
Tensor<Scalar> head_tokens(const Tensor<Scalar>& t, Index head) {
  const Index pixels = t.dim(0) * t.dim(1);
  const Index heads = t.dim(2);
  const Index dim = t.dim(3);
  Tensor<Scalar> out({pixels, dim});
  for (Index p = 0; p < pixels; ++p) {
    std::copy_n(t.raw() + (p * heads + head) * dim, dim, out.raw() + p * dim);
  }
  return out;
}

template <typename Scalar>
AttentionParams<Scalar> random_attention_params(Rng& rng, Index channels, Index heads, Index kernel) {
  const Index table = 2 * kernel - 1;
  const double wscale = 1.0 / std::sqrt(static_cast<double>(channels));
  AttentionParams<Scalar> p;
  p.heads = heads;
  p.qkv_weight = random_normal<Scalar>({channels, 3 * channels}, rng, wscale);
  p.qkv_bias = random_normal<Scalar>({3 * channels}, rng, 0.1);
  p.proj_weight = random_normal<Scalar>({channels, channels}, rng, wscale);
  p.proj_bias = random_normal<Scalar>({channels}, rng, 0.1);
  p.rel_bias = random_normal<Scalar>({heads, table, table}, rng, 0.5);
  return p;
}

template <typename Scalar>
void verify_attention(RunReport& report, std::uint64_t seed, bool inject_fault) {
  // Fused kernels against the extract-and-replicate route, full grid.
  {
    Rng rng(seed ^ 0x01);
    double worst = 0;
    int cases = 0;
    bool first = true;
    for (Index height = 3; height <= 12; ++height) {
      for (Index width = 3; width <= 12; ++width) {
        for (Index kernel : {3, 5, 7}) {
          for (Index heads : {1, 2, 4}) {
            for (Index dim : {2, 4, 8}) {
              const auto in = random_na_inputs<Scalar>(rng, height, width, heads, dim, kernel);
              const NeighborhoodSpec spec(kernel);
              Tensor<Scalar> fused = na_forward(in.q, in.k, in.v, in.bias, spec);
              if (inject_fault && first) fused[0] += static_cast<Scalar>(1e-3);
              first = false;
              worst = std::max(worst, max_abs_diff(fused, na_reference(in.q, in.k, in.v, in.bias, spec)));
              ++cases;
            }
          }
        }
      }
    }
    report.checks.push_back(bound_check("oracle_equivalence", worst, route_tolerance<Scalar>(),
                                        std::to_string(cases) + " cases, H,W in 3..12, L in {3,5,7}"));
  }

  // Neighbor sets from both routes.
  {
    bool same = true;
    for (Index height = 1; height <= 12 && same; ++height) {
      for (Index width = 1; width <= 12 && same; ++width) {
        for (Index kernel : {3, 5, 7}) {
          const auto sets = reference_neighbor_indices(height, width, NeighborhoodSpec(kernel));
          for (Index i = 0; i < height; ++i) {
            for (Index j = 0; j < width; ++j) {
              same = same && sets[static_cast<std::size_t>(i * width + j)] ==
                                 neighborhood_indices(i, j, height, width, kernel);
            }
          }
        }
      }
    }
    report.checks.push_back(bool_check("neighbor_sets_match_reference", same));
  }

  // Window covering the map reduces to self attention when the bias is zero.
  {
    Rng rng(seed ^ 0x02);
    double worst = 0;
    for (Index heads : {1, 2}) {
      for (Index kernel : {5, 7}) {
        const auto in = random_na_inputs<Scalar>(rng, 5, 5, heads, 8, kernel, true);
        const Tensor<Scalar> na = na_forward(in.q, in.k, in.v, in.bias, NeighborhoodSpec(kernel));
        for (Index h = 0; h < heads; ++h) {
          const Tensor<Scalar> sa = self_attention(head_tokens(in.q, h), head_tokens(in.k, h), head_tokens(in.v, h));
          worst = std::max(worst, max_abs_diff(head_tokens(na, h), sa));
        }
      }
    }
    report.checks.push_back(bound_check("self_attention_equivalence", worst, sa_tolerance<Scalar>(),
                                        "H=W=5, d=8, heads {1,2}, L {5,7}, zero bias"));
  }

  // Softmaxed weights are row-stochastic.
  {
    Rng rng(seed ^ 0x03);
    double worst = 0;
    for (Index kernel : {3, 5, 7}) {
      const auto in = random_na_inputs<Scalar>(rng, 9, 11, 2, 4, kernel);
      const Tensor<Scalar> probs = softmax_last(na_qk(in.q, in.k, in.bias, NeighborhoodSpec(kernel)));
      const Index slots = probs.dim(3);
      for (Index row = 0; row < probs.size() / slots; ++row) {
        double total = 0;
        for (Index m = 0; m < slots; ++m) total += probs[row * slots + m];
        worst = std::max(worst, std::abs(total - 1.0));
      }
    }
    report.checks.push_back(bound_check("row_stochastic_weights", worst, route_tolerance<Scalar>()));
  }

  // Interior queries are translation equivariant, bias included.
  {
    Rng rng(seed ^ 0x04);
    double worst = 0;
    const Index n = 12;
    const Index dy = 2;
    const Index dx = 3;
    for (Index kernel : {3, 5}) {
      const NeighborhoodSpec spec(kernel);
      const Index r = spec.radius();
      const auto params = random_attention_params<Scalar>(rng, 8, 2, kernel);
      const Tensor<Scalar> x = random_normal<Scalar>({n, n, 8}, rng);
      Tensor<Scalar> shifted = random_normal<Scalar>({n, n, 8}, rng);
      for (Index i = 0; i + dy < n; ++i) {
        for (Index j = 0; j + dx < n; ++j) {
          std::copy_n(x.raw() + (i * n + j) * 8, 8, shifted.raw() + ((i + dy) * n + j + dx) * 8);
        }
      }
      const Tensor<Scalar> out = mhna_layer(x, params, spec);
      const Tensor<Scalar> out_shifted = mhna_layer(shifted, params, spec);
      for (Index i = r; i + dy < n - r; ++i) {
        for (Index j = r; j + dx < n - r; ++j) {
          for (Index c = 0; c < 8; ++c) {
            const double d = std::abs(static_cast<double>(out(i, j, c)) - out_shifted(i + dy, j + dx, c));
            worst = std::max(worst, d);
          }
        }
      }
    }
    report.checks.push_back(bound_check("translation_equivariance", worst, 1e-6, "12x12 map shifted by (2,3)"));
  }

  // A pixel only influences queries whose neighborhood holds it.
  {
    Rng rng(seed ^ 0x05);
    const Index n = 10;
    const Index kernel = 3;
    const NeighborhoodSpec spec(kernel);
    const auto params = random_attention_params<Scalar>(rng, 4, 1, kernel);
    const Tensor<Scalar> x = random_normal<Scalar>({n, n, 4}, rng);
    const Tensor<Scalar> base = mhna_layer(x, params, spec);
    bool local = true;
    for (const Pixel& probe : {Pixel{0, 0}, Pixel{4, 5}, Pixel{9, 2}}) {
      Tensor<Scalar> perturbed = x;
      perturbed(probe.first, probe.second, 1) += Scalar(1);
      const Tensor<Scalar> out = mhna_layer(perturbed, params, spec);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          const auto set = neighborhood_indices(i, j, n, n, kernel);
          const bool reachable = std::find(set.begin(), set.end(), probe) != set.end();
          bool changed = false;
          for (Index c = 0; c < 4; ++c) changed = changed || out(i, j, c) != base(i, j, c);
          if (changed && !reachable) local = false;
        }
      }
    }
    report.checks.push_back(bool_check("locality", local));
  }

  // Bitwise repeatability, including across worker counts.
  {
    Rng rng(seed ^ 0x06);
    const auto in = random_na_inputs<Scalar>(rng, 11, 9, 2, 4, 5);
    const NeighborhoodSpec spec(5);
    const int saved = num_threads();
    set_num_threads(1);
    const Tensor<Scalar> out1 = na_forward(in.q, in.k, in.v, in.bias, spec);
    const auto grads1 = na_backward(in.q, in.k, in.v, in.bias, spec, out1);
    set_num_threads(4);
    const Tensor<Scalar> out4 = na_forward(in.q, in.k, in.v, in.bias, spec);
    const auto grads4 = na_backward(in.q, in.k, in.v, in.bias, spec, out1);
    set_num_threads(saved);
    const bool same = out1 == out4 && grads1.dq == grads4.dq && grads1.dk == grads4.dk && grads1.dv == grads4.dv &&
                      grads1.dbias == grads4.dbias;
    report.checks.push_back(bool_check("determinism_across_threads", same));
  }
}

void verify_neighborhood(RunReport& report) {
  bool monotone = true;
  bool member = true;
  bool constant_field = true;
  bool degenerate = true;
  for (Index n = 1; n <= 20; ++n) {
    for (Index kernel : {3, 5, 7, 9}) {
      Index previous = -1;
      for (Index i = 0; i < n; ++i) {
        const WindowGeometry w = window_start(i, n, kernel);
        monotone = monotone && w.start >= previous;
        previous = w.start;
        member = member && w.contains(i);
        if (kernel <= n) constant_field = constant_field && w.len == kernel;
        if (kernel >= n) degenerate = degenerate && w.start == 0 && w.len == n;
      }
    }
  }
  report.checks.push_back(bool_check("window_monotone", monotone));
  report.checks.push_back(bool_check("query_in_window", member));
  report.checks.push_back(bool_check("receptive_field_constant", constant_field));
  report.checks.push_back(bool_check("full_axis_when_kernel_covers", degenerate));

  bool corner = true;
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) corner = corner && neighborhood_indices(i, j, 5, 5, 3).size() == 9;
  }
  std::vector<Pixel> expected;
  for (Index r : {2, 3, 4}) {
    for (Index c : {0, 1, 2}) expected.emplace_back(r, c);
  }
  corner = corner && neighborhood_indices(4, 0, 5, 5, 3) == expected;
  report.checks.push_back(bool_check("corner_expansion", corner, "5x5 map, L=3, query (4,0)"));
}

void verify_costs(RunReport& report) {
  const std::int64_t kernels[] = {3, 5, 7, 9, 11};
  int mismatches = 0;
  for (int idx = 0; idx < 200; ++idx) {
    const std::int64_t kernel = kernels[idx % 5];
    const std::int64_t height = kernel * (1 + (idx / 5) % 5);
    const std::int64_t width = kernel * (1 + (idx / 25) % 8);
    const std::int64_t channels = 1 + (idx * 37) % 128;
    const CostReport na = cost_na(height, width, channels, kernel);
    const CostReport win = cost_window_attention(height, width, channels, kernel);
    if (na.macs != win.macs || na.memory_scalars != win.memory_scalars) ++mismatches;
  }
  report.checks.push_back(Check{"cost_parity_na_window", mismatches == 0, static_cast<double>(mismatches), 0.0,
                                "200-point sweep with L | H, L | W"});

  bool consistent = crossover_channels(3) == 4;
  for (std::int64_t kernel : {3, 5, 7, 9}) {
    const std::int64_t side = std::max<std::int64_t>(8, kernel);
    const std::int64_t boundary = crossover_channels(kernel);
    for (std::int64_t c = 1; c <= 64; ++c) {
      const bool cheaper = cost_na(side, side, c, kernel).macs < cost_conv(side, side, c, kernel).macs;
      consistent = consistent && cheaper == (c >= boundary);
    }
  }
  report.checks.push_back(bool_check("crossover_channels", consistent, "L=3 -> 4; cross-checked for C in 1..64"));
  report.metrics["crossover_channels"] = {
      {"3", crossover_channels(3)}, {"5", crossover_channels(5)}, {"7", crossover_channels(7)}};

  Rng rng(7);
  bool exact = true;
  for (int t = 0; t < 10; ++t) {
    const Index height = 1 + static_cast<Index>(rng.next_u64() % 16);
    const Index width = 1 + static_cast<Index>(rng.next_u64() % 16);
    const Index kernel = 3 + 2 * static_cast<Index>(rng.next_u64() % 3);
    const Shape shape{height, width, 1, 4};
    const Tensord logits = na_qk(Tensord(shape), Tensord(shape), Tensord({1, 2 * kernel - 1, 2 * kernel - 1}),
                                 NeighborhoodSpec(kernel));
    exact = exact && logits.size() == cost_na(height, width, 4, kernel).memory_terms.at("attention_weights");
  }
  report.checks.push_back(bool_check("attention_memory_accounting", exact));
}

template <typename Scalar>
void verify_model(RunReport& report, std::uint64_t seed) {
  const NATConfig config = preset_config("desk");
  const auto weights = init_weights<Scalar>(config, seed);
  Rng rng(seed ^ 0x07);
  const Tensor<Scalar> image = random_normal<Scalar>({32, 32, 3}, rng);
  const Tensor<Scalar> a = nat_forward(image, config, weights);
  const Tensor<Scalar> b = nat_forward(image, config, weights);
  const bool finite = std::all_of(a.data().begin(), a.data().end(), [](Scalar v) { return std::isfinite(v); });
  report.checks.push_back(bool_check("desk_forward_finite", finite && a.size() == config.num_classes));
  report.checks.push_back(bool_check("desk_forward_repeatable", a == b));
}

template <typename Scalar>
double time_op(int iters, const std::function<void()>& op, double& best) {
  double total = 0;
  best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const auto start = Clock::now();
    op();
    const double t = seconds_since(start);
    total += t;
    best = std::min(best, t);
  }
  return total / iters;
}

template <typename Scalar>
void bench_impl(RunReport& report, const BenchOptions& o) {
  if (o.heads < 1 || o.channels % o.heads != 0) {
    throw ConfigError("channels must be divisible by heads");
  }
  Rng rng(o.seed);
  const Index dim = o.channels / o.heads;
  std::int64_t macs = 0;
  std::function<void()> op;
  NaInputs<Scalar> na_in;
  Tensor<Scalar> tokens_q, tokens_k, tokens_v, image, conv_w, conv_b;
  const NeighborhoodSpec spec = o.op == "conv" ? NeighborhoodSpec(3) : NeighborhoodSpec(o.kernel);

  if (o.op == "na" || o.op == "na_reference") {
    na_in = random_na_inputs<Scalar>(rng, o.height, o.width, o.heads, dim, o.kernel);
    const CostReport cost = cost_na(o.height, o.width, o.channels, o.kernel);
    macs = cost.mac_terms.at("attention_weights") + cost.mac_terms.at("attention_values");

    const auto start = Clock::now();
    const double diff = max_abs_diff(na_forward(na_in.q, na_in.k, na_in.v, na_in.bias, spec),
                                     na_reference(na_in.q, na_in.k, na_in.v, na_in.bias, spec));
    report.timing["spot_check_seconds"] = seconds_since(start);
    report.checks.push_back(bound_check("spot_check_fused_vs_reference", diff, 1e-6));

    const auto alloc = compare_allocations(o.height, o.width, o.channels, o.heads, o.kernel, o.seed);
    report.metrics["transient_scalars_fused"] = alloc.fused;
    report.metrics["transient_scalars_reference"] = alloc.reference;
    report.metrics["allocation_ratio"] = alloc.ratio();
    report.metrics["reference_materialized_scalars"] =
        2 * o.height * o.width * o.channels * spec.window_len(o.height) * spec.window_len(o.width);
    report.checks.push_back(Check{"reference_allocates_more", alloc.ratio() > 1.0, alloc.ratio(), 1.0,
                                  "reference over fused transient scalars"});

    if (o.op == "na") {
      op = [&] { na_forward(na_in.q, na_in.k, na_in.v, na_in.bias, spec); };
    } else {
      op = [&] { na_reference(na_in.q, na_in.k, na_in.v, na_in.bias, spec); };
    }
  } else if (o.op == "self_attention") {
    const Index tokens = o.height * o.width;
    tokens_q = random_normal<Scalar>({tokens, o.channels}, rng);
    tokens_k = random_normal<Scalar>({tokens, o.channels}, rng);
    tokens_v = random_normal<Scalar>({tokens, o.channels}, rng);
    const CostReport cost = cost_self_attention(o.height, o.width, o.channels);
    macs = cost.mac_terms.at("attention_weights") + cost.mac_terms.at("attention_values");
    op = [&] { self_attention(tokens_q, tokens_k, tokens_v); };
  } else if (o.op == "conv") {
    if (o.kernel < 1 || o.kernel % 2 == 0) throw ConfigError("conv kernel must be odd");
    image = random_normal<Scalar>({o.height, o.width, o.channels}, rng);
    conv_w = random_normal<Scalar>({o.kernel, o.kernel, o.channels, o.channels}, rng, 0.05);
    conv_b = Tensor<Scalar>({o.channels});
    macs = cost_conv(o.height, o.width, o.channels, o.kernel).macs;
    op = [&] { conv2d(image, conv_w, conv_b, 1, (o.kernel - 1) / 2); };
  } else {
    throw ConfigError("unknown bench op '" + o.op + "'");
  }

  double best = 0;
  const double mean = time_op<Scalar>(o.iters, op, best);
  report.timing["mean_seconds"] = mean;
  report.timing["min_seconds"] = best;
  report.timing["macs_per_second"] = mean > 0 ? static_cast<double>(macs) / mean : 0.0;
  report.metrics["macs"] = macs;

  if (o.op == "na") {
    // Doubling the pixel count doubles the attention MACs exactly.
    const CostReport twice = cost_na(2 * o.height, o.width, o.channels, o.kernel);
    const std::int64_t macs2 = twice.mac_terms.at("attention_weights") + twice.mac_terms.at("attention_values");
    const auto in2 = random_na_inputs<Scalar>(rng, 2 * o.height, o.width, o.heads, dim, o.kernel);
    double best2 = 0;
    const double mean2 =
        time_op<Scalar>(o.iters, [&] { na_forward(in2.q, in2.k, in2.v, in2.bias, spec); }, best2);
    report.metrics["scaling_macs_ratio"] = static_cast<double>(macs2) / static_cast<double>(macs);
    report.timing["scaling_time_ratio"] = mean > 0 ? mean2 / mean : 0.0;
    report.checks.push_back(bool_check("scaling_macs_ratio_is_2", macs2 == 2 * macs));

    const auto ref_start = Clock::now();
    na_reference(na_in.q, na_in.k, na_in.v, na_in.bias, spec);
    const double reference_seconds = seconds_since(ref_start);
    report.timing["reference_seconds"] = reference_seconds;
    report.timing["reference_over_fused"] = mean > 0 ? reference_seconds / mean : 0.0;
  }
}

}  // namespace

RunReport run_verify(const VerifyOptions& options) {
  RunReport report;
  report.command = "verify";
  report.seed = options.seed;
  report.precision = options.precision;
  const auto start = Clock::now();
  verify_neighborhood(report);
  if (options.precision == Precision::kFloat32) {
    verify_attention<float>(report, options.seed, options.inject_fault);
    verify_model<float>(report, options.seed);
  } else {
    verify_attention<double>(report, options.seed, options.inject_fault);
    verify_model<double>(report, options.seed);
  }
  GradcheckOptions g;
  g.seed = options.seed;
  g.instances = 1;
  const RunReport grad = run_gradcheck(g);
  report.checks.push_back(grad.checks.front());
  report.checks.back().name = "gradient_check";
  verify_costs(report);
  report.timing["total_seconds"] = seconds_since(start);
  return report;
}

GradError gradient_error(const Tensord& q, const Tensord& k, const Tensord& v, const Tensord& bias, Index kernel,
                         const Tensord& dout, double step) {
  const NeighborhoodSpec spec(kernel);
  const auto grads = na_backward(q, k, v, bias, spec, dout);

  auto loss = [&](const Tensord& qq, const Tensord& kk, const Tensord& vv, const Tensord& bb) {
    const Tensord out = na_forward(qq, kk, vv, bb, spec);
    double total = 0;
    for (Index i = 0; i < out.size(); ++i) total += out[i] * dout[i];
    return total;
  };

  // which: 0 = q, 1 = k, 2 = v, 3 = bias
  auto compare = [&](int which, const Tensord& analytic) {
    std::array<Tensord, 4> args{q, k, v, bias};
    double worst = 0;
    for (Index e = 0; e < analytic.size(); ++e) {
      Tensord& target = args[static_cast<std::size_t>(which)];
      const double saved = target[e];
      target[e] = saved + step;
      const double up = loss(args[0], args[1], args[2], args[3]);
      target[e] = saved - step;
      const double down = loss(args[0], args[1], args[2], args[3]);
      target[e] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
  };

  GradError err;
  err.dq = compare(0, grads.dq);
  err.dk = compare(1, grads.dk);
  err.dv = compare(2, grads.dv);
  err.dbias = compare(3, grads.dbias);
  return err;
}

RunReport run_gradcheck(const GradcheckOptions& o) {
  RunReport report;
  report.command = "gradcheck";
  report.seed = o.seed;
  report.precision = Precision::kFloat64;
  const auto start = Clock::now();
  Rng rng(o.seed);
  GradError worst;
  double grad_magnitude = 0;
  nlohmann::json per_instance = nlohmann::json::array();
  for (int t = 0; t < o.instances; ++t) {
    const auto in = random_na_inputs<double>(rng, o.height, o.width, o.heads, o.dim, o.kernel);
    const Tensord dout = o.zero_dout ? Tensord(in.q.shape()) : random_normal<double>(in.q.shape(), rng);
    const GradError e = gradient_error(in.q, in.k, in.v, in.bias, o.kernel, dout, o.step);
    const auto grads = na_backward(in.q, in.k, in.v, in.bias, NeighborhoodSpec(o.kernel), dout);
    for (const Tensord* g : {&grads.dq, &grads.dk, &grads.dv, &grads.dbias}) {
      for (double x : g->data()) grad_magnitude = std::max(grad_magnitude, std::abs(x));
    }
    per_instance.push_back({{"dq", e.dq}, {"dk", e.dk}, {"dv", e.dv}, {"dbias", e.dbias}});
    worst.dq = std::max(worst.dq, e.dq);
    worst.dk = std::max(worst.dk, e.dk);
    worst.dv = std::max(worst.dv, e.dv);
    worst.dbias = std::max(worst.dbias, e.dbias);
  }
  const bool finite = std::isfinite(worst.max());
  report.checks.push_back(bound_check("max_relative_error", finite ? worst.max() : INFINITY, o.tolerance,
                                      "central differences, step " + std::to_string(o.step)));
  report.checks.push_back(bound_check("dq", worst.dq, o.tolerance));
  report.checks.push_back(bound_check("dk", worst.dk, o.tolerance));
  report.checks.push_back(bound_check("dv", worst.dv, o.tolerance));
  report.checks.push_back(bound_check("dbias", worst.dbias, o.tolerance));
  report.metrics["instances"] = per_instance;
  report.metrics["max_abs_gradient"] = grad_magnitude;
  report.metrics["shape"] = {o.height, o.width, o.heads, o.dim};
  report.metrics["kernel"] = o.kernel;
  report.metrics["step"] = o.step;
  report.timing["total_seconds"] = seconds_since(start);
  return report;
}

std::vector<std::string> bench_ops() { return {"na", "na_reference", "self_attention", "conv"}; }

AllocationComparison compare_allocations(Index height, Index width, Index channels, Index heads, Index kernel,
                                         std::uint64_t seed) {
  Rng rng(seed);
  const auto in = random_na_inputs<float>(rng, height, width, heads, channels / heads, kernel);
  const NeighborhoodSpec spec(kernel);
  AllocationComparison out;
  std::int64_t before = alloc_stats::scalars_allocated();
  { auto r = na_forward(in.q, in.k, in.v, in.bias, spec); }
  out.fused = alloc_stats::scalars_allocated() - before;
  before = alloc_stats::scalars_allocated();
  { auto r = na_reference(in.q, in.k, in.v, in.bias, spec); }
  out.reference = alloc_stats::scalars_allocated() - before;
  return out;
}

RunReport run_bench(const BenchOptions& options) {
  const auto ops = bench_ops();
  if (std::find(ops.begin(), ops.end(), options.op) == ops.end()) {
    throw ConfigError("unknown bench op '" + options.op + "'");
  }
  if (options.iters < 1) throw ConfigError("iters must be at least 1");
  RunReport report;
  report.command = "bench";
  report.seed = options.seed;
  report.precision = options.precision;
  report.metrics["op"] = options.op;
  report.metrics["shape"] = {options.height, options.width, options.channels};
  report.metrics["kernel"] = options.kernel;
  report.metrics["heads"] = options.heads;
  report.metrics["iters"] = options.iters;
  report.metrics["threads"] = num_threads();
  if (options.precision == Precision::kFloat32) {
    bench_impl<float>(report, options);
  } else {
    bench_impl<double>(report, options);
  }
  return report;
}

}  // namespace nat

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

// natcpu command line: invariant suite, gradient check, cost report, forward
// inference and kernel timing. JSON goes to stdout, summaries to stderr.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nat/analysis.hpp"
#include "nat/errors.hpp"
#include "nat/harness.hpp"
#include "nat/io.hpp"
#include "nat/model.hpp"
#include "nat/parallel.hpp"
#include "nat/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct SharedFlags {
  std::uint64_t seed = 42;
  std::string precision;
  int threads = 0;
};

void add_shared(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--seed", flags.seed, "random seed")->capture_default_str();
  cmd->add_option("--precision", flags.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--threads", flags.threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
}

int emit(const nat::RunReport& report) {
  std::cout << report.to_json().dump(2) << "\n";
  int failed = 0;
  for (const auto& c : report.checks) {
    if (!c.passed) {
      ++failed;
      std::cerr << "FAIL " << c.name << " measured=" << c.measured << " tolerance=" << c.tolerance << "\n";
    }
  }
  std::cerr << report.command << ": " << report.checks.size() - failed << "/" << report.checks.size()
            << " checks passed\n";
  return report.passed() ? kExitOk : kExitCheckFailed;
}

struct ModelSource {
  std::string preset;
  std::string config_path;

  nat::NATConfig load() const {
    if (!preset.empty()) return nat::preset_config(preset);
    return nat::load_config(config_path);
  }
};

void add_model_source(CLI::App* cmd, ModelSource& src) {
  auto* p = cmd->add_option("--preset", src.preset, "named configuration")->check(CLI::IsMember(nat::preset_names()));
  auto* c = cmd->add_option("--config", src.config_path, "configuration JSON file");
  p->excludes(c);
  c->excludes(p);
}

std::pair<std::int64_t, std::int64_t> parse_resolution(const std::string& text) {
  const auto x = text.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const std::int64_t side = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {side, side};
    }
    const std::int64_t h = std::stoll(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const std::string rest = text.substr(x + 1);
    const std::int64_t w = std::stoll(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw nat::ConfigError("resolution must be N or HxW, got '" + text + "'");
  }
}

struct ForwardArgs {
  ModelSource model;
  std::string weights_path;
  std::string input_path;
  std::string output_path;
  std::string dump_weights;
  std::string res = "224";
};

template <typename Scalar>
int run_forward(const ForwardArgs& args, std::uint64_t seed) {
  const nat::NATConfig config = args.model.load();
  const nat::NATWeights<Scalar> weights = args.weights_path.empty() ? nat::init_weights<Scalar>(config, seed)
                                                                    : nat::load_weights<Scalar>(args.weights_path);
  if (!args.dump_weights.empty()) nat::save_weights(args.dump_weights, weights);

  nat::Tensor<Scalar> image;
  if (!args.input_path.empty()) {
    image = nat::to_precision<Scalar>(nat::load_ntsr(args.input_path));
  } else {
    const auto [h, w] = parse_resolution(args.res);
    if (h < 1 || w < 1) throw nat::ConfigError("resolution must be positive");
    nat::Rng rng(seed ^ 0x1a6e);
    image = nat::random_normal<Scalar>({h, w, 3}, rng);
  }

  const nat::Tensor<Scalar> logits = nat::nat_forward(image, config, weights);
  if (!args.output_path.empty()) nat::save_ntsr(args.output_path, logits);

  std::vector<nat::Index> order(static_cast<std::size_t>(logits.size()));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min<std::size_t>(5, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](nat::Index a, nat::Index b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  const bool finite = std::all_of(logits.data().begin(), logits.data().end(), [](Scalar v) { return std::isfinite(v); });

  nlohmann::json top = nlohmann::json::array();
  for (std::size_t i = 0; i < k; ++i) top.push_back(order[i]);
  nlohmann::json j{{"command", "forward"},
                   {"seed", seed},
                   {"precision", nat::precision_name(std::is_same_v<Scalar, float> ? nat::Precision::kFloat32
                                                                                  : nat::Precision::kFloat64)},
                   {"input_shape", image.shape()},
                   {"num_classes", logits.size()},
                   {"argmax", order.front()},
                   {"top5", top},
                   {"finite", finite}};
  if (!args.output_path.empty()) j["output"] = args.output_path;
  std::cout << j.dump(2) << "\n";
  std::cerr << "forward: " << image.dim(0) << "x" << image.dim(1) << " -> " << logits.size()
            << " logits, argmax " << order.front() << (finite ? "" : " (non-finite logits)") << "\n";
  return finite ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neighborhood attention and NAT reference implementation"};
  app.require_subcommand(1);

  SharedFlags verify_flags, grad_flags, flops_flags, forward_flags, bench_flags;

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  add_shared(verify, verify_flags);
  bool inject_fault = false;
  verify->add_flag("--inject-fault", inject_fault)->group("");

  auto* gradcheck = app.add_subcommand("gradcheck", "check na_backward against central differences");
  add_shared(gradcheck, grad_flags);
  nat::GradcheckOptions grad;
  gradcheck->add_option("--step", grad.step, "finite-difference step")->capture_default_str()->check(
      CLI::PositiveNumber);
  gradcheck->add_option("--H", grad.height)->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--W", grad.width)->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--heads", grad.heads)->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--dim", grad.dim, "channels per head")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--L", grad.kernel, "neighborhood size")->capture_default_str();
  gradcheck->add_option("--instances", grad.instances)->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", grad.tolerance)->capture_default_str();
  gradcheck->add_flag("--zero-dout", grad.zero_dout, "use a zero upstream gradient");

  auto* flops = app.add_subcommand("flops", "report parameters, MACs and memory of a configuration");
  add_shared(flops, flops_flags);
  ModelSource flops_model;
  add_model_source(flops, flops_model);
  std::string flops_res = "224";
  flops->add_option("--res", flops_res, "input resolution, N or HxW")->capture_default_str();

  auto* forward = app.add_subcommand("forward", "run the classifier on one image");
  add_shared(forward, forward_flags);
  ForwardArgs fwd;
  add_model_source(forward, fwd.model);
  forward->add_option("--weights", fwd.weights_path, "NATW weights (default: random init from --seed)");
  auto* input_opt = forward->add_option("--input", fwd.input_path, "NTSR image [H, W, 3]");
  forward->add_option("--res", fwd.res, "random input resolution when --input is absent")
      ->capture_default_str()
      ->excludes(input_opt);
  forward->add_option("--output", fwd.output_path, "write logits as NTSR");
  forward->add_option("--dump-weights", fwd.dump_weights, "write the weights used as NATW");

  auto* bench = app.add_subcommand("bench", "time one kernel");
  add_shared(bench, bench_flags);
  nat::BenchOptions bo;
  bench->add_option("--op", bo.op, "kernel to time")->capture_default_str()->check(CLI::IsMember(nat::bench_ops()));
  bench->add_option("--H", bo.height)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--W", bo.width)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--C", bo.channels)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--L", bo.kernel)->capture_default_str();
  bench->add_option("--heads", bo.heads)->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--iters", bo.iters)->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto apply_threads = [](const SharedFlags& f) {
    if (f.threads > 0) nat::set_num_threads(f.threads);
  };

  try {
    if (verify->parsed()) {
      apply_threads(verify_flags);
      nat::VerifyOptions o;
      o.seed = verify_flags.seed;
      if (!verify_flags.precision.empty()) o.precision = nat::parse_precision(verify_flags.precision);
      o.inject_fault = inject_fault;
      return emit(nat::run_verify(o));
    }
    if (gradcheck->parsed()) {
      apply_threads(grad_flags);
      if (grad_flags.precision == "f32") {
        std::cerr << "gradcheck: single precision is refused; finite differences need f64\n";
        return kExitUsage;
      }
      grad.seed = grad_flags.seed;
      return emit(nat::run_gradcheck(grad));
    }
    if (flops->parsed()) {
      if (flops_model.preset.empty() && flops_model.config_path.empty()) {
        std::cerr << "flops: one of --preset or --config is required\n";
        return kExitUsage;
      }
      const auto [h, w] = parse_resolution(flops_res);
      const nat::ModelStats stats = nat::model_stats(flops_model.load(), h, w);
      nlohmann::json j = nlohmann::json::parse(stats.to_json());
      j["resolution"] = {h, w};
      std::cout << j.dump(2) << "\n";
      std::cerr << "flops: " << stats.params / 1e6 << " M params, " << stats.cost.macs / 1e9 << " G MACs at " << h
                << "x" << w << "\n";
      return kExitOk;
    }
    if (forward->parsed()) {
      apply_threads(forward_flags);
      if (fwd.model.preset.empty() && fwd.model.config_path.empty()) {
        std::cerr << "forward: one of --preset or --config is required\n";
        return kExitUsage;
      }
      if (forward_flags.precision == "f64") return run_forward<double>(fwd, forward_flags.seed);
      return run_forward<float>(fwd, forward_flags.seed);
    }
    if (bench->parsed()) {
      apply_threads(bench_flags);
      bo.seed = bench_flags.seed;
      if (!bench_flags.precision.empty()) bo.precision = nat::parse_precision(bench_flags.precision);
      return emit(nat::run_bench(bo));
    }
  } catch (const nat::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nat::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

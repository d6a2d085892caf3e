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
#include <vector>

#include <json.hpp>

#include "nat/tensor.hpp"

namespace nat {

enum class Precision { kFloat32, kFloat64 };

Precision parse_precision(const std::string& text);
std::string precision_name(Precision p);

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Machine-readable result of one CLI command. Everything outside `timing` is a
/// deterministic function of the command's inputs and seed.
struct RunReport {
  std::string command;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat64;
  std::vector<Check> checks;
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, double> timing;

  bool passed() const;
  nlohmann::json to_json(bool include_timing = true) const;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  Precision precision = Precision::kFloat64;
  // Perturbs one fused-kernel output so the oracle comparison must fail.
  bool inject_fault = false;
};

/// Invariant matrix: oracle equivalence, self-attention equivalence, neighborhood
/// properties, gradient check, cost-model parity, memory accounting, determinism.
RunReport run_verify(const VerifyOptions& options);

struct GradcheckOptions {
  std::uint64_t seed = 42;
  double step = 1e-5;
  Index height = 4;
  Index width = 5;
  Index heads = 1;
  Index dim = 6;
  Index kernel = 3;
  int instances = 3;
  bool zero_dout = false;
  double tolerance = 1e-4;
};

struct GradError {
  double dq = 0, dk = 0, dv = 0, dbias = 0;
  double max() const;
};

/// Largest entrywise relative error |a - n| / max(|a|, |n|, 1e-6) of the analytic
/// gradients against central differences of sum(dout * na_forward), per tensor.
GradError gradient_error(const Tensord& q, const Tensord& k, const Tensord& v, const Tensord& bias, Index kernel,
                         const Tensord& dout, double step);

/// Always double precision.
RunReport run_gradcheck(const GradcheckOptions& options);

struct BenchOptions {
  std::string op = "na";
  Index height = 56;
  Index width = 56;
  Index channels = 64;
  Index kernel = 7;
  Index heads = 1;
  int iters = 5;
  std::uint64_t seed = 42;
  Precision precision = Precision::kFloat32;
};

std::vector<std::string> bench_ops();

/// Times one kernel. For the neighborhood kernels a fused-versus-reference spot
/// check runs first and the report carries the transient allocation of both.
RunReport run_bench(const BenchOptions& options);

/// Scalars allocated by tensor buffers while running na_forward and na_reference
/// once on [H, W, heads, C / heads] inputs.
struct AllocationComparison {
  std::int64_t fused = 0;
  std::int64_t reference = 0;
  double ratio() const { return static_cast<double>(reference) / static_cast<double>(fused); }
};
AllocationComparison compare_allocations(Index height, Index width, Index channels, Index heads, Index kernel,
                                         std::uint64_t seed);

}  // namespace nat

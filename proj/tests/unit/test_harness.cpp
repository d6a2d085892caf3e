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

#include <doctest.h>

#include "nat/errors.hpp"
#include "nat/harness.hpp"

using namespace nat;

TEST_CASE("verify passes and is reproducible apart from timing") {
  const RunReport a = run_verify({});
  const RunReport b = run_verify({});
  CHECK(a.passed());
  CHECK(a.to_json(false).dump() == b.to_json(false).dump());
  CHECK(a.to_json().contains("timing"));
}

TEST_CASE("an injected fault names the failing check") {
  VerifyOptions o;
  o.inject_fault = true;
  const RunReport r = run_verify(o);
  CHECK(!r.passed());
  bool named = false;
  for (const auto& c : r.checks) named = named || (!c.passed && c.name == "oracle_equivalence");
  CHECK(named);
}

TEST_CASE("gradcheck with a coarse step is still finite") {
  GradcheckOptions o;
  o.step = 1e-3;
  o.tolerance = 1.0;
  const RunReport r = run_gradcheck(o);
  CHECK(std::isfinite(r.checks.front().measured));
}

TEST_CASE("gradcheck with zero upstream gradient") {
  GradcheckOptions o;
  o.zero_dout = true;
  const RunReport r = run_gradcheck(o);
  CHECK(r.passed());
  CHECK(r.metrics.at("max_abs_gradient").get<double>() == 0.0);
}

TEST_CASE("bench reports and validates its op") {
  BenchOptions o;
  o.height = 14;
  o.width = 14;
  o.channels = 8;
  o.kernel = 3;
  o.iters = 1;
  const RunReport r = run_bench(o);
  CHECK(r.passed());
  CHECK(r.metrics.at("scaling_macs_ratio").get<double>() == 2.0);
  o.op = "bogus";
  CHECK_THROWS_AS(run_bench(o), ConfigError);
}

TEST_CASE("reference allocates far more than the fused kernel") {
  const auto a = compare_allocations(56, 56, 64, 1, 7, 42);
  CHECK(a.ratio() > 10.0);
}

TEST_CASE("precision names") {
  CHECK(parse_precision("f32") == Precision::kFloat32);
  CHECK(precision_name(Precision::kFloat64) == "f64");
  CHECK_THROWS_AS(parse_precision("f16"), ConfigError);
}

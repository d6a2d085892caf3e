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
#include "nat/ops.hpp"
#include "nat/parallel.hpp"
#include "nat/rng.hpp"
#include "nat/tensor.hpp"
#include "oracles.hpp"

using namespace nat;

TEST_CASE("tensor indexing is row-major") {
  Tensord t({2, 3, 4});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK(t(1, 2, 3) == 23.0);
  CHECK(t(0, 1, 0) == 4.0);
  CHECK(t.dim(-1) == 4);
  CHECK(t.rank() == 3);
  CHECK_THROWS_AS(t(2, 0, 0), IndexError);
  CHECK_THROWS_AS(t(0, 0), IndexError);
}

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensorf({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensorf({2, 2}, std::vector<float>(3)), DimensionError);
  CHECK(Tensorf::constant({2, 2}, 1.5f)[3] == 1.5f);
  Tensorf t({2, 6});
  CHECK(t.reshaped({3, 4}).shape() == Shape{3, 4});
  CHECK_THROWS_AS(t.reshaped({5}), DimensionError);
}

TEST_CASE("allocation counter tracks buffers") {
  const auto before = alloc_stats::scalars_allocated();
  Tensorf a({10, 10});
  Tensorf b = a;
  CHECK(alloc_stats::scalars_allocated() - before == 200);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(7).next_u64() != c.next_u64());
  Rng r(3);
  for (int i = 0; i < 1000; ++i) CHECK(std::abs(r.truncated_normal(0.02)) <= 0.04);
}

TEST_CASE("matmul and linear agree with a triple loop") {
  Rng rng(1);
  const Tensord a = random_normal<double>({5, 7}, rng);
  const Tensord b = random_normal<double>({7, 3}, rng);
  const Tensord bias = random_normal<double>({3}, rng);
  const Tensord y = linear(a, b, bias);
  const Tensord m = matmul(a, b);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 3; ++j) {
      double acc = 0;
      for (Index k = 0; k < 7; ++k) acc += a(i, k) * b(k, j);
      CHECK(m(i, j) == doctest::Approx(acc).epsilon(1e-12));
      CHECK(y(i, j) == doctest::Approx(acc + bias[j]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("softmax is stable for large logits and rejects non-finite input") {
  const Tensord x({1, 3}, {1000.0, 1001.0, 1002.0});
  const Tensord p = softmax_last(x);
  const double e1 = std::exp(-1.0), e2 = std::exp(-2.0);
  CHECK(p[2] == doctest::Approx(1.0 / (1.0 + e1 + e2)));
  CHECK(p[0] == doctest::Approx(e2 / (1.0 + e1 + e2)));
  const Tensord bad({1, 2}, {0.0, std::nan("")});
  CHECK_THROWS_AS(softmax_last(bad), NumericError);
}

TEST_CASE("layer norm uses the population variance") {
  const Tensord x({1, 4}, {1.0, 2.0, 3.0, 4.0});
  const Tensord y = layer_norm(x, Tensord::constant({4}, 1.0), Tensord({4}));
  const double sd = std::sqrt(1.25 + kLayerNormEps);
  CHECK(y[0] == doctest::Approx(-1.5 / sd).epsilon(1e-12));
  CHECK(y[3] == doctest::Approx(1.5 / sd).epsilon(1e-12));
  const Tensord flat = layer_norm(Tensord::constant({2, 3}, 5.0), Tensord::constant({3}, 2.0),
                                  Tensord::constant({3}, 0.5));
  for (double v : flat.data()) CHECK(v == 0.5);
}

TEST_CASE("gelu matches the erf form") {
  const Tensord x({3}, {-1.0, 0.0, 1.0});
  const Tensord y = gelu(x);
  CHECK(y[0] == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(std::abs(gelu(Tensord({1}, {10.0}))[0] - 10.0) < 1e-6);
}

TEST_CASE("conv2d matches the direct loop") {
  Rng rng(2);
  for (Index stride : {1, 2}) {
    const Tensord x = random_normal<double>({9, 7, 3}, rng);
    const Tensord w = random_normal<double>({3, 3, 3, 5}, rng);
    const Tensord b = random_normal<double>({5}, rng);
    const Tensord got = conv2d(x, w, b, stride, 1);
    const Tensord want = oracle::conv(x, w, b, stride, 1);
    REQUIRE(got.shape() == want.shape());
    CHECK(oracle::max_abs_diff(got, want) < 1e-12);
  }
  CHECK_THROWS_AS(conv2d(Tensord({4, 4, 1}), Tensord({2, 2, 1, 1}), Tensord({1}), 1, 0), ConfigError);
}

TEST_CASE("global average pool") {
  const Tensord x({2, 2, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  const Tensord y = global_avg_pool(x);
  CHECK(y[0] == 2.5);
  CHECK(y[1] == 25.0);
}

TEST_CASE("parallel_for covers every index exactly once") {
  const int saved = num_threads();
  set_num_threads(4);
  std::vector<int> hits(1000);
  parallel_for(1000, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
    for (auto i = b; i < e; ++i) ++hits[static_cast<std::size_t>(i)];
  });
  set_num_threads(saved);
  for (int h : hits) CHECK(h == 1);
}

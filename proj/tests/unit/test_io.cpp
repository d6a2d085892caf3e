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

#include <sstream>

#include "nat/errors.hpp"
#include "nat/io.hpp"
#include "nat/rng.hpp"

using namespace nat;

TEST_CASE("NTSR round trip in both precisions") {
  Rng rng(1);
  const Tensorf f = random_normal<float>({2, 3, 4}, rng);
  const Tensord d = random_normal<double>({5}, rng);
  std::stringstream a, b;
  write_ntsr(a, f);
  write_ntsr(b, d);
  CHECK(std::get<Tensorf>(read_ntsr(a)) == f);
  CHECK(std::get<Tensord>(read_ntsr(b)) == d);
}

TEST_CASE("NTSR header layout") {
  std::stringstream s;
  write_ntsr(s, Tensorf({2, 3}, {1, 2, 3, 4, 5, 6}));
  const std::string bytes = s.str();
  CHECK(bytes.substr(0, 4) == "NTSR");
  CHECK(bytes.size() == 4 + 4 + 1 + 1 + 2 * 4 + 6 * 4);
  CHECK(bytes[8] == 0);
  CHECK(bytes[9] == 2);
}

TEST_CASE("corrupt NTSR input is rejected") {
  std::stringstream s;
  write_ntsr(s, Tensorf({3}));
  std::string bytes = s.str();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream m(bad_magic);
  CHECK_THROWS_AS(read_ntsr(m), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_ntsr(truncated), FormatError);
  std::string bad_dtype = bytes;
  bad_dtype[8] = 7;
  std::stringstream t(bad_dtype);
  CHECK_THROWS_AS(read_ntsr(t), FormatError);
  CHECK_THROWS_AS(load_ntsr("/nonexistent/x.ntsr"), IoError);
}

TEST_CASE("NATW round trip and conversion") {
  Rng rng(2);
  std::map<std::string, Tensord> tensors{{"a.weight", random_normal<double>({3, 2}, rng)},
                                         {"b", random_normal<double>({4}, rng)}};
  std::stringstream s;
  write_natw(s, tensors);
  const auto back = read_natw(s);
  REQUIRE(back.size() == 2);
  CHECK(std::get<Tensord>(back.at("a.weight")) == tensors.at("a.weight"));
  CHECK(to_precision<float>(back.at("b")) == tensors.at("b").cast<float>());
}

TEST_CASE("corrupt NATW input is rejected") {
  std::stringstream s("NTSR0000");
  CHECK_THROWS_AS(read_natw(s), FormatError);
}

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
#include <iosfwd>
#include <map>
#include <string>
#include <variant>

#include "nat/tensor.hpp"

namespace nat {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename Scalar>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kFloat32; }
template <>
constexpr DType dtype_of<double>() { return DType::kFloat64; }

/// A tensor as stored on disk, before conversion to a working precision.
using AnyTensor = std::variant<Tensorf, Tensord>;

template <typename Scalar>
Tensor<Scalar> to_precision(const AnyTensor& t) {
  return std::visit(
      [](const auto& v) -> Tensor<Scalar> {
        using Stored = typename std::decay_t<decltype(v)>::value_type;
        if constexpr (std::is_same_v<Stored, Scalar>) {
          return v;
        } else {
          return v.template cast<Scalar>();
        }
      },
      t);
}

// NTSR: "NTSR" magic, u32 version (1), u8 dtype, u8 rank, rank x u32 extents,
// row-major little-endian payload.
inline constexpr std::uint32_t kNtsrVersion = 1;
inline constexpr std::uint32_t kNatwVersion = 1;

template <typename Scalar>
void write_ntsr(std::ostream& out, const Tensor<Scalar>& t);
AnyTensor read_ntsr(std::istream& in);

template <typename Scalar>
void save_ntsr(const std::string& path, const Tensor<Scalar>& t);
AnyTensor load_ntsr(const std::string& path);

/// Named tensors in NATW layout: "NATW" magic, u32 version, u32 count, then per
/// tensor u16 name length, UTF-8 name, u8 dtype, u8 rank, extents, payload.
/// Entries are written in map order.
template <typename Scalar>
void write_natw(std::ostream& out, const std::map<std::string, Tensor<Scalar>>& tensors);
std::map<std::string, AnyTensor> read_natw(std::istream& in);

template <typename Scalar>
void save_natw(const std::string& path, const std::map<std::string, Tensor<Scalar>>& tensors);
std::map<std::string, AnyTensor> load_natw(const std::string& path);

}  // namespace nat

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

#include "nat/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nat {

namespace {

constexpr std::array<char, 4> kNtsrMagic{'N', 'T', 'S', 'R'};
constexpr std::array<char, 4> kNatwMagic{'N', 'A', 'T', 'W'};

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError(std::string("truncated stream while reading ") + what);
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

template <typename Scalar>
void put_payload(std::ostream& out, const Tensor<Scalar>& t) {
  using Bits = std::conditional_t<sizeof(Scalar) == 4, std::uint32_t, std::uint64_t>;
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
  } else {
    for (Scalar v : t.data()) put_le<Bits>(out, std::bit_cast<Bits>(v));
  }
}

template <typename Scalar>
Tensor<Scalar> get_payload(std::istream& in, Shape shape) {
  using Bits = std::conditional_t<sizeof(Scalar) == 4, std::uint32_t, std::uint64_t>;
  Tensor<Scalar> t(std::move(shape));
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
    if (!in) throw FormatError("truncated tensor payload");
  } else {
    for (auto& v : t.data()) v = std::bit_cast<Scalar>(get_le<Bits>(in, "tensor payload"));
  }
  return t;
}

template <typename Scalar>
void put_header_and_payload(std::ostream& out, const Tensor<Scalar>& t) {
  if (t.rank() > 255) throw FormatError("tensor rank exceeds 255");
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_of<Scalar>()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (Index e : t.shape()) {
    if (e > static_cast<Index>(UINT32_MAX)) throw FormatError("tensor extent exceeds u32 range");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  }
  put_payload(out, t);
}

AnyTensor get_header_and_payload(std::istream& in) {
  const auto dtype = get_le<std::uint8_t>(in, "dtype");
  const auto rank = get_le<std::uint8_t>(in, "rank");
  if (rank == 0) throw FormatError("tensor rank must be at least 1");
  Shape shape;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const auto e = get_le<std::uint32_t>(in, "extent");
    if (e == 0) throw FormatError("tensor extent must be positive");
    shape.push_back(static_cast<Index>(e));
  }
  if (shape_size(shape) > (Index{1} << 32)) throw FormatError("tensor of shape " + shape_string(shape) + " is implausibly large");
  switch (static_cast<DType>(dtype)) {
    case DType::kFloat32:
      return get_payload<float>(in, std::move(shape));
    case DType::kFloat64:
      return get_payload<double>(in, std::move(shape));
  }
  throw FormatError("unknown dtype code " + std::to_string(dtype));
}

void expect_magic(std::istream& in, const std::array<char, 4>& magic, const char* format) {
  std::array<char, 4> got{};
  in.read(got.data(), got.size());
  if (!in || got != magic) throw FormatError(std::string("bad magic bytes: not a ") + format + " file");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

template <typename Scalar>
void write_ntsr(std::ostream& out, const Tensor<Scalar>& t) {
  out.write(kNtsrMagic.data(), kNtsrMagic.size());
  put_le<std::uint32_t>(out, kNtsrVersion);
  put_header_and_payload(out, t);
}

AnyTensor read_ntsr(std::istream& in) {
  expect_magic(in, kNtsrMagic, "NTSR");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kNtsrVersion) throw FormatError("unsupported NTSR version " + std::to_string(version));
  return get_header_and_payload(in);
}

template <typename Scalar>
void save_ntsr(const std::string& path, const Tensor<Scalar>& t) {
  auto out = open_out(path);
  write_ntsr(out, t);
  if (!out) throw IoError("failed writing '" + path + "'");
}

AnyTensor load_ntsr(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_ntsr(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

template <typename Scalar>
void write_natw(std::ostream& out, const std::map<std::string, Tensor<Scalar>>& tensors) {
  out.write(kNatwMagic.data(), kNatwMagic.size());
  put_le<std::uint32_t>(out, kNatwVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > UINT16_MAX) throw FormatError("tensor name too long: " + name.substr(0, 32));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_header_and_payload(out, t);
  }
}

std::map<std::string, AnyTensor> read_natw(std::istream& in) {
  expect_magic(in, kNatwMagic, "NATW");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kNatwVersion) throw FormatError("unsupported NATW version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::map<std::string, AnyTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto length = get_le<std::uint16_t>(in, "name length");
    std::string name(length, '\0');
    in.read(name.data(), length);
    if (!in) throw FormatError("truncated tensor name");
    if (tensors.count(name)) throw FormatError("duplicate tensor name '" + name + "'");
    tensors.emplace(name, get_header_and_payload(in));
  }
  return tensors;
}

template <typename Scalar>
void save_natw(const std::string& path, const std::map<std::string, Tensor<Scalar>>& tensors) {
  auto out = open_out(path);
  write_natw(out, tensors);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::map<std::string, AnyTensor> load_natw(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_natw(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

template void write_ntsr(std::ostream&, const Tensor<float>&);
template void write_ntsr(std::ostream&, const Tensor<double>&);
template void save_ntsr(const std::string&, const Tensor<float>&);
template void save_ntsr(const std::string&, const Tensor<double>&);
template void write_natw(std::ostream&, const std::map<std::string, Tensor<float>>&);
template void write_natw(std::ostream&, const std::map<std::string, Tensor<double>>&);
template void save_natw(const std::string&, const std::map<std::string, Tensor<float>>&);
template void save_natw(const std::string&, const std::map<std::string, Tensor<double>>&);

}  // namespace nat

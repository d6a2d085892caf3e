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

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nat/errors.hpp"

namespace nat {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

// Counts scalars allocated by tensor buffers. Used by benchmarks to compare the
// transient footprint of different kernels; relaxed ordering is sufficient.
namespace alloc_stats {
inline std::atomic<std::int64_t>& counter() {
  static std::atomic<std::int64_t> value{0};
  return value;
}
inline std::int64_t scalars_allocated() { return counter().load(std::memory_order_relaxed); }
inline void record(std::int64_t n) { counter().fetch_add(n, std::memory_order_relaxed); }
}  // namespace alloc_stats

/// Dense row-major tensor with an explicit shape. Rank is at least one and every
/// extent is at least one, so a tensor always holds at least one scalar.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() : Tensor(Shape{1}) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), Scalar(0));
    alloc_stats::record(static_cast<std::int64_t>(data_.size()));
  }

  Tensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (static_cast<Index>(data_.size()) != shape_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
    alloc_stats::record(static_cast<std::int64_t>(data_.size()));
  }

  Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_) {
    alloc_stats::record(static_cast<std::int64_t>(data_.size()));
  }
  Tensor& operator=(const Tensor& other) {
    if (this != &other) {
      shape_ = other.shape_;
      data_ = other.data_;
      alloc_stats::record(static_cast<std::int64_t>(data_.size()));
    }
    return *this;
  }
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return static_cast<Index>(data_.size()); }
  Index dim(Index axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank()) {
      throw IndexError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
    }
    return shape_[static_cast<std::size_t>(axis)];
  }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  Scalar* raw() { return data_.data(); }
  const Scalar* raw() const { return data_.data(); }

  Scalar& operator[](Index flat) { return data_[static_cast<std::size_t>(flat)]; }
  const Scalar& operator[](Index flat) const { return data_[static_cast<std::size_t>(flat)]; }

  template <typename... Idx>
  Scalar& operator()(Idx... idx) {
    return data_[static_cast<std::size_t>(offset({static_cast<Index>(idx)...}))];
  }
  template <typename... Idx>
  const Scalar& operator()(Idx... idx) const {
    return data_[static_cast<std::size_t>(offset({static_cast<Index>(idx)...}))];
  }

  Index offset(std::initializer_list<Index> idx) const {
    if (static_cast<Index>(idx.size()) != rank()) {
      throw IndexError("index rank " + std::to_string(idx.size()) + " does not match shape " + shape_string(shape_));
    }
    Index flat = 0;
    std::size_t axis = 0;
    for (Index i : idx) {
      if (i < 0 || i >= shape_[axis]) {
        throw IndexError("index " + std::to_string(i) + " out of range on axis " + std::to_string(axis) +
                         " of shape " + shape_string(shape_));
      }
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  /// Same buffer viewed under a new shape with an equal element count.
  Tensor reshaped(Shape shape) && {
    if (shape_size(shape) != size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    validate_shape(shape);
    shape_ = std::move(shape);
    return std::move(*this);
  }
  Tensor reshaped(Shape shape) const& { return Tensor(*this).reshaped(std::move(shape)); }

  /// Rows = product of leading extents, cols = last extent.
  MatrixMap<Scalar> matrix() { return MatrixMap<Scalar>(data_.data(), size() / shape_.back(), shape_.back()); }
  ConstMatrixMap<Scalar> matrix() const {
    return ConstMatrixMap<Scalar>(data_.data(), size() / shape_.back(), shape_.back());
  }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](Scalar v) { return static_cast<Other>(v); });
    return Tensor<Other>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
    for (Index e : shape) {
      if (e < 1) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace nat

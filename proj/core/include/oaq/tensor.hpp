// Copyright 2026 The OAQ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "oaq/errors.hpp"

namespace oaq {

using Shape = std::vector<int64_t>;

enum class DType : uint8_t { kFloat32 = 0, kInt8 = 1, kInt16 = 2, kInt32 = 3 };

const char* dtype_name(DType dtype);
DType dtype_from_name(const std::string& name);
size_t dtype_size(DType dtype);

template <typename T>
struct DTypeOf;
template <>
struct DTypeOf<float> {
  static constexpr DType value = DType::kFloat32;
};
template <>
struct DTypeOf<int8_t> {
  static constexpr DType value = DType::kInt8;
};
template <>
struct DTypeOf<int16_t> {
  static constexpr DType value = DType::kInt16;
};
template <>
struct DTypeOf<int32_t> {
  static constexpr DType value = DType::kInt32;
};

int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor. The element type fixes the dtype, so the range
/// invariant holds by construction for the integer payloads.
template <typename T>
class Tensor {
 public:
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, int8_t> ||
                    std::is_same_v<T, int16_t> || std::is_same_v<T, int32_t>,
                "unsupported tensor element type");
  static constexpr DType kDType = DTypeOf<T>::value;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
      throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                       " elements, shape " + shape_string(shape_) + " needs " +
                       std::to_string(shape_numel(shape_)));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int64_t dim(size_t axis) const { return shape_.at(axis); }
  size_t rank() const noexcept { return shape_.size(); }
  int64_t numel() const noexcept { return static_cast<int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Element access for rank-2 tensors.
  T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  const T& at(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
  }

  /// Same payload, new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    Tensor out;
    out.shape_ = std::move(shape);
    validate_shape(out.shape_);
    if (shape_numel(out.shape_) != numel()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(out.shape_));
    }
    out.data_ = data_;
    return out;
  }

  bool operator==(const Tensor& other) const = default;

 private:
  static void validate_shape(const Shape& shape) {
    for (int64_t d : shape) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_string(shape));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using FloatTensor = Tensor<float>;
using Int8Tensor = Tensor<int8_t>;
using Int16Tensor = Tensor<int16_t>;
using Int32Tensor = Tensor<int32_t>;

/// Interprets a tensor of rank >= 2 as [shape[0], rest...] flattened to a matrix.
inline std::pair<int64_t, int64_t> as_matrix_dims(const Shape& shape) {
  if (shape.empty()) throw ShapeError("scalar tensor cannot be viewed as a matrix");
  const int64_t rows = shape[0];
  int64_t cols = 1;
  for (size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  return {rows, cols};
}

}  // namespace oaq

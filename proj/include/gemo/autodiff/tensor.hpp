// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gemo/errors.hpp"

namespace gemo::ad {

using Shape = std::vector<std::size_t>;

// Validity flag per row (1 = valid). Used both for padded sets and key masks.
using RowMask = std::vector<std::uint8_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array. Extents may be zero so that empty cue sets (no
/// detected objects) stay representable; graph operations reject empty
/// operands where a reduction would be undefined.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  // 1×n row vector.
  static Tensor row(std::initializer_list<T> values) {
    return Tensor({1, values.size()}, std::vector<T>(values));
  }

  static Tensor scalar(T value) { return Tensor({1, 1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 element access.
  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  T item() const {
    if (data_.size() != 1) {
      throw ContractError("item() on non-scalar tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Learnable tensor with its accumulated gradient. Owned by a parameter store;
/// graphs hold non-owning pointers while a step is in flight.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

}  // namespace gemo::ad

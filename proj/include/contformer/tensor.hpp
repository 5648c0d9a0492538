// Copyright 2026 The ContFormer Authors.
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

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

namespace contformer {

// Dense row-major tensor of doubles. Rank is arbitrary but every math op in
// the autograd layer treats tensors as 2-D (rows x cols); higher-rank data
// (frames, query grids) is kept flattened with explicit index bookkeeping.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape)
      : shape_(std::move(shape)), v_(numel_of(shape_), 0.0) {}

  static Tensor zeros(std::vector<std::int64_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<std::int64_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.v_.begin(), t.v_.end(), value);
    return t;
  }
  static Tensor scalar(double value) { return full({1, 1}, value); }
  static Tensor from(std::vector<std::int64_t> shape,
                     std::vector<double> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.v_ = std::move(values);
    assert(static_cast<std::int64_t>(t.v_.size()) == numel_of(t.shape_));
    return t;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t numel() const {
    return static_cast<std::int64_t>(v_.size());
  }
  std::int64_t rank() const {
    return static_cast<std::int64_t>(shape_.size());
  }

  // 2-D accessors; rank-1 tensors are treated as a single row.
  std::int64_t rows() const {
    return shape_.size() >= 2 ? shape_[0] : 1;
  }
  std::int64_t cols() const {
    return shape_.size() >= 2 ? shape_[1] : (shape_.empty() ? 0 : shape_[0]);
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator()(std::int64_t r, std::int64_t c) {
    return v_[static_cast<std::size_t>(r * cols() + c)];
  }
  double operator()(std::int64_t r, std::int64_t c) const {
    return v_[static_cast<std::size_t>(r * cols() + c)];
  }
  double& operator[](std::int64_t i) {
    return v_[static_cast<std::size_t>(i)];
  }
  double operator[](std::int64_t i) const {
    return v_[static_cast<std::size_t>(i)];
  }

  // In-place shape change; element count must be preserved.
  void reshape(std::vector<std::int64_t> shape) {
    assert(numel_of(shape) == numel());
    shape_ = std::move(shape);
  }

  void fill(double value) { std::fill(v_.begin(), v_.end(), value); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;
  double max_abs() const;
  std::string shape_str() const;

  static std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> v_;
};

}  // namespace contformer

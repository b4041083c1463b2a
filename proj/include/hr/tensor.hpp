/*
 * Copyright 2026 The Hybrid Replay Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hr {

/// Dense row-major tensor of doubles. Rank 1 and rank 2 are the only shapes
/// the simulator needs, but any positive shape is accepted.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view: rank-1 tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Copies the given rows into a new [indices.size(), cols] matrix.
  Tensor gather_rows(std::span<const std::size_t> indices) const;
  /// Columns [begin, begin + count) as a new matrix.
  Tensor slice_cols(std::size_t begin, std::size_t count) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Named parameter tensors. std::map keeps iteration lexicographic, which
/// every reduction relies on for bit-determinism.
using ParamSet = std::map<std::string, Tensor>;

/// Throws kConfig unless both sets carry the same keys with equal shapes.
void require_compatible(const ParamSet& a, const ParamSet& b, const char* context);

ParamSet zeros_like(const ParamSet& params);

/// Adds `scale * src` into every matching entry of `dst` (keys must exist in dst).
void accumulate(ParamSet& dst, const ParamSet& src, double scale = 1.0);

/// HRPARAMS1 text records: name, rank, dims, values.
void write_params(std::ostream& out, const ParamSet& params);
ParamSet read_params(std::istream& in);

}  // namespace hr

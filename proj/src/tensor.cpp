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

#include "hr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

#include "hr/error.hpp"
#include "hr/text_io.hpp"

namespace hr {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) fail(ErrorKind::kConfig, "tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) fail(ErrorKind::kConfig, "tensor dimensions must be positive: " + shape_string(shape));
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    fail(ErrorKind::kConfig, "tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorKind::kConfig, "ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() >= 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 0;
  return shape_.size() >= 2 ? data_.size() / shape_[0] : shape_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  if (indices.empty()) return Tensor();
  const std::size_t c = cols();
  Tensor out = Tensor::matrix(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) fail(ErrorKind::kConfig, "row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * c), c,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return out;
}

Tensor Tensor::slice_cols(std::size_t begin, std::size_t count) const {
  if (begin + count > cols()) fail(ErrorKind::kConfig, "column slice out of range");
  Tensor out = Tensor::matrix(rows(), count);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, begin + c);
  }
  return out;
}

void require_compatible(const ParamSet& a, const ParamSet& b, const char* context) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kConfig, std::string(context) + ": parameter sets differ in size (" +
                                 std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      fail(ErrorKind::kConfig, std::string(context) + ": missing key '" + ia->first + "'");
    }
    if (!ia->second.same_shape(ib->second)) {
      fail(ErrorKind::kConfig, std::string(context) + ": shape mismatch for '" + ia->first + "'");
    }
  }
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape(), 0.0));
  return out;
}

void accumulate(ParamSet& dst, const ParamSet& src, double scale) {
  for (const auto& [name, t] : src) {
    auto it = dst.find(name);
    if (it == dst.end()) fail(ErrorKind::kConfig, "accumulate: missing key '" + name + "'");
    if (!it->second.same_shape(t)) fail(ErrorKind::kConfig, "accumulate: shape mismatch for '" + name + "'");
    auto d = it->second.values();
    auto s = t.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  }
}

void write_params(std::ostream& out, const ParamSet& params) {
  out << "HRPARAMS1\n" << params.size() << "\n";
  for (const auto& [name, t] : params) {
    out << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << (i ? " " : "") << format_double(t[i]);
    }
    out << '\n';
  }
}

ParamSet read_params(std::istream& in) {
  expect_header(in, "HRPARAMS1");
  auto count = next_int(in, "entry count");
  if (count < 0) fail(ErrorKind::kData, "negative entry count");
  ParamSet params;
  for (std::int64_t e = 0; e < count; ++e) {
    auto name = next_token(in, "entry name");
    auto rank = next_int(in, "rank");
    if (rank <= 0 || rank > 8) fail(ErrorKind::kData, "invalid rank for '" + name + "'");
    std::vector<std::size_t> shape;
    for (std::int64_t r = 0; r < rank; ++r) {
      auto d = next_int(in, "dimension");
      if (d <= 0) fail(ErrorKind::kData, "invalid dimension for '" + name + "'");
      shape.push_back(static_cast<std::size_t>(d));
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = next_double(in, "parameter value");
    if (!t.all_finite()) fail(ErrorKind::kData, "non-finite values in '" + name + "'");
    if (!params.emplace(name, std::move(t)).second) {
      fail(ErrorKind::kData, "duplicate entry '" + name + "'");
    }
  }
  return params;
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kDivergence: return "divergence error";
    case ErrorKind::kDegenerate: return "degenerate configuration";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kVersion: return "version mismatch";
  }
  return "error";
}

}  // namespace hr

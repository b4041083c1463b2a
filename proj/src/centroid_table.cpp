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

#include "hr/centroid_table.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "hr/error.hpp"
#include "hr/text_io.hpp"

namespace hr {

std::string to_string(const ClassKey& key) {
  return "(task " + std::to_string(key.task) + ", class " + std::to_string(key.cls) + ")";
}

const CentroidEntry& CentroidTable::at(const ClassKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(ErrorKind::kProtocol, "no centroid for " + to_string(key));
  return it->second;
}

CentroidEntry& CentroidTable::at(const ClassKey& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(ErrorKind::kProtocol, "no centroid for " + to_string(key));
  return it->second;
}

const CentroidEntry* CentroidTable::find(const ClassKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void CentroidTable::insert(const ClassKey& key, CentroidEntry entry) {
  if (entry.embedding.empty()) fail(ErrorKind::kConfig, "empty centroid embedding for " + to_string(key));
  if (dim_ == 0) dim_ = entry.embedding.size();
  if (entry.embedding.size() != dim_) {
    fail(ErrorKind::kConfig, "centroid for " + to_string(key) + " has dimension " +
                                 std::to_string(entry.embedding.size()) + ", table uses " +
                                 std::to_string(dim_));
  }
  if (!std::all_of(entry.embedding.begin(), entry.embedding.end(), [](double v) { return std::isfinite(v); })) {
    fail(ErrorKind::kConfig, "non-finite centroid for " + to_string(key));
  }
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    if (it->second.frozen) fail(ErrorKind::kProtocol, "centroid " + to_string(key) + " is already frozen");
    it->second = std::move(entry);
    return;
  }
  entries_.emplace(key, std::move(entry));
}

void CentroidTable::freeze_all() {
  for (auto& [key, e] : entries_) e.frozen = true;
}

std::vector<ClassKey> CentroidTable::keys() const {
  std::vector<ClassKey> out;
  out.reserve(entries_.size());
  for (const auto& [key, e] : entries_) out.push_back(key);
  return out;
}

std::vector<ClassKey> CentroidTable::keys_for_task(int task) const {
  std::vector<ClassKey> out;
  for (const auto& [key, e] : entries_) {
    if (key.task == task) out.push_back(key);
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

NearestCentroid nearest_centroid(const CentroidTable& table, std::span<const double> point) {
  if (table.empty()) fail(ErrorKind::kProtocol, "classification needs a non-empty centroid table");
  if (point.size() != table.dim()) {
    fail(ErrorKind::kConfig, "query dimension " + std::to_string(point.size()) +
                                 " does not match centroid dimension " + std::to_string(table.dim()));
  }
  // Map order is (task, class) ascending and keys are unique, so a strict
  // comparison already yields the lowest triple among exact ties.
  NearestCentroid best;
  bool first = true;
  for (const auto& [key, e] : table) {
    const double d = squared_distance(point, e.embedding);
    if (first || d < best.squared_distance) {
      best = {key, e.origin_client, d};
      first = false;
    }
  }
  return best;
}

void write_centroids(std::ostream& out, const CentroidTable& table) {
  out << "HRCENTS1\n" << table.size() << ' ' << table.dim() << '\n';
  for (const auto& [key, e] : table) {
    out << key.task << ' ' << key.cls << ' ' << e.origin_client << ' ' << e.embedding.size();
    for (double v : e.embedding) out << ' ' << format_double(v);
    out << ' ' << (e.frozen ? 1 : 0) << '\n';
  }
}

CentroidTable read_centroids(std::istream& in) {
  expect_header(in, "HRCENTS1");
  auto count = next_int(in, "centroid count");
  auto dim = next_int(in, "centroid dimension");
  if (count < 0 || dim < 0 || (count > 0 && dim == 0)) fail(ErrorKind::kData, "invalid centroid table header");
  CentroidTable table(static_cast<std::size_t>(dim));
  for (std::int64_t i = 0; i < count; ++i) {
    ClassKey key;
    key.task = static_cast<int>(next_int(in, "task"));
    key.cls = static_cast<int>(next_int(in, "class"));
    CentroidEntry e;
    e.origin_client = static_cast<int>(next_int(in, "client"));
    auto m = next_int(in, "embedding size");
    if (m != dim) fail(ErrorKind::kData, "centroid record dimension mismatch for " + to_string(key));
    for (std::int64_t k = 0; k < m; ++k) e.embedding.push_back(next_double(in, "embedding value"));
    auto frozen = next_int(in, "frozen flag");
    if (frozen != 0 && frozen != 1) fail(ErrorKind::kData, "frozen flag must be 0 or 1");
    if (table.contains(key)) fail(ErrorKind::kData, "duplicate centroid " + to_string(key));
    table.insert(key, std::move(e));
    table.at(key).frozen = frozen == 1;
  }
  return table;
}

}  // namespace hr

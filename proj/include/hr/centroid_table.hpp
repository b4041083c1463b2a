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

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hr {

/// A class as the federation knows it: the task that introduced it and its
/// dataset label.
struct ClassKey {
  int task = 0;
  int cls = 0;

  friend auto operator<=>(const ClassKey&, const ClassKey&) = default;
};

std::string to_string(const ClassKey& key);

struct CentroidEntry {
  std::vector<double> embedding;
  int origin_client = 0;
  bool frozen = false;
};

/// Latent anchors for every class known so far, ordered by (task, class).
class CentroidTable {
 public:
  using Map = std::map<ClassKey, CentroidEntry>;

  CentroidTable() = default;
  explicit CentroidTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const ClassKey& key) const { return entries_.count(key) != 0; }

  const CentroidEntry& at(const ClassKey& key) const;
  CentroidEntry& at(const ClassKey& key);
  const CentroidEntry* find(const ClassKey& key) const;

  /// Fails with kProtocol if the key exists and is frozen, kConfig on a
  /// dimension mismatch or non-finite embedding.
  void insert(const ClassKey& key, CentroidEntry entry);
  void freeze_all();

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

  std::vector<ClassKey> keys() const;
  std::vector<ClassKey> keys_for_task(int task) const;

  friend bool operator==(const CentroidTable& a, const CentroidTable& b) {
    if (a.dim_ != b.dim_ || a.entries_.size() != b.entries_.size()) return false;
    for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.embedding != ib->second.embedding ||
          ia->second.origin_client != ib->second.origin_client ||
          ia->second.frozen != ib->second.frozen) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t dim_ = 0;
  Map entries_;
};

struct NearestCentroid {
  ClassKey key;
  int client = 0;
  double squared_distance = 0.0;
};

/// Argmin of Euclidean distance over all entries; exact ties go to the lowest
/// (task, class, client). Fails with kProtocol on an empty table.
NearestCentroid nearest_centroid(const CentroidTable& table, std::span<const double> point);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// HRCENTS1 text records: task class client m p_1..p_m frozen.
void write_centroids(std::ostream& out, const CentroidTable& table);
CentroidTable read_centroids(std::istream& in);

}  // namespace hr

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
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "hr/tensor.hpp"

namespace hr {

/// Labeled rows. `x` is [size, dim], or an empty tensor when there are no rows.
struct Dataset {
  Tensor x;
  std::vector<int> labels;
  std::size_t dim = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  Dataset subset(std::span<const std::size_t> indices) const;
  /// Row indices holding `label`, ascending.
  std::vector<std::size_t> indices_of(int label) const;
  Tensor rows_of(int label) const;
  /// Sorted distinct labels.
  std::vector<int> distinct_labels() const;
  void append(const Dataset& other);
};

struct BlobSpec {
  int classes = 10;
  int samples_per_class = 200;
  std::size_t dim = 16;
  double cluster_std = 1.0;
  /// Centers are uniform in [-separation, separation]^dim.
  double separation = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Isotropic Gaussian clusters whose centers lie at least 4 * cluster_std
/// apart (rejection sampled; kConfig after 10^4 rejections).
Dataset generate_blobs(const BlobSpec& spec);

/// Chunks an ordered label list into `tasks` groups of `per_task`.
std::vector<std::vector<int>> assign_classes_to_tasks(std::span<const int> ordered_labels, int tasks, int per_task);

/// Seeded permutation of the dataset's labels, chunked into tasks.
std::vector<std::vector<int>> split_into_tasks(const Dataset& data, int tasks, int per_task, std::uint64_t seed);

/// Per class: proportions ~ Dirichlet(alpha * 1_R), then the class's shuffled
/// rows are cut at the rounded cumulative proportions. Every row lands in
/// exactly one shard.
std::vector<Dataset> dirichlet_partition(const Dataset& data, int clients, double alpha, std::uint64_t seed);

/// "label,f_0,...,f_{n-1}" rows; a non-numeric first token marks a header.
Dataset load_csv_dataset(const std::filesystem::path& path);
void write_csv_dataset(const std::filesystem::path& path, const Dataset& data);

/// Shifts and scales every feature to zero mean and unit variance (constant
/// features are only centered).
void normalize_features(Dataset& data);

struct HoldoutSplit {
  Dataset train;
  Dataset eval;
};

/// Reserves floor(fraction * count) rows of every class for evaluation.
HoldoutSplit holdout_split(const Dataset& data, double fraction, std::uint64_t seed);

struct Task {
  int index = 1;  // 1-based
  std::vector<int> classes;
  std::vector<Dataset> shards;  // one per client
  Dataset eval;
};

struct StreamConfig {
  int tasks = 5;
  int classes_per_task = 2;
  int clients = 10;
  double alpha = 1.0;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TaskStream {
  std::vector<Task> tasks;
  std::size_t feature_dim = 0;
  int clients = 0;

  /// For each class, the client holding most of its training rows (ties to the lowest id).
  std::map<int, int> dominant_client() const;
  /// Task index (1-based) of every class.
  std::map<int, int> task_of_class() const;
};

TaskStream build_task_stream(const Dataset& data, const StreamConfig& cfg);

}  // namespace hr

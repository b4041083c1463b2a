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
#include <iosfwd>
#include <map>
#include <vector>

#include "hr/autoencoder.hpp"
#include "hr/centroid_table.hpp"
#include "hr/rng.hpp"
#include "hr/tensor.hpp"

namespace hr {

/// Fixed-budget exemplar memory. Vectors are latent codes (width m), or raw
/// inputs (width n) when the store backs the perfect-exemplar ablation.
///
/// Every registered class has a quota of floor(budget / classes), and the
/// remainder budget % classes goes one apiece to the lowest (task, class)
/// keys. Stored counts never exceed the quota of their class.
class LatentExemplarStore {
 public:
  using Vectors = std::vector<std::vector<double>>;
  using Map = std::map<ClassKey, Vectors>;

  LatentExemplarStore() = default;
  LatentExemplarStore(std::size_t budget, std::size_t vector_dim) : budget_(budget), dim_(vector_dim) {}

  std::size_t budget() const { return budget_; }
  std::size_t vector_dim() const { return dim_; }
  std::size_t class_count() const { return classes_.size(); }
  std::size_t total() const;
  std::size_t float_count() const { return total() * dim_; }
  bool empty() const { return total() == 0; }

  /// floor(budget / classes); 0 for an empty store.
  std::size_t base_quota() const;
  /// Quota of a registered class (or of `key` as if it were registered).
  std::size_t quota(const ClassKey& key) const;

  bool contains(const ClassKey& key) const { return classes_.count(key) != 0; }
  /// Stored vectors for the class; empty when absent.
  const Vectors& vectors(const ClassKey& key) const;
  const Map& classes() const { return classes_; }

  /// Registers `key`, shrinks existing classes to their new quotas by
  /// dropping their most recently stored vectors, then stores up to the new
  /// class's quota from `vectors` (in order).
  void add_class(const ClassKey& key, Vectors vectors);
  /// Rebuilds a store from serialized records; fails with kData if the
  /// records break the quota rule.
  static LatentExemplarStore restore(std::size_t budget, std::size_t vector_dim, Map classes);

  /// Replaces the vectors of a registered class; count must be unchanged.
  void replace(const ClassKey& key, Vectors vectors);

  /// Throws kProtocol if a count exceeds its quota or the total exceeds the budget.
  void check_invariants() const;

  friend bool operator==(const LatentExemplarStore&, const LatentExemplarStore&) = default;

 private:
  std::size_t quota_at(std::size_t index, std::size_t classes) const;

  std::size_t budget_ = 0;
  std::size_t dim_ = 0;
  Map classes_;
};

/// Encodes uniformly drawn, distinct rows of `class_data` (encoder means) into
/// a newly registered class. Fails with kData on empty data, kProtocol if the
/// class is already stored.
LatentExemplarStore admit_new_class(const LatentExemplarStore& store, const AutoencoderModel& encoder,
                                    const ClassKey& key, const Tensor& class_data, Rng& rng);

/// Same selection rule, but stores raw rows.
LatentExemplarStore admit_raw_class(const LatentExemplarStore& store, const ClassKey& key, const Tensor& class_data,
                                    Rng& rng);

/// v -> mean(f_new(g_old(v))) for every stored vector.
LatentExemplarStore reencode_memory(const LatentExemplarStore& store, const AutoencoderModel& old_decoder,
                                    const AutoencoderModel& new_encoder);

enum class ReplaySource { kLocalData, kLatentExemplar, kRawExemplar, kCentroidNoise };

const char* to_string(ReplaySource source);

struct ReplayConfig {
  double noise_sigma = 0.1;
  /// 0 selects max(base quota, 8).
  std::size_t samples_per_class = 0;
  /// Decode noised centroids for classes absent from memory.
  bool global_replay = true;
  /// Stored vectors are raw inputs and are replayed without decoding.
  bool raw_exemplars = false;

  std::size_t effective_samples_per_class(const LatentExemplarStore& store) const;
};

struct LabeledBatch {
  Tensor x;
  std::vector<ClassKey> labels;
  std::vector<ReplaySource> sources;

  std::size_t size() const { return labels.size(); }
  void append(const Tensor& rows, const ClassKey& key, ReplaySource source);
  void append(const LabeledBatch& other);
};

/// Replay samples for every class of tasks before `current_task` in the
/// centroid table: decoded exemplars when this client stores some, otherwise
/// decoded centroid + N(0, noise_sigma^2) draws (if global replay is on).
LabeledBatch synthesize_replay(const LatentExemplarStore& store, const CentroidTable& centroids,
                               const AutoencoderModel& decoder, int current_task, const ReplayConfig& cfg, Rng& rng);

/// HRMEM1 text records.
void write_store(std::ostream& out, const LatentExemplarStore& store);
LatentExemplarStore read_store(std::istream& in);

}  // namespace hr

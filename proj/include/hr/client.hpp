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
#include <map>
#include <optional>
#include <vector>

#include "hr/alignment.hpp"
#include "hr/autoencoder.hpp"
#include "hr/centroid_table.hpp"
#include "hr/data.hpp"
#include "hr/replay_memory.hpp"

namespace hr {

struct ClientConfig {
  int epochs = 1;
  std::size_t batch_size = 32;
  double lr = 0.05;
  /// Rescales each minibatch gradient to at most this global L2 norm; 0 disables.
  double grad_clip = 10.0;
  LossConfig loss;
  ReplayConfig replay;
  /// Store exemplars at all; off leaves the memory empty so every past class
  /// is replayed from its centroid.
  bool latent_exemplars = true;
  /// Distill from the previous-task model.
  bool kd = true;

  void validate() const;
};

struct ClientState {
  int id = 0;
  std::map<int, Dataset> shards;  // task -> local rows
  AutoencoderModel model;
  std::optional<AutoencoderModel> prev_model;
  LatentExemplarStore store;
  CentroidTable centroids;
  std::uint64_t seed = 0;

  const Dataset* shard(int task) const;
};

ClientState make_client(int id, std::uint64_t seed, const AutoencoderModel& initial, LatentExemplarStore store);

/// The local shard (tagged kLocalData) plus replay for every earlier class in
/// the centroid table, decoded with the previous-task decoder.
LabeledBatch build_training_set(const ClientState& state, int task, const ClientConfig& cfg);

/// Per locally present class of `task`: mean encoder mean of its rows under
/// the client's current model, with the row count. Ascending class order.
std::vector<UnalignedCentroid> report_unaligned_centroids(const ClientState& state, int task);

struct LocalTrainReport {
  ParamSet params;
  std::vector<LossBreakdown> trace;  // one entry per minibatch
  std::map<ClassKey, std::size_t> class_counts;
};

/// SGD on the total client loss over `data`, starting from `state.model`.
/// Minibatch order is reshuffled each epoch from a stream keyed by
/// (seed, client, task, round). Does not modify `state`.
LocalTrainReport local_train(const ClientState& state, const LabeledBatch& data, int task, int round,
                             const ClientConfig& cfg);

/// Installs `global_params`, re-encodes memory through the previous decoder
/// and the new encoder, admits the local classes of `task`, and makes the new
/// model the distillation teacher.
void finish_task(ClientState& state, int task, const ParamSet& global_params, const ClientConfig& cfg);

}  // namespace hr

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
#include <functional>
#include <span>
#include <vector>

#include "hr/alignment.hpp"
#include "hr/autoencoder.hpp"
#include "hr/client.hpp"
#include "hr/data.hpp"
#include "hr/metrics.hpp"

namespace hr {

struct RoundConfig {
  int clients = 10;        // R
  int tasks = 5;           // K
  int per_round = 3;       // I
  int epochs = 1;          // E
  int rounds = 5;          // communication rounds per task
  std::size_t batch_size = 32;
  double lr = 0.05;
  double grad_clip = 10.0;  // 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulationConfig {
  RoundConfig round;
  int classes_per_task = 2;
  Architecture arch;
  LossConfig loss;
  ReplayConfig replay;
  AlignmentConfig alignment;
  /// Per-client exemplar memory, in stored floats.
  std::size_t memory_budget_floats = 400;
  bool latent_exemplars = true;
  bool kd = true;
  /// Store raw inputs instead of latent codes (budget still in floats).
  bool perfect_exemplars = false;
  /// Worker cap for the per-round client fan-out; 0 runs serially.
  int threads = 0;

  void validate() const;
  ClientConfig client_config() const;
  std::size_t exemplar_width() const;
  std::size_t store_capacity() const;  // vectors per client
};

struct ServerState {
  AutoencoderModel global;
  CentroidTable centroids;
  int task = 0;  // last completed task
};

struct RoundLog {
  int task = 0;
  int round = 0;
  /// Mean of every minibatch loss of the round, clients in ascending id.
  LossBreakdown loss;
  std::size_t batches = 0;
};

struct TaskLog {
  int task = 0;
  std::vector<int> cohort;
  AlignmentReport alignment;
};

struct ExperimentResult {
  AccuracyMatrix accuracy;
  ForgettingReport forgetting;
  ConfusionDecomposition confusion;
  std::vector<RoundLog> rounds;
  std::vector<TaskLog> tasks;
  std::size_t memory_floats_used = 0;  // largest per-client store, in floats
  ServerState final_state;
};

/// I distinct ids from a stream keyed by (seed, "selection", task), ascending.
std::vector<int> select_clients(const RoundConfig& cfg, int task);

std::vector<ClientState> make_clients(const SimulationConfig& cfg, const TaskStream& stream,
                                      const AutoencoderModel& initial);

ServerState initial_server_state(const SimulationConfig& cfg);

/// One full task: selection, centroid alignment, rounds of local training and
/// FedAvg, then memory maintenance on every client.
ServerState run_task(const ServerState& state, std::vector<ClientState>& clients, int task,
                     const SimulationConfig& cfg, std::vector<RoundLog>* round_log = nullptr,
                     TaskLog* task_log = nullptr);

/// Called after each task with the task index, server state and all clients.
using TaskObserver = std::function<void(int, const ServerState&, std::span<const ClientState>)>;

ExperimentResult run_experiment(const SimulationConfig& cfg, const TaskStream& stream,
                                const TaskObserver& observer = {});

}  // namespace hr

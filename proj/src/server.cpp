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

#include "hr/server.hpp"

#include <algorithm>
#include <string>

#include "hr/error.hpp"
#include "hr/parallel.hpp"
#include "hr/rng.hpp"

namespace hr {

void RoundConfig::validate() const {
  if (clients < 1 || tasks < 1 || per_round < 1 || epochs < 1 || rounds < 1 || batch_size < 1) {
    fail(ErrorKind::kConfig, "clients, tasks, clients_per_round, epochs, rounds and batch_size must all be >= 1");
  }
  if (per_round > clients) {
    fail(ErrorKind::kConfig, "clients_per_round (" + std::to_string(per_round) + ") exceeds clients (" +
                                 std::to_string(clients) + ")");
  }
}

void SimulationConfig::validate() const {
  round.validate();
  if (classes_per_task < 1) fail(ErrorKind::kConfig, "classes_per_task must be >= 1");
  if (arch.input_dim < 1 || arch.latent_dim < 1) fail(ErrorKind::kConfig, "input and latent dimensions must be >= 1");
  alignment.lj.validate();
  if (alignment.method == AlignmentMethod::kRepulsive && !(alignment.rfa_strength > 0.0)) {
    fail(ErrorKind::kConfig, "rfa_strength must be positive");
  }
  client_config().validate();
  if (replay.raw_exemplars != perfect_exemplars) {
    fail(ErrorKind::kConfig, "replay.raw_exemplars must mirror perfect_exemplars");
  }
  if (perfect_exemplars && !latent_exemplars) {
    fail(ErrorKind::kConfig, "perfect_exemplars needs exemplar storage; it cannot be combined with "
                             "latent_exemplars = false");
  }
  if (latent_exemplars && store_capacity() == 0) {
    fail(ErrorKind::kConfig, "memory_budget_floats (" + std::to_string(memory_budget_floats) +
                                 ") is smaller than one exemplar of " + std::to_string(exemplar_width()) + " floats");
  }
}

ClientConfig SimulationConfig::client_config() const {
  ClientConfig c;
  c.epochs = round.epochs;
  c.batch_size = round.batch_size;
  c.lr = round.lr;
  c.grad_clip = round.grad_clip;
  c.loss = loss;
  c.replay = replay;
  c.latent_exemplars = latent_exemplars;
  c.kd = kd;
  return c;
}

std::size_t SimulationConfig::exemplar_width() const {
  return perfect_exemplars ? arch.input_dim : arch.latent_dim;
}

std::size_t SimulationConfig::store_capacity() const {
  return memory_budget_floats / exemplar_width();
}

std::vector<int> select_clients(const RoundConfig& cfg, int task) {
  cfg.validate();
  Rng rng(StreamKey(cfg.seed) << "selection" << task);
  auto picked = rng.sample_without_replacement(static_cast<std::size_t>(cfg.clients),
                                               static_cast<std::size_t>(cfg.per_round));
  std::vector<int> ids(picked.begin(), picked.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

ServerState initial_server_state(const SimulationConfig& cfg) {
  Rng rng(StreamKey(cfg.round.seed) << "init");
  ServerState s;
  s.global = AutoencoderModel::create(cfg.arch, rng);
  s.centroids = CentroidTable(cfg.arch.latent_dim);
  return s;
}

std::vector<ClientState> make_clients(const SimulationConfig& cfg, const TaskStream& stream,
                                      const AutoencoderModel& initial) {
  if (stream.clients != cfg.round.clients) {
    fail(ErrorKind::kConfig, "task stream has " + std::to_string(stream.clients) + " clients, config has " +
                                 std::to_string(cfg.round.clients));
  }
  std::vector<ClientState> clients;
  for (int c = 0; c < cfg.round.clients; ++c) {
    auto state = make_client(c, cfg.round.seed, initial,
                             LatentExemplarStore(cfg.latent_exemplars ? cfg.store_capacity() : 0, cfg.exemplar_width()));
    for (const auto& task : stream.tasks) state.shards[task.index] = task.shards.at(static_cast<std::size_t>(c));
    clients.push_back(std::move(state));
  }
  return clients;
}

ServerState run_task(const ServerState& state, std::vector<ClientState>& clients, int task,
                     const SimulationConfig& cfg, std::vector<RoundLog>* round_log, TaskLog* task_log) {
  if (task != state.task + 1) {
    fail(ErrorKind::kProtocol, "task " + std::to_string(task) + " requested after task " + std::to_string(state.task));
  }
  const ClientConfig ccfg = cfg.client_config();
  const auto cohort = select_clients(cfg.round, task);

  std::vector<UnalignedCentroid> reports;
  for (const auto& c : clients) {
    auto r = report_unaligned_centroids(c, task);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  ServerState next = state;
  AlignmentReport align;
  next.centroids = align_new_task(state.centroids, task, reports, cfg.alignment, &align);
  for (auto& c : clients) c.centroids = next.centroids;

  std::vector<LabeledBatch> train_sets(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    train_sets[i] = build_training_set(clients[static_cast<std::size_t>(cohort[i])], task, ccfg);
  }

  for (int round = 1; round <= cfg.round.rounds; ++round) {
    std::vector<LocalTrainReport> results(cohort.size());
    parallel_for(cohort.size(), cfg.threads, [&](std::size_t i) {
      ClientState local = clients[static_cast<std::size_t>(cohort[i])];
      local.model.params = next.global.params;
      try {
        results[i] = local_train(local, train_sets[i], task, round, ccfg);
      } catch (const Error& e) {
        fail(e.kind(), "task " + std::to_string(task) + " round " + std::to_string(round) + ": " + e.what());
      }
    });
    std::vector<ParamSet> params;
    params.reserve(results.size());
    RoundLog log{task, round, {}, 0};
    for (auto& r : results) {
      for (const auto& l : r.trace) {
        log.loss.recon += l.recon;
        log.loss.kl += l.kl;
        log.loss.cluster += l.cluster;
        log.loss.encoder_kd += l.encoder_kd;
        log.loss.decoder_kd += l.decoder_kd;
        log.loss.total += l.total;
      }
      log.batches += r.trace.size();
      params.push_back(std::move(r.params));
    }
    if (log.batches > 0) {
      const double n = static_cast<double>(log.batches);
      for (double* v : {&log.loss.recon, &log.loss.kl, &log.loss.cluster, &log.loss.encoder_kd, &log.loss.decoder_kd,
                        &log.loss.total}) {
        *v /= n;
      }
    }
    next.global.params = average_params(params);
    if (round_log) round_log->push_back(log);
  }

  parallel_for(clients.size(), cfg.threads, [&](std::size_t i) { finish_task(clients[i], task, next.global.params, ccfg); });
  next.task = task;
  if (task_log) *task_log = {task, cohort, align};
  return next;
}

ExperimentResult run_experiment(const SimulationConfig& cfg, const TaskStream& stream, const TaskObserver& observer) {
  cfg.validate();
  if (static_cast<int>(stream.tasks.size()) != cfg.round.tasks) {
    fail(ErrorKind::kConfig, "task stream has " + std::to_string(stream.tasks.size()) + " tasks, config has " +
                                 std::to_string(cfg.round.tasks));
  }
  if (stream.feature_dim != cfg.arch.input_dim) {
    fail(ErrorKind::kConfig, "dataset has " + std::to_string(stream.feature_dim) + " features but input_dim is " +
                                 std::to_string(cfg.arch.input_dim));
  }
  ExperimentResult result;
  ServerState state = initial_server_state(cfg);
  auto clients = make_clients(cfg, stream, state.global);
  std::vector<Dataset> eval_sets;
  for (const auto& task : stream.tasks) {
    TaskLog tlog;
    state = run_task(state, clients, task.index, cfg, &result.rounds, &tlog);
    result.tasks.push_back(std::move(tlog));
    eval_sets.push_back(task.eval);
    result.accuracy.rows.push_back(evaluate(state.global, state.centroids, eval_sets, task.index));
    if (observer) observer(task.index, state, clients);
  }
  result.forgetting = forgetting(result.accuracy);
  result.confusion = pairwise_confusion(state.global, state.centroids, eval_sets, cfg.classes_per_task);
  for (const auto& c : clients) result.memory_floats_used = std::max(result.memory_floats_used, c.store.float_count());
  result.final_state = std::move(state);
  return result;
}

}  // namespace hr

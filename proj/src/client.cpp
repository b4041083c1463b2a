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

#include "hr/client.hpp"

#include <cmath>
#include <string>

#include "hr/error.hpp"

namespace hr {

namespace {

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.recon) && std::isfinite(l.kl) && std::isfinite(l.cluster) && std::isfinite(l.encoder_kd) &&
         std::isfinite(l.decoder_kd) && std::isfinite(l.total);
}

bool finite(const ParamSet& params) {
  for (const auto& [k, t] : params) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void clip_norm(ParamSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [k, t] : grads) {
    for (double v : t.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& [k, t] : grads) {
    for (double& v : t.values()) v *= scale;
  }
}

}  // namespace

void ClientConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be at least 1");
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch_size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::kConfig, "lr must be a finite non-negative number");
  if (!(grad_clip >= 0.0)) fail(ErrorKind::kConfig, "grad_clip must be >= 0");
  if (!(loss.lambda >= 0.0) || !(loss.kd_weight >= 0.0)) fail(ErrorKind::kConfig, "lambda and kd_weight must be >= 0");
  if (!(replay.noise_sigma >= 0.0)) fail(ErrorKind::kConfig, "noise_sigma must be >= 0");
}

const Dataset* ClientState::shard(int task) const {
  auto it = shards.find(task);
  return it == shards.end() || it->second.empty() ? nullptr : &it->second;
}

ClientState make_client(int id, std::uint64_t seed, const AutoencoderModel& initial, LatentExemplarStore store) {
  ClientState s;
  s.id = id;
  s.seed = seed;
  s.model = initial;
  s.store = std::move(store);
  s.centroids = CentroidTable(initial.latent_dim);
  return s;
}

LabeledBatch build_training_set(const ClientState& state, int task, const ClientConfig& cfg) {
  LabeledBatch out;
  if (const Dataset* local = state.shard(task)) {
    for (int cls : local->distinct_labels()) out.append(local->rows_of(cls), {task, cls}, ReplaySource::kLocalData);
  }
  if (task >= 2) {
    if (!state.prev_model) fail(ErrorKind::kProtocol, "client " + std::to_string(state.id) + " has no previous model");
    Rng rng(StreamKey(state.seed) << "client" << state.id << "task" << task << "replay");
    out.append(synthesize_replay(state.store, state.centroids, *state.prev_model, task, cfg.replay, rng));
  }
  return out;
}

std::vector<UnalignedCentroid> report_unaligned_centroids(const ClientState& state, int task) {
  std::vector<UnalignedCentroid> out;
  const Dataset* local = state.shard(task);
  if (local == nullptr) return out;
  for (int cls : local->distinct_labels()) {
    Tensor means = encode_mean(state.model, local->rows_of(cls));
    UnalignedCentroid c;
    c.cls = cls;
    c.client = state.id;
    c.sample_count = means.rows();
    c.embedding.assign(means.cols(), 0.0);
    for (std::size_t r = 0; r < means.rows(); ++r) {
      for (std::size_t k = 0; k < means.cols(); ++k) c.embedding[k] += means(r, k);
    }
    for (auto& v : c.embedding) v /= static_cast<double>(c.sample_count);
    out.push_back(std::move(c));
  }
  return out;
}

LocalTrainReport local_train(const ClientState& state, const LabeledBatch& data, int task, int round,
                             const ClientConfig& cfg) {
  cfg.validate();
  LocalTrainReport rep;
  rep.params = state.model.params;
  for (const auto& key : data.labels) ++rep.class_counts[key];
  if (data.size() == 0) return rep;

  const AutoencoderModel* teacher = (cfg.kd && task >= 2) ? &*state.prev_model : nullptr;
  if (cfg.kd && task >= 2 && !state.prev_model) {
    fail(ErrorKind::kProtocol, "client " + std::to_string(state.id) + " has no distillation teacher");
  }
  LossConfig loss_cfg = cfg.loss;
  if (!cfg.kd) loss_cfg.kd_weight = 0.0;

  AutoencoderModel model = state.model;
  Rng rng(StreamKey(state.seed) << "client" << state.id << "task" << task << "round" << round << "train");
  const std::size_t n = data.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = rng.permutation(n);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                   order.begin() + static_cast<std::ptrdiff_t>(hi));
      Tensor x = data.x.gather_rows(idx);
      std::vector<ClassKey> labels;
      labels.reserve(idx.size());
      for (auto i : idx) labels.push_back(data.labels[i]);
      Tensor noise = Tensor::matrix(idx.size(), model.latent_dim);
      for (auto& v : noise.values()) v = rng.normal();

      auto g = total_client_loss_gradient(teacher, model, x, labels, state.centroids, loss_cfg, noise);
      if (!finite(g.loss) || !finite(g.grads)) {
        fail(ErrorKind::kDivergence, "client " + std::to_string(state.id) + " diverged at task " +
                                         std::to_string(task) + " round " + std::to_string(round) + " epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b) + " (recon " +
                                         std::to_string(g.loss.recon) + ", kl " + std::to_string(g.loss.kl) +
                                         ", cluster " + std::to_string(g.loss.cluster) +
                                         "); lower the learning rate");
      }
      rep.trace.push_back(g.loss);
      if (cfg.grad_clip > 0.0) clip_norm(g.grads, cfg.grad_clip);
      model.params = sgd_step(model.params, g.grads, cfg.lr);
    }
  }
  if (!finite(model.params)) {
    fail(ErrorKind::kDivergence, "client " + std::to_string(state.id) + " produced non-finite parameters at task " +
                                     std::to_string(task) + " round " + std::to_string(round));
  }
  rep.params = std::move(model.params);
  return rep;
}

void finish_task(ClientState& state, int task, const ParamSet& global_params, const ClientConfig& cfg) {
  AutoencoderModel updated = state.model;
  updated.params = global_params;
  updated.validate();

  LatentExemplarStore store = state.store;
  if (!cfg.replay.raw_exemplars && state.prev_model && !store.empty()) {
    store = reencode_memory(store, *state.prev_model, updated);
  }
  if (cfg.latent_exemplars) {
    if (const Dataset* local = state.shard(task)) {
      Rng rng(StreamKey(state.seed) << "client" << state.id << "task" << task << "admit");
      for (int cls : local->distinct_labels()) {
        const ClassKey key{task, cls};
        store = cfg.replay.raw_exemplars ? admit_raw_class(store, key, local->rows_of(cls), rng)
                                         : admit_new_class(store, updated, key, local->rows_of(cls), rng);
      }
    }
  }
  store.check_invariants();
  state.store = std::move(store);
  state.model = updated;
  state.prev_model = std::move(updated);
}

}  // namespace hr

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

#include "hr/replay_memory.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "hr/error.hpp"
#include "hr/text_io.hpp"

namespace hr {

namespace {

const LatentExemplarStore::Vectors kNoVectors;

Tensor stack(const LatentExemplarStore::Vectors& rows, std::size_t dim) {
  Tensor t = Tensor::matrix(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  return t;
}

LatentExemplarStore::Vectors unstack(const Tensor& t) {
  LatentExemplarStore::Vectors rows;
  rows.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) rows.emplace_back(t.row(r).begin(), t.row(r).end());
  return rows;
}

// Distinct random rows, as many as the class's quota in the enlarged store allows.
Tensor pick_rows(const LatentExemplarStore& store, const ClassKey& key, const Tensor& class_data, Rng& rng) {
  if (class_data.empty() || class_data.rows() == 0) {
    fail(ErrorKind::kData, "no samples available to admit " + to_string(key));
  }
  if (store.contains(key)) fail(ErrorKind::kProtocol, to_string(key) + " is already in memory");
  const std::size_t take = std::min(store.quota(key), class_data.rows());
  auto idx = rng.sample_without_replacement(class_data.rows(), take);
  return class_data.gather_rows(idx);
}

}  // namespace

std::size_t LatentExemplarStore::total() const {
  std::size_t n = 0;
  for (const auto& [k, v] : classes_) n += v.size();
  return n;
}

std::size_t LatentExemplarStore::base_quota() const {
  return classes_.empty() ? 0 : budget_ / classes_.size();
}

std::size_t LatentExemplarStore::quota_at(std::size_t index, std::size_t classes) const {
  if (classes == 0) return 0;
  return budget_ / classes + (index < budget_ % classes ? 1 : 0);
}

std::size_t LatentExemplarStore::quota(const ClassKey& key) const {
  const std::size_t below = static_cast<std::size_t>(
      std::distance(classes_.begin(), classes_.lower_bound(key)));
  const std::size_t classes = classes_.size() + (contains(key) ? 0 : 1);
  return quota_at(below, classes);
}

const LatentExemplarStore::Vectors& LatentExemplarStore::vectors(const ClassKey& key) const {
  auto it = classes_.find(key);
  return it == classes_.end() ? kNoVectors : it->second;
}

void LatentExemplarStore::add_class(const ClassKey& key, Vectors vectors) {
  if (contains(key)) fail(ErrorKind::kProtocol, to_string(key) + " is already in memory");
  for (const auto& v : vectors) {
    if (v.size() != dim_) fail(ErrorKind::kConfig, "exemplar width does not match store width");
  }
  classes_.emplace(key, Vectors{});
  std::size_t index = 0;
  const std::size_t n = classes_.size();
  for (auto& [k, stored] : classes_) {
    const std::size_t q = quota_at(index++, n);
    if (k == key) {
      if (vectors.size() > q) vectors.resize(q);
      stored = std::move(vectors);
    } else if (stored.size() > q) {
      stored.resize(q);
    }
  }
  check_invariants();
}

LatentExemplarStore LatentExemplarStore::restore(std::size_t budget, std::size_t vector_dim, Map classes) {
  LatentExemplarStore store(budget, vector_dim);
  for (const auto& [key, vecs] : classes) {
    for (const auto& v : vecs) {
      if (v.size() != vector_dim) fail(ErrorKind::kData, "exemplar width mismatch for " + to_string(key));
    }
  }
  store.classes_ = std::move(classes);
  try {
    store.check_invariants();
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("stored memory violates its budget: ") + e.what());
  }
  return store;
}

void LatentExemplarStore::replace(const ClassKey& key, Vectors vectors) {
  auto it = classes_.find(key);
  if (it == classes_.end()) fail(ErrorKind::kProtocol, to_string(key) + " is not in memory");
  if (it->second.size() != vectors.size()) fail(ErrorKind::kProtocol, "replacement must keep the exemplar count");
  it->second = std::move(vectors);
}

void LatentExemplarStore::check_invariants() const {
  std::size_t index = 0, total = 0;
  for (const auto& [k, v] : classes_) {
    if (v.size() > quota_at(index++, classes_.size())) {
      fail(ErrorKind::kProtocol, "memory for " + to_string(k) + " exceeds its quota");
    }
    total += v.size();
  }
  if (total > budget_) fail(ErrorKind::kProtocol, "memory exceeds its budget");
}

LatentExemplarStore admit_new_class(const LatentExemplarStore& store, const AutoencoderModel& encoder,
                                    const ClassKey& key, const Tensor& class_data, Rng& rng) {
  if (store.vector_dim() != encoder.latent_dim) fail(ErrorKind::kConfig, "store width differs from latent width");
  Tensor picked = pick_rows(store, key, class_data, rng);
  LatentExemplarStore out = store;
  out.add_class(key, picked.empty() ? LatentExemplarStore::Vectors{} : unstack(encode_mean(encoder, picked)));
  return out;
}

LatentExemplarStore admit_raw_class(const LatentExemplarStore& store, const ClassKey& key, const Tensor& class_data,
                                    Rng& rng) {
  if (store.vector_dim() != class_data.cols()) fail(ErrorKind::kConfig, "store width differs from input width");
  Tensor picked = pick_rows(store, key, class_data, rng);
  LatentExemplarStore out = store;
  out.add_class(key, picked.empty() ? LatentExemplarStore::Vectors{} : unstack(picked));
  return out;
}

LatentExemplarStore reencode_memory(const LatentExemplarStore& store, const AutoencoderModel& old_decoder,
                                    const AutoencoderModel& new_encoder) {
  LatentExemplarStore out = store;
  for (const auto& [key, vecs] : store.classes()) {
    if (vecs.empty()) continue;
    Tensor decoded = decode(old_decoder, stack(vecs, store.vector_dim()));
    out.replace(key, unstack(encode_mean(new_encoder, decoded)));
  }
  return out;
}

const char* to_string(ReplaySource source) {
  switch (source) {
    case ReplaySource::kLocalData: return "local";
    case ReplaySource::kLatentExemplar: return "latent";
    case ReplaySource::kRawExemplar: return "raw";
    case ReplaySource::kCentroidNoise: return "centroid";
  }
  return "?";
}

std::size_t ReplayConfig::effective_samples_per_class(const LatentExemplarStore& store) const {
  return samples_per_class > 0 ? samples_per_class : std::max<std::size_t>(store.base_quota(), 8);
}

void LabeledBatch::append(const Tensor& rows, const ClassKey& key, ReplaySource source) {
  if (rows.empty()) return;
  if (x.empty()) {
    x = rows;
  } else {
    if (rows.cols() != x.cols()) fail(ErrorKind::kConfig, "appended rows differ in width");
    std::vector<double> data(x.values().begin(), x.values().end());
    data.insert(data.end(), rows.values().begin(), rows.values().end());
    x = Tensor({x.rows() + rows.rows(), x.cols()}, std::move(data));
  }
  labels.insert(labels.end(), rows.rows(), key);
  sources.insert(sources.end(), rows.rows(), source);
}

void LabeledBatch::append(const LabeledBatch& other) {
  if (other.x.empty()) return;
  if (x.empty()) {
    *this = other;
    return;
  }
  if (other.x.cols() != x.cols()) fail(ErrorKind::kConfig, "appended rows differ in width");
  std::vector<double> data(x.values().begin(), x.values().end());
  data.insert(data.end(), other.x.values().begin(), other.x.values().end());
  x = Tensor({x.rows() + other.x.rows(), x.cols()}, std::move(data));
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  sources.insert(sources.end(), other.sources.begin(), other.sources.end());
}

LabeledBatch synthesize_replay(const LatentExemplarStore& store, const CentroidTable& centroids,
                               const AutoencoderModel& decoder, int current_task, const ReplayConfig& cfg,
                               Rng& rng) {
  if (cfg.noise_sigma < 0.0) fail(ErrorKind::kConfig, "noise_sigma must be non-negative");
  for (const auto& [key, vecs] : store.classes()) {
    if (key.task < current_task && !centroids.contains(key)) {
      fail(ErrorKind::kProtocol, "memory holds " + to_string(key) + " but the centroid table does not");
    }
  }
  const std::size_t per_class = cfg.effective_samples_per_class(store);
  LabeledBatch out;
  for (const auto& [key, entry] : centroids) {
    if (key.task >= current_task) continue;
    const auto& stored = store.vectors(key);
    if (!stored.empty()) {
      std::vector<std::size_t> idx;
      if (stored.size() >= per_class) {
        idx = rng.sample_without_replacement(stored.size(), per_class);
      } else {
        for (std::size_t i = 0; i < per_class; ++i) idx.push_back(i % stored.size());
      }
      LatentExemplarStore::Vectors chosen;
      for (auto i : idx) chosen.push_back(stored[i]);
      Tensor rows = stack(chosen, store.vector_dim());
      if (cfg.raw_exemplars) {
        out.append(rows, key, ReplaySource::kRawExemplar);
      } else {
        out.append(decode(decoder, rows), key, ReplaySource::kLatentExemplar);
      }
    } else if (cfg.global_replay) {
      Tensor z = Tensor::matrix(per_class, entry.embedding.size());
      for (std::size_t r = 0; r < per_class; ++r) {
        for (std::size_t k = 0; k < entry.embedding.size(); ++k) {
          z(r, k) = entry.embedding[k] + cfg.noise_sigma * rng.normal();
        }
      }
      out.append(decode(decoder, z), key, ReplaySource::kCentroidNoise);
    }
  }
  return out;
}

void write_store(std::ostream& out, const LatentExemplarStore& store) {
  out << "HRMEM1\n" << store.budget() << ' ' << store.vector_dim() << ' ' << store.class_count() << '\n';
  for (const auto& [key, vecs] : store.classes()) {
    out << key.task << ' ' << key.cls << ' ' << vecs.size() << ' ' << store.vector_dim();
    for (const auto& v : vecs) {
      for (double x : v) out << ' ' << format_double(x);
    }
    out << '\n';
  }
}

LatentExemplarStore read_store(std::istream& in) {
  expect_header(in, "HRMEM1");
  auto budget = next_int(in, "budget");
  auto dim = next_int(in, "vector width");
  auto classes = next_int(in, "class count");
  if (budget < 0 || dim < 0 || classes < 0) fail(ErrorKind::kData, "invalid memory header");
  LatentExemplarStore store(static_cast<std::size_t>(budget), static_cast<std::size_t>(dim));
  LatentExemplarStore::Map records;
  for (std::int64_t c = 0; c < classes; ++c) {
    ClassKey key;
    key.task = static_cast<int>(next_int(in, "task"));
    key.cls = static_cast<int>(next_int(in, "class"));
    auto count = next_int(in, "count");
    auto m = next_int(in, "vector width");
    if (count < 0 || m != dim) fail(ErrorKind::kData, "invalid memory record for " + to_string(key));
    LatentExemplarStore::Vectors vecs(static_cast<std::size_t>(count), std::vector<double>(static_cast<std::size_t>(m)));
    for (auto& v : vecs) {
      for (auto& x : v) x = next_double(in, "exemplar value");
    }
    if (!records.emplace(key, std::move(vecs)).second) fail(ErrorKind::kData, "duplicate memory record " + to_string(key));
  }
  return LatentExemplarStore::restore(store.budget(), store.vector_dim(), std::move(records));
}

}  // namespace hr

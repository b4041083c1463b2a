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

#include "hr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hr/centroid_table.hpp"
#include "hr/error.hpp"
#include "hr/rng.hpp"
#include "hr/text_io.hpp"

namespace hr {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.dim = dim;
  out.x = x.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels.at(i));
  return out;
}

std::vector<std::size_t> Dataset::indices_of(int label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) idx.push_back(i);
  }
  return idx;
}

Tensor Dataset::rows_of(int label) const {
  auto idx = indices_of(label);
  return x.gather_rows(idx);
}

std::vector<int> Dataset::distinct_labels() const {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (other.dim != dim) fail(ErrorKind::kData, "cannot append datasets of different width");
  std::vector<double> data(x.values().begin(), x.values().end());
  data.insert(data.end(), other.x.values().begin(), other.x.values().end());
  x = Tensor({size() + other.size(), dim}, std::move(data));
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

void BlobSpec::validate() const {
  if (classes <= 0 || samples_per_class <= 0) fail(ErrorKind::kConfig, "blob classes and samples_per_class must be positive");
  if (dim < 2) fail(ErrorKind::kConfig, "blob dimension must be at least 2");
  if (!(cluster_std >= 0.0) || !(separation > 0.0)) {
    fail(ErrorKind::kConfig, "blob cluster_std must be >= 0 and separation > 0");
  }
}

Dataset generate_blobs(const BlobSpec& spec) {
  spec.validate();
  Rng rng(StreamKey(spec.seed) << "blobs");
  const double min_dist = 4.0 * spec.cluster_std;
  std::vector<std::vector<double>> centers;
  int rejections = 0;
  while (static_cast<int>(centers.size()) < spec.classes) {
    std::vector<double> c(spec.dim);
    for (auto& v : c) v = rng.uniform(-spec.separation, spec.separation);
    bool ok = std::all_of(centers.begin(), centers.end(),
                          [&](const auto& o) { return std::sqrt(squared_distance(c, o)) >= min_dist; });
    if (ok) {
      centers.push_back(std::move(c));
    } else if (++rejections >= 10000) {
      fail(ErrorKind::kConfig, "cannot place " + std::to_string(spec.classes) + " blob centers " +
                                   std::to_string(min_dist) + " apart; increase separation");
    }
  }
  Dataset out;
  out.dim = spec.dim;
  const std::size_t rows = static_cast<std::size_t>(spec.classes) * static_cast<std::size_t>(spec.samples_per_class);
  out.x = Tensor::matrix(rows, spec.dim);
  std::size_t r = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++r) {
      for (std::size_t k = 0; k < spec.dim; ++k) out.x(r, k) = centers[c][k] + spec.cluster_std * rng.normal();
      out.labels.push_back(c);
    }
  }
  return out;
}

std::vector<std::vector<int>> assign_classes_to_tasks(std::span<const int> ordered_labels, int tasks, int per_task) {
  if (tasks <= 0 || per_task <= 0) fail(ErrorKind::kConfig, "tasks and classes per task must be positive");
  const std::size_t needed = static_cast<std::size_t>(tasks) * static_cast<std::size_t>(per_task);
  if (needed > ordered_labels.size()) {
    fail(ErrorKind::kConfig, "need " + std::to_string(needed) + " classes but the dataset has " +
                                 std::to_string(ordered_labels.size()));
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(tasks));
  for (std::size_t i = 0; i < needed; ++i) out[i / static_cast<std::size_t>(per_task)].push_back(ordered_labels[i]);
  return out;
}

std::vector<std::vector<int>> split_into_tasks(const Dataset& data, int tasks, int per_task, std::uint64_t seed) {
  auto labels = data.distinct_labels();
  Rng rng(StreamKey(seed) << "task-split");
  auto perm = rng.permutation(labels.size());
  std::vector<int> ordered;
  ordered.reserve(labels.size());
  for (auto i : perm) ordered.push_back(labels[i]);
  return assign_classes_to_tasks(ordered, tasks, per_task);
}

std::vector<Dataset> dirichlet_partition(const Dataset& data, int clients, double alpha, std::uint64_t seed) {
  if (clients <= 0) fail(ErrorKind::kConfig, "client count must be positive");
  if (!(alpha > 0.0)) fail(ErrorKind::kConfig, "Dirichlet alpha must be positive");
  const auto n_clients = static_cast<std::size_t>(clients);
  std::vector<std::vector<std::size_t>> assigned(n_clients);
  for (int label : data.distinct_labels()) {
    Rng rng(StreamKey(seed) << "dirichlet" << label);
    auto idx = data.indices_of(label);
    auto perm = rng.permutation(idx.size());
    std::vector<double> props(n_clients);
    double total = 0.0;
    for (auto& p : props) total += (p = rng.gamma(alpha));
    if (!(total > 0.0)) {
      std::fill(props.begin(), props.end(), 1.0);
      total = static_cast<double>(n_clients);
    }
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
      cum += props[c];
      std::size_t end = c + 1 == n_clients
                            ? idx.size()
                            : std::min(idx.size(), static_cast<std::size_t>(std::llround(cum / total * static_cast<double>(idx.size()))));
      end = std::max(end, start);
      for (std::size_t i = start; i < end; ++i) assigned[c].push_back(idx[perm[i]]);
      start = end;
    }
  }
  std::vector<Dataset> shards;
  shards.reserve(n_clients);
  for (auto& rows : assigned) {
    std::sort(rows.begin(), rows.end());
    shards.push_back(data.subset(rows));
  }
  return shards;
}

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset '" + path.string() + "'");
  Dataset out;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool seen_row = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty()) continue;
    auto fields = split(text, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!seen_row && out.empty() && !parse_double(fields[0])) {
      seen_row = true;  // header
      continue;
    }
    seen_row = true;
    if (fields.size() < 2) fail(ErrorKind::kData, where + ": expected a label and at least one feature");
    auto label = parse_int(fields[0]);
    if (!label) fail(ErrorKind::kData, where + ": label '" + std::string(trim(fields[0])) + "' is not an integer");
    const std::size_t n = fields.size() - 1;
    if (out.dim == 0) out.dim = n;
    if (n != out.dim) {
      fail(ErrorKind::kData, where + ": expected " + std::to_string(out.dim) + " features, found " + std::to_string(n));
    }
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto v = parse_double(fields[k]);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorKind::kData, where + ": feature " + std::to_string(k - 1) + " ('" + std::string(trim(fields[k])) +
                                   "') is not a finite number");
      }
      values.push_back(*v);
    }
    out.labels.push_back(static_cast<int>(*label));
  }
  if (out.empty()) fail(ErrorKind::kData, "dataset '" + path.string() + "' has no rows");
  out.x = Tensor({out.size(), out.dim}, std::move(values));
  return out;
}

void write_csv_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write dataset '" + path.string() + "'");
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (double v : data.x.row(r)) out << ',' << format_double(v);
    out << '\n';
  }
}

void normalize_features(Dataset& data) {
  if (data.empty()) return;
  const std::size_t rows = data.size(), cols = data.dim;
  for (std::size_t k = 0; k < cols; ++k) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += data.x(r, k);
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) var += (data.x(r, k) - mean) * (data.x(r, k) - mean);
    var /= static_cast<double>(rows);
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < rows; ++r) data.x(r, k) = (data.x(r, k) - mean) * scale;
  }
}

HoldoutSplit holdout_split(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0) || !(fraction < 1.0)) fail(ErrorKind::kConfig, "holdout fraction must be in [0, 1)");
  std::vector<std::size_t> train, eval;
  for (int label : data.distinct_labels()) {
    Rng rng(StreamKey(seed) << "holdout" << label);
    auto idx = data.indices_of(label);
    auto perm = rng.permutation(idx.size());
    const auto n_eval = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_eval ? eval : train).push_back(idx[perm[i]]);
  }
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  return {data.subset(train), data.subset(eval)};
}

std::map<int, int> TaskStream::dominant_client() const {
  std::map<int, int> out;
  for (const auto& task : tasks) {
    for (int cls : task.classes) {
      std::size_t best = 0;
      int best_client = 0;
      for (std::size_t c = 0; c < task.shards.size(); ++c) {
        const auto n = task.shards[c].indices_of(cls).size();
        if (n > best) {
          best = n;
          best_client = static_cast<int>(c);
        }
      }
      out[cls] = best_client;
    }
  }
  return out;
}

std::map<int, int> TaskStream::task_of_class() const {
  std::map<int, int> out;
  for (const auto& task : tasks) {
    for (int cls : task.classes) out[cls] = task.index;
  }
  return out;
}

TaskStream build_task_stream(const Dataset& data, const StreamConfig& cfg) {
  if (cfg.clients <= 0) fail(ErrorKind::kConfig, "client count must be positive");
  auto split = holdout_split(data, cfg.holdout_fraction, (StreamKey(cfg.seed) << "stream-holdout").value());
  auto task_classes = split_into_tasks(data, cfg.tasks, cfg.classes_per_task, (StreamKey(cfg.seed) << "stream-tasks").value());
  TaskStream stream;
  stream.feature_dim = data.dim;
  stream.clients = cfg.clients;
  for (std::size_t t = 0; t < task_classes.size(); ++t) {
    Task task;
    task.index = static_cast<int>(t) + 1;
    task.classes = task_classes[t];
    std::sort(task.classes.begin(), task.classes.end());
    std::vector<std::size_t> train_rows, eval_rows;
    for (int cls : task.classes) {
      for (auto i : split.train.indices_of(cls)) train_rows.push_back(i);
      for (auto i : split.eval.indices_of(cls)) eval_rows.push_back(i);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(eval_rows.begin(), eval_rows.end());
    Dataset task_train = split.train.subset(train_rows);
    task.eval = split.eval.subset(eval_rows);
    task.shards = dirichlet_partition(task_train, cfg.clients, cfg.alpha,
                                      (StreamKey(cfg.seed) << "stream-partition" << task.index).value());
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace hr

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

#include "hr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hr/error.hpp"

namespace hr {

AccuracyRow evaluate(const AutoencoderModel& model, const CentroidTable& centroids,
                     std::span<const Dataset> eval_sets, int after_task) {
  AccuracyRow row;
  row.after_task = after_task;
  std::size_t hits = 0, seen = 0;
  for (const auto& set : eval_sets) {
    if (set.empty()) {
      row.per_task.push_back(std::nullopt);
      continue;
    }
    auto pred = classify_batch(model, centroids, set.x);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i].key.cls == set.labels[i] ? 1 : 0;
    row.per_task.push_back(static_cast<double>(ok) / static_cast<double>(set.size()));
    hits += ok;
    seen += set.size();
  }
  if (seen > 0) row.overall = static_cast<double>(hits) / static_cast<double>(seen);
  return row;
}

ConfusionDecomposition pairwise_confusion(const AutoencoderModel& model, const CentroidTable& centroids,
                                          std::span<const Dataset> eval_sets, int classes_per_task) {
  if (classes_per_task < 1) fail(ErrorKind::kConfig, "classes_per_task must be positive");
  std::map<int, ClassKey> key_of;
  for (const auto& [key, e] : centroids) key_of[key.cls] = key;

  // Encodings of every evaluated class, keyed by centroid key.
  std::map<ClassKey, Tensor> codes;
  for (const auto& set : eval_sets) {
    for (int cls : set.distinct_labels()) {
      auto it = key_of.find(cls);
      if (it == key_of.end()) continue;
      codes[it->second] = encode_mean(model, set.rows_of(cls));
    }
  }

  ConfusionDecomposition out;
  const double scale = 1.0 / (static_cast<double>(classes_per_task) * classes_per_task);
  for (const auto& [a, z] : codes) {
    const auto& pa = centroids.at(a);
    for (const auto& [b, pb] : centroids) {
      if (b == a || !codes.count(b)) continue;
      std::size_t closer = 0;
      for (std::size_t r = 0; r < z.rows(); ++r) {
        if (squared_distance(z.row(r), pb.embedding) < squared_distance(z.row(r), pa.embedding)) ++closer;
      }
      const double u = static_cast<double>(closer) / static_cast<double>(z.rows());
      out.terms.push_back({a, b, u});
      if (a.task == b.task) {
        out.within_task += scale * u;
      } else if (pa.origin_client == pb.origin_client) {
        out.intra_client += scale * u;
      } else {
        out.inter_client += scale * u;
      }
      out.total += scale * u;
    }
  }
  return out;
}

ForgettingReport forgetting(const AccuracyMatrix& matrix) {
  ForgettingReport rep;
  for (const auto& row : matrix.rows) {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : row.per_task) {
      if (c) {
        sum += *c;
        ++n;
      }
    }
    rep.trend.push_back(n > 0 ? sum / n : 0.0);
  }
  if (matrix.rows.size() < 2) return rep;
  const auto& last = matrix.rows.back();
  const std::size_t tasks = last.per_task.size();
  for (std::size_t t = 0; t + 1 < tasks; ++t) {
    if (!last.per_task[t]) continue;
    double best = *last.per_task[t];
    for (const auto& row : matrix.rows) {
      if (t < row.per_task.size() && row.per_task[t]) best = std::max(best, *row.per_task[t]);
    }
    const double f = best - *last.per_task[t];
    rep.per_task.push_back(f);
    if (f < -kForgettingTolerance) rep.negative_flag = true;
  }
  if (!rep.per_task.empty()) {
    double s = 0.0;
    for (double f : rep.per_task) s += f;
    rep.mean = s / static_cast<double>(rep.per_task.size());
  }
  return rep;
}

MeanSem mean_sem(std::span<const double> values) {
  MeanSem out;
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    out.sem = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return out;
}

SeedAggregate aggregate_seeds(std::span<const AccuracyMatrix> runs) {
  if (runs.empty()) fail(ErrorKind::kUsage, "no runs to aggregate");
  const auto& ref = runs.front();
  for (const auto& run : runs) {
    if (run.rows.size() != ref.rows.size()) fail(ErrorKind::kUsage, "accuracy matrices differ in row count");
    for (std::size_t r = 0; r < run.rows.size(); ++r) {
      if (run.rows[r].per_task.size() != ref.rows[r].per_task.size()) {
        fail(ErrorKind::kUsage, "accuracy matrices differ in shape at row " + std::to_string(r));
      }
    }
  }
  SeedAggregate agg;
  std::vector<double> cell;
  for (std::size_t r = 0; r < ref.rows.size(); ++r) {
    agg.mean.emplace_back();
    agg.sem.emplace_back();
    for (std::size_t t = 0; t < ref.rows[r].per_task.size(); ++t) {
      cell.clear();
      for (const auto& run : runs) {
        if (run.rows[r].per_task[t]) cell.push_back(*run.rows[r].per_task[t]);
      }
      auto ms = mean_sem(cell);
      agg.mean.back().push_back(ms.mean);
      agg.sem.back().push_back(ms.sem);
    }
    cell.clear();
    for (const auto& run : runs) {
      if (run.rows[r].overall) cell.push_back(*run.rows[r].overall);
    }
    auto ms = mean_sem(cell);
    agg.overall_mean.push_back(ms.mean);
    agg.overall_sem.push_back(ms.sem);
  }
  return agg;
}

}  // namespace hr

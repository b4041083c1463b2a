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
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hr/autoencoder.hpp"
#include "hr/centroid_table.hpp"
#include "hr/data.hpp"

namespace hr {

struct AccuracyRow {
  int after_task = 0;
  /// Accuracy on each seen task's held-out rows; absent when that set is empty.
  std::vector<std::optional<double>> per_task;
  /// Pooled over every seen class; absent when no eval rows exist.
  std::optional<double> overall;
};

struct AccuracyMatrix {
  std::vector<AccuracyRow> rows;
};

/// Nearest-centroid accuracy on `eval_sets[0..n)`, one per seen task.
AccuracyRow evaluate(const AutoencoderModel& model, const CentroidTable& centroids,
                     std::span<const Dataset> eval_sets, int after_task);

struct ConfusionTerm {
  ClassKey a;
  ClassKey b;
  double u = 0.0;  // fraction of class-a rows closer to b's centroid than to a's
};

struct ConfusionDecomposition {
  std::vector<ConfusionTerm> terms;  // ordered pairs a != b in key order
  double within_task = 0.0;
  double intra_client = 0.0;  // cross-task pairs whose centroids share an origin client
  double inter_client = 0.0;  // cross-task pairs from different origin clients
  double total = 0.0;
};

/// Pairwise confusion over every seen class, grouped by task and by the
/// client each centroid originated from; every group sum is scaled by
/// 1 / classes_per_task^2.
ConfusionDecomposition pairwise_confusion(const AutoencoderModel& model, const CentroidTable& centroids,
                                          std::span<const Dataset> eval_sets, int classes_per_task);

struct ForgettingReport {
  /// max over evaluation points of task t's accuracy minus its final accuracy,
  /// for every task but the last.
  std::vector<double> per_task;
  double mean = 0.0;
  /// Some entry is below -kForgettingTolerance.
  bool negative_flag = false;
  /// Mean accuracy over seen tasks at each evaluation point.
  std::vector<double> trend;
};

inline constexpr double kForgettingTolerance = 0.02;

ForgettingReport forgetting(const AccuracyMatrix& matrix);

struct SeedAggregate {
  std::vector<std::vector<double>> mean;                // [row][task]
  std::vector<std::vector<std::optional<double>>> sem;  // absent for a single run
  std::vector<double> overall_mean;
  std::vector<std::optional<double>> overall_sem;
};

/// Cell-wise mean and sample-std / sqrt(runs). kUsage on shape mismatch.
SeedAggregate aggregate_seeds(std::span<const AccuracyMatrix> runs);

/// Mean and standard error of a sample; SEM is absent for fewer than two values.
struct MeanSem {
  double mean = 0.0;
  std::optional<double> sem;
};
MeanSem mean_sem(std::span<const double> values);

}  // namespace hr

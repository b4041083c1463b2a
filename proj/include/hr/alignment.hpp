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

#include <span>
#include <string>
#include <vector>

#include "hr/centroid_table.hpp"

namespace hr {

/// Where the per-centroid displacement of a Lennard-Jones step comes from.
enum class GradientSource {
  /// Exact negative gradient of the ordered-pair potential (each unordered
  /// pair counted twice), i.e. -eta * dU/dp.
  kAnalytic,
  /// The closed-form update taken literally:
  ///   p <- p - eta * sum 24 eps [2 sigma^12 / r^13 - sigma^6 / r^7] (p - p').
  /// Its sign makes it an ascent direction of the potential; kept selectable
  /// so the discrepancy stays observable.
  kLiteral,
};

struct LJParams {
  double epsilon = 1.0;
  double sigma = 2.0;
  double eta = 1e-3;
  int max_iters = 500;
  double min_step = 1e-6;
  GradientSource gradient_source = GradientSource::kAnalytic;
  /// Per-step displacement cap in units of sigma; 0 disables the cap.
  double max_step_sigma = 0.1;

  void validate() const;
};

enum class AlignmentMethod { kLennardJones, kRepulsive };

struct AlignmentConfig {
  AlignmentMethod method = AlignmentMethod::kLennardJones;
  LJParams lj;  // eta, iteration budget, cap and tolerance are shared with the repulsive variant
  double rfa_strength = 8.0;
};

/// 4 eps [(sigma / r)^12 - (sigma / r)^6].
double lj_pair_energy(double r, double epsilon, double sigma);

/// Sum over ordered pairs of distinct entries. Fails with kDegenerate when two
/// embeddings coincide exactly. Tables with fewer than two entries have zero energy.
double lj_potential(const CentroidTable& table, const LJParams& params);

/// Analytic gradient of lj_potential with respect to every embedding, in table order.
std::vector<std::vector<double>> lj_gradient(const CentroidTable& table, const LJParams& params);

/// One simultaneous update of all movable entries; frozen entries are copied
/// bit for bit. Fails with kDivergence when a coordinate becomes non-finite.
CentroidTable lj_step(const CentroidTable& table, const LJParams& params);

/// strength * sum 1/r over ordered pairs: the energy the repulsive step descends.
double rfa_energy(const CentroidTable& table, double strength);

/// p <- p + eta * strength * sum (p - p') / r^3 for movable entries.
CentroidTable rfa_step(const CentroidTable& table, double strength, double eta, double max_step = 0.0);

struct UnalignedCentroid {
  int cls = 0;
  std::vector<double> embedding;
  int client = 0;
  std::size_t sample_count = 0;
};

struct AlignmentReport {
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;
  bool converged = false;
  bool non_decrease_warning = false;
  std::string note;
};

/// Merges per-client estimates of each new class (sample-count weighted),
/// inserts them as movable entries of `task`, descends the configured energy
/// with step halving, then freezes everything.
CentroidTable align_new_task(const CentroidTable& table, int task, std::span<const UnalignedCentroid> reports,
                             const AlignmentConfig& config, AlignmentReport* report = nullptr);

}  // namespace hr

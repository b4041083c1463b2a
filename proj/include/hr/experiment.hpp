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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hr/data.hpp"
#include "hr/metrics.hpp"
#include "hr/server.hpp"

namespace hr {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  std::string variant = "HR";
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "out";

  /// "blobs" or a CSV path (relative paths resolve against the config file).
  std::string dataset = "blobs";
  BlobSpec blobs;
  /// Blob centers are redrawn per run seed unless this is set.
  std::optional<std::uint64_t> blob_seed;
  bool normalize = true;
  double alpha = 1.0;
  double holdout_fraction = 0.2;

  SimulationConfig sim;

  void validate() const;
};

/// Parses the flat JSON schema. Unknown keys, wrong types and inconsistent
/// values fail with kConfig naming the field; a schema_version other than
/// kConfigSchemaVersion fails with kVersion.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const ExperimentConfig& cfg);

/// The base configuration plus the six ablations, in a fixed order.
std::vector<ExperimentConfig> ablation_variants(const ExperimentConfig& base);

Dataset load_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  ExperimentResult result;
};

struct VariantRun {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  double wall_seconds = 0.0;
};

struct RunOptions {
  int threads = 0;
  /// Write per-task checkpoints under <dir>/ckpt_<seed>/task_<h>/.
  std::optional<std::filesystem::path> checkpoint_dir;
};

VariantRun run_variant(const ExperimentConfig& cfg, const RunOptions& options);

/// Final overall accuracy over seeds.
MeanSem final_accuracy(const VariantRun& run);
MeanSem mean_forgetting(const VariantRun& run);
/// Seed mean of a confusion aggregate.
double mean_inter_client(const VariantRun& run);
double mean_intra_client(const VariantRun& run);

/// Writes config.json, run_<seed>.csv, summary.csv, forgetting.svg and
/// timing.txt into `dir`.
void write_run_artifacts(const std::filesystem::path& dir, const VariantRun& run);
void write_summary_csv(const std::filesystem::path& path, std::span<const VariantRun> runs);
void write_ablation_csv(const std::filesystem::path& path, std::span<const VariantRun> runs);
void write_forgetting_svg(const std::filesystem::path& path, std::span<const VariantRun> runs);

/// Long-format per-seed log: kind,task,round,target,value.
std::string run_csv(const SeedRun& run);

struct EvalResult {
  std::uint64_t seed = 0;
  AccuracyMatrix accuracy;
};

/// Reloads every ckpt_<seed>/task_<h> checkpoint under `dir` (written by
/// `run`) and re-evaluates on the rebuilt held-out sets.
std::vector<EvalResult> evaluate_checkpoints(const std::filesystem::path& dir);
/// "seed,after_task,target,value" rows.
std::string eval_csv(std::span<const EvalResult> results);

/// Slug used for per-variant directories ("HR w/o KD" -> "hr_wo_kd").
std::string variant_slug(std::string_view variant);

}  // namespace hr

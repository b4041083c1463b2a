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
#include <span>
#include <vector>

#include "hr/centroid_table.hpp"
#include "hr/network.hpp"
#include "hr/rng.hpp"
#include "hr/tensor.hpp"

namespace hr {

struct Architecture {
  std::size_t input_dim = 16;
  std::size_t latent_dim = 2;
  std::vector<std::size_t> encoder_hidden{32};
  std::vector<std::size_t> decoder_hidden{32};
  LayerKind activation = LayerKind::kTanh;
};

/// Encoder f: R^n -> R^{2m} (mean and log-variance halves) and decoder
/// g: R^m -> R^n sharing one ParamSet ("enc/..." and "dec/..." keys).
struct AutoencoderModel {
  Network encoder;
  Network decoder;
  ParamSet params;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;

  static AutoencoderModel create(const Architecture& arch, Rng& rng);
  /// Wraps explicit networks; validates the dimension contract.
  static AutoencoderModel assemble(Network encoder, Network decoder, ParamSet params);

  void validate() const;
  bool same_architecture(const AutoencoderModel& other) const;
};

/// Batched posterior: rows are samples; sample = mean + exp(logvar / 2) * noise.
struct LatentCodes {
  Tensor mean;
  Tensor logvar;
  Tensor noise;
  Tensor sample;
};

LatentCodes encode(const AutoencoderModel& model, const Tensor& x, Rng& rng);
LatentCodes encode_with_noise(const AutoencoderModel& model, const Tensor& x, const Tensor& noise);
Tensor encode_mean(const AutoencoderModel& model, const Tensor& x);
Tensor decode(const AutoencoderModel& model, const Tensor& z);

struct VaeTerms {
  double recon = 0.0;  // batch mean of 0.5 * ||x_hat - x||^2
  double kl = 0.0;     // batch mean of KL(q(z|x) || N(0, I))
};

VaeTerms vae_loss(const Tensor& x, const LatentCodes& codes, const Tensor& x_hat);

/// Batch mean of ||z_b - p_{label_b}||^2.
double clustering_loss(const Tensor& z, std::span<const ClassKey> labels, const CentroidTable& centroids);

struct KdTerms {
  double encoder_kd = 0.0;  // batch mean of ||mean_old - mean_new||
  double decoder_kd = 0.0;  // batch mean of ||g_old(mean_old) - g_new(mean_new)||
};

KdTerms kd_loss(const AutoencoderModel& teacher, const AutoencoderModel& student, const Tensor& x);

struct LossConfig {
  double lambda = 1.0;
  double kd_weight = 1.0;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double cluster = 0.0;
  double encoder_kd = 0.0;
  double decoder_kd = 0.0;
  double total = 0.0;
};

struct LossGradient {
  LossBreakdown loss;
  ParamSet grads;
};

/// recon + kl + lambda * cluster + kd_weight * (encoder_kd + decoder_kd).
/// `teacher` is the previous-task model, or nullptr on the first task (the
/// distillation terms are then zero). `noise` fixes the reparameterization draw.
LossBreakdown total_client_loss(const AutoencoderModel* teacher, const AutoencoderModel& model,
                                const Tensor& x, std::span<const ClassKey> labels,
                                const CentroidTable& centroids, const LossConfig& cfg,
                                const Tensor& noise);

LossGradient total_client_loss_gradient(const AutoencoderModel* teacher, const AutoencoderModel& model,
                                        const Tensor& x, std::span<const ClassKey> labels,
                                        const CentroidTable& centroids, const LossConfig& cfg,
                                        const Tensor& noise);

/// Nearest-centroid prediction on the encoder mean.
NearestCentroid classify(const AutoencoderModel& model, const CentroidTable& centroids,
                         std::span<const double> x);
std::vector<NearestCentroid> classify_batch(const AutoencoderModel& model, const CentroidTable& centroids,
                                            const Tensor& x);

}  // namespace hr

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

#include "hr/autoencoder.hpp"

#include <cmath>

#include "hr/error.hpp"

namespace hr {

namespace {

void require_finite_input(const Tensor& x, const char* what) {
  if (!x.all_finite()) fail(ErrorKind::kData, std::string(what) + " contains non-finite values");
}

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 1) return Tensor({1, t.size()}, std::vector<double>(t.values().begin(), t.values().end()));
  return t;
}

void check_labels(const Tensor& x, std::span<const ClassKey> labels) {
  if (labels.size() != x.rows()) {
    fail(ErrorKind::kConfig, "label count " + std::to_string(labels.size()) + " does not match batch size " +
                                 std::to_string(x.rows()));
  }
}

double row_norm(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

// Everything the loss and its gradient share.
struct ForwardState {
  Tensor x;
  LatentCodes codes;
  Tensor x_hat;
  Tensor teacher_mean;
  Tensor teacher_recon;
  Tensor student_recon;  // g_new(mean_new)
  LossBreakdown loss;
};

ForwardState run_forward(const AutoencoderModel* teacher, const AutoencoderModel& model, const Tensor& input,
                         std::span<const ClassKey> labels, const CentroidTable& centroids,
                         const LossConfig& cfg, const Tensor& noise) {
  if (cfg.lambda < 0.0 || cfg.kd_weight < 0.0) fail(ErrorKind::kConfig, "loss weights must be non-negative");
  ForwardState s;
  s.x = as_matrix(input);
  check_labels(s.x, labels);
  s.codes = encode_with_noise(model, s.x, noise);
  s.x_hat = decode(model, s.codes.sample);
  auto vae = vae_loss(s.x, s.codes, s.x_hat);
  s.loss.recon = vae.recon;
  s.loss.kl = vae.kl;
  s.loss.cluster = clustering_loss(s.codes.sample, labels, centroids);
  if (teacher != nullptr) {
    if (!teacher->same_architecture(model)) fail(ErrorKind::kConfig, "teacher and student architectures differ");
    const std::size_t batch = s.x.rows();
    s.teacher_mean = encode_mean(*teacher, s.x);
    s.teacher_recon = decode(*teacher, s.teacher_mean);
    s.student_recon = decode(model, s.codes.mean);
    double enc = 0.0, dec = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      enc += row_norm(s.codes.mean.row(b), s.teacher_mean.row(b));
      dec += row_norm(s.student_recon.row(b), s.teacher_recon.row(b));
    }
    s.loss.encoder_kd = enc / static_cast<double>(batch);
    s.loss.decoder_kd = dec / static_cast<double>(batch);
  }
  s.loss.total = s.loss.recon + s.loss.kl + cfg.lambda * s.loss.cluster +
                 cfg.kd_weight * (s.loss.encoder_kd + s.loss.decoder_kd);
  return s;
}

}  // namespace

AutoencoderModel AutoencoderModel::create(const Architecture& arch, Rng& rng) {
  if (arch.input_dim == 0 || arch.latent_dim == 0) fail(ErrorKind::kConfig, "autoencoder dimensions must be positive");
  auto enc = Network::mlp("enc", arch.input_dim, arch.encoder_hidden, 2 * arch.latent_dim, arch.activation);
  auto dec = Network::mlp("dec", arch.latent_dim, arch.decoder_hidden, arch.input_dim, arch.activation);
  ParamSet params = init_params(enc, rng);
  for (auto& [k, v] : init_params(dec, rng)) params.emplace(k, std::move(v));
  return assemble(std::move(enc), std::move(dec), std::move(params));
}

AutoencoderModel AutoencoderModel::assemble(Network encoder, Network decoder, ParamSet params) {
  AutoencoderModel m;
  m.encoder = std::move(encoder);
  m.decoder = std::move(decoder);
  m.params = std::move(params);
  m.input_dim = m.encoder.in_dim();
  m.latent_dim = m.decoder.in_dim();
  m.validate();
  return m;
}

void AutoencoderModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.name == decoder.name) fail(ErrorKind::kConfig, "encoder and decoder need distinct names");
  if (encoder.in_dim() != input_dim || decoder.out_dim() != input_dim) {
    fail(ErrorKind::kConfig, "encoder input and decoder output must both have width " + std::to_string(input_dim));
  }
  if (encoder.out_dim() != 2 * latent_dim || decoder.in_dim() != latent_dim) {
    fail(ErrorKind::kConfig, "encoder must emit 2m values and decoder accept m values (m = " +
                                 std::to_string(latent_dim) + ")");
  }
  std::size_t expected = subset_params(encoder, params).size() + subset_params(decoder, params).size();
  if (expected != params.size()) fail(ErrorKind::kConfig, "autoencoder parameter set has stray entries");
}

bool AutoencoderModel::same_architecture(const AutoencoderModel& other) const {
  auto same_net = [](const Network& a, const Network& b) {
    if (a.name != b.name || a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (a.layers[i].kind != b.layers[i].kind || a.layers[i].in_dim != b.layers[i].in_dim ||
          a.layers[i].out_dim != b.layers[i].out_dim) {
        return false;
      }
    }
    return true;
  };
  return same_net(encoder, other.encoder) && same_net(decoder, other.decoder);
}

LatentCodes encode_with_noise(const AutoencoderModel& model, const Tensor& x_in, const Tensor& noise_in) {
  const Tensor x = as_matrix(x_in);
  require_finite_input(x, "encoder input");
  const Tensor noise = as_matrix(noise_in);
  const std::size_t m = model.latent_dim;
  Tensor h = forward(model.encoder, model.params, x);
  if (noise.rows() != x.rows() || noise.cols() != m) {
    fail(ErrorKind::kConfig, "noise shape " + shape_string(noise_in.shape()) + " must be [" +
                                 std::to_string(x.rows()) + "," + std::to_string(m) + "]");
  }
  LatentCodes codes;
  codes.mean = h.slice_cols(0, m);
  codes.logvar = h.slice_cols(m, m);
  codes.noise = noise;
  codes.sample = codes.mean;
  for (std::size_t i = 0; i < codes.sample.size(); ++i) {
    codes.sample[i] += std::exp(0.5 * codes.logvar[i]) * noise[i];
  }
  return codes;
}

LatentCodes encode(const AutoencoderModel& model, const Tensor& x, Rng& rng) {
  Tensor noise = Tensor::matrix(as_matrix(x).rows(), model.latent_dim);
  for (auto& v : noise.values()) v = rng.normal();
  return encode_with_noise(model, x, noise);
}

Tensor encode_mean(const AutoencoderModel& model, const Tensor& x) {
  require_finite_input(x, "encoder input");
  return forward(model.encoder, model.params, x).slice_cols(0, model.latent_dim);
}

Tensor decode(const AutoencoderModel& model, const Tensor& z) {
  if (as_matrix(z).cols() != model.latent_dim) {
    fail(ErrorKind::kConfig, "decoder expects latent width " + std::to_string(model.latent_dim) + ", got " +
                                 std::to_string(as_matrix(z).cols()));
  }
  return forward(model.decoder, model.params, z);
}

VaeTerms vae_loss(const Tensor& x_in, const LatentCodes& codes, const Tensor& x_hat_in) {
  const Tensor x = as_matrix(x_in);
  const Tensor x_hat = as_matrix(x_hat_in);
  if (!x.same_shape(x_hat)) fail(ErrorKind::kConfig, "reconstruction shape does not match input");
  if (!codes.mean.same_shape(codes.logvar) || codes.mean.rows() != x.rows()) {
    fail(ErrorKind::kConfig, "latent code shapes are inconsistent with the batch");
  }
  const double batch = static_cast<double>(x.rows());
  VaeTerms t;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_hat[i] - x[i];
    t.recon += 0.5 * d * d;
  }
  for (std::size_t i = 0; i < codes.mean.size(); ++i) {
    const double mu = codes.mean[i], lv = codes.logvar[i];
    t.kl += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
  }
  t.recon /= batch;
  t.kl /= batch;
  return t;
}

double clustering_loss(const Tensor& z_in, std::span<const ClassKey> labels, const CentroidTable& centroids) {
  const Tensor z = as_matrix(z_in);
  check_labels(z, labels);
  double total = 0.0;
  for (std::size_t b = 0; b < z.rows(); ++b) {
    const auto* entry = centroids.find(labels[b]);
    if (entry == nullptr) {
      fail(ErrorKind::kProtocol, "no aligned centroid for " + to_string(labels[b]) +
                                     "; alignment must precede training");
    }
    if (entry->embedding.size() != z.cols()) fail(ErrorKind::kConfig, "centroid dimension does not match latent width");
    total += squared_distance(z.row(b), entry->embedding);
  }
  return total / static_cast<double>(z.rows());
}

KdTerms kd_loss(const AutoencoderModel& teacher, const AutoencoderModel& student, const Tensor& x_in) {
  if (!teacher.same_architecture(student)) fail(ErrorKind::kConfig, "teacher and student architectures differ");
  const Tensor x = as_matrix(x_in);
  const Tensor old_mean = encode_mean(teacher, x);
  const Tensor new_mean = encode_mean(student, x);
  const Tensor old_recon = decode(teacher, old_mean);
  const Tensor new_recon = decode(student, new_mean);
  KdTerms t;
  for (std::size_t b = 0; b < x.rows(); ++b) {
    t.encoder_kd += row_norm(old_mean.row(b), new_mean.row(b));
    t.decoder_kd += row_norm(old_recon.row(b), new_recon.row(b));
  }
  t.encoder_kd /= static_cast<double>(x.rows());
  t.decoder_kd /= static_cast<double>(x.rows());
  return t;
}

LossBreakdown total_client_loss(const AutoencoderModel* teacher, const AutoencoderModel& model, const Tensor& x,
                                std::span<const ClassKey> labels, const CentroidTable& centroids,
                                const LossConfig& cfg, const Tensor& noise) {
  return run_forward(teacher, model, x, labels, centroids, cfg, noise).loss;
}

LossGradient total_client_loss_gradient(const AutoencoderModel* teacher, const AutoencoderModel& model,
                                        const Tensor& x_in, std::span<const ClassKey> labels,
                                        const CentroidTable& centroids, const LossConfig& cfg,
                                        const Tensor& noise) {
  ForwardState s = run_forward(teacher, model, x_in, labels, centroids, cfg, noise);
  const std::size_t batch = s.x.rows();
  const std::size_t m = model.latent_dim;
  const double inv_b = 1.0 / static_cast<double>(batch);

  // Reconstruction term, back through the decoder at the sampled latent.
  Tensor g_xhat = s.x_hat;
  for (std::size_t i = 0; i < g_xhat.size(); ++i) g_xhat[i] = (s.x_hat[i] - s.x[i]) * inv_b;
  auto dec_back = backward(model.decoder, model.params, s.codes.sample, g_xhat);
  Tensor g_z = std::move(dec_back.input_grad);

  if (cfg.lambda != 0.0) {
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& p = centroids.at(labels[b]).embedding;
      for (std::size_t k = 0; k < m; ++k) g_z(b, k) += 2.0 * cfg.lambda * inv_b * (s.codes.sample(b, k) - p[k]);
    }
  }

  Tensor g_h = Tensor::matrix(batch, 2 * m);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < m; ++k) {
      const double mu = s.codes.mean(b, k), lv = s.codes.logvar(b, k);
      const double stdev = std::exp(0.5 * lv);
      g_h(b, k) = g_z(b, k) + inv_b * mu;
      g_h(b, m + k) = g_z(b, k) * s.codes.noise(b, k) * 0.5 * stdev + inv_b * 0.5 * (std::exp(lv) - 1.0);
    }
  }

  ParamSet grads = zeros_like(model.params);
  accumulate(grads, dec_back.grads);

  if (teacher != nullptr && cfg.kd_weight != 0.0) {
    const double w = cfg.kd_weight * inv_b;
    // ||mean_new - mean_old||: unit direction, zero subgradient at coincidence.
    for (std::size_t b = 0; b < batch; ++b) {
      const double n = row_norm(s.codes.mean.row(b), s.teacher_mean.row(b));
      if (n == 0.0) continue;
      for (std::size_t k = 0; k < m; ++k) g_h(b, k) += w * (s.codes.mean(b, k) - s.teacher_mean(b, k)) / n;
    }
    Tensor g_recon = Tensor::matrix(batch, model.input_dim);
    for (std::size_t b = 0; b < batch; ++b) {
      const double n = row_norm(s.student_recon.row(b), s.teacher_recon.row(b));
      if (n == 0.0) continue;
      for (std::size_t i = 0; i < model.input_dim; ++i) {
        g_recon(b, i) = w * (s.student_recon(b, i) - s.teacher_recon(b, i)) / n;
      }
    }
    auto kd_back = backward(model.decoder, model.params, s.codes.mean, g_recon);
    accumulate(grads, kd_back.grads);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < m; ++k) g_h(b, k) += kd_back.input_grad(b, k);
    }
  }

  auto enc_back = backward(model.encoder, model.params, s.x, g_h);
  accumulate(grads, enc_back.grads);
  return {s.loss, std::move(grads)};
}

NearestCentroid classify(const AutoencoderModel& model, const CentroidTable& centroids, std::span<const double> x) {
  Tensor row({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  Tensor mean = encode_mean(model, row);
  return nearest_centroid(centroids, mean.row(0));
}

std::vector<NearestCentroid> classify_batch(const AutoencoderModel& model, const CentroidTable& centroids,
                                            const Tensor& x) {
  std::vector<NearestCentroid> out;
  if (x.empty()) return out;
  if (centroids.empty()) fail(ErrorKind::kProtocol, "classification needs a non-empty centroid table");
  Tensor means = encode_mean(model, x);
  out.reserve(means.rows());
  for (std::size_t r = 0; r < means.rows(); ++r) out.push_back(nearest_centroid(centroids, means.row(r)));
  return out;
}

}  // namespace hr

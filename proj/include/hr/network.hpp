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
#include <string>
#include <vector>

#include "hr/rng.hpp"
#include "hr/tensor.hpp"

namespace hr {

enum class LayerKind { kAffine, kRelu, kTanh };

struct LayerSpec {
  LayerKind kind = LayerKind::kAffine;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
};

/// A feed-forward stack. `name` prefixes parameter keys so an encoder and a
/// decoder can share one ParamSet: "<name>/<layer:02>/w" and ".../b".
struct Network {
  std::string name;
  std::vector<LayerSpec> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  void validate() const;

  std::string weight_key(std::size_t layer) const;
  std::string bias_key(std::size_t layer) const;

  /// Affine layers with the given activation between them (none after the last).
  static Network mlp(std::string name, std::size_t in_dim, const std::vector<std::size_t>& hidden,
                     std::size_t out_dim, LayerKind activation);
};

/// Glorot-uniform weights, zero biases.
ParamSet init_params(const Network& net, Rng& rng);

/// Batched forward pass; input is [B, in_dim] (a rank-1 tensor counts as B = 1).
Tensor forward(const Network& net, const ParamSet& params, const Tensor& input);

struct BackwardResult {
  ParamSet grads;    // keys of `net` only
  Tensor input_grad; // same shape as input
};

/// Reverse-mode pass for loss gradient `upstream_grad` w.r.t. the output.
BackwardResult backward(const Network& net, const ParamSet& params, const Tensor& input,
                        const Tensor& upstream_grad);

/// p - lr * g for every entry; key sets must match.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr);

/// Element-wise mean, summed in the order given (callers pass ascending client id).
ParamSet average_params(std::span<const ParamSet> sets);

/// Extracts the entries belonging to `net`.
ParamSet subset_params(const Network& net, const ParamSet& params);

}  // namespace hr

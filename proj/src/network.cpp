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

#include "hr/network.hpp"

#include <cmath>
#include <cstdio>

#include "hr/error.hpp"

namespace hr {

namespace {

const Tensor& param(const ParamSet& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) fail(ErrorKind::kConfig, "missing parameter '" + key + "'");
  return it->second;
}

Tensor as_batch(const Tensor& t) {
  if (t.rank() == 2) return t;
  if (t.rank() == 1) return Tensor({1, t.size()}, std::vector<double>(t.values().begin(), t.values().end()));
  fail(ErrorKind::kConfig, "network input must be rank 1 or 2, got " + shape_string(t.shape()));
}

// y = x W + b with W stored [in, out].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t batch = x.rows(), in = w.shape()[0], out = w.shape()[1];
  Tensor y = Tensor::matrix(batch, out);
  for (std::size_t r = 0; r < batch; ++r) {
    auto yr = y.row(r);
    for (std::size_t j = 0; j < out; ++j) yr[j] = b[j];
    auto xr = x.row(r);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wi = w.values().data() + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wi[j];
    }
  }
  return y;
}

Tensor apply_layer(const Network& net, std::size_t l, const ParamSet& params, const Tensor& x) {
  const auto& spec = net.layers[l];
  switch (spec.kind) {
    case LayerKind::kAffine:
      return affine(x, param(params, net.weight_key(l)), param(params, net.bias_key(l)));
    case LayerKind::kRelu: {
      Tensor y = x;
      for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case LayerKind::kTanh: {
      Tensor y = x;
      for (auto& v : y.values()) v = std::tanh(v);
      return y;
    }
  }
  fail(ErrorKind::kConfig, "unknown layer kind");
}

void check_params(const Network& net, const ParamSet& params) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.layers[l];
    if (spec.kind != LayerKind::kAffine) continue;
    const auto& w = param(params, net.weight_key(l));
    const auto& b = param(params, net.bias_key(l));
    if (w.shape() != std::vector<std::size_t>{spec.in_dim, spec.out_dim} ||
        b.shape() != std::vector<std::size_t>{spec.out_dim}) {
      fail(ErrorKind::kConfig, "parameter shape mismatch at " + net.weight_key(l));
    }
  }
}

}  // namespace

std::size_t Network::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
std::size_t Network::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

void Network::validate() const {
  if (layers.empty()) fail(ErrorKind::kConfig, "network '" + name + "' has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& s = layers[l];
    if (s.in_dim == 0 || s.out_dim == 0) {
      fail(ErrorKind::kConfig, "network '" + name + "' layer " + std::to_string(l) + " has a zero dimension");
    }
    if (s.kind != LayerKind::kAffine && s.in_dim != s.out_dim) {
      fail(ErrorKind::kConfig, "activation layer " + std::to_string(l) + " must preserve width");
    }
    if (l > 0 && layers[l - 1].out_dim != s.in_dim) {
      fail(ErrorKind::kConfig, "network '" + name + "' layer " + std::to_string(l) +
                                   " expects width " + std::to_string(s.in_dim) + " but receives " +
                                   std::to_string(layers[l - 1].out_dim));
    }
  }
}

std::string Network::weight_key(std::size_t layer) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "/%02zu/w", layer);
  return name + buf;
}

std::string Network::bias_key(std::size_t layer) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "/%02zu/b", layer);
  return name + buf;
}

Network Network::mlp(std::string name, std::size_t in_dim, const std::vector<std::size_t>& hidden,
                     std::size_t out_dim, LayerKind activation) {
  Network net{std::move(name), {}};
  std::size_t width = in_dim;
  for (auto h : hidden) {
    net.layers.push_back({LayerKind::kAffine, width, h});
    net.layers.push_back({activation, h, h});
    width = h;
  }
  net.layers.push_back({LayerKind::kAffine, width, out_dim});
  net.validate();
  return net;
}

ParamSet init_params(const Network& net, Rng& rng) {
  net.validate();
  ParamSet params;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    if (s.kind != LayerKind::kAffine) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    Tensor w = Tensor::matrix(s.in_dim, s.out_dim);
    for (auto& v : w.values()) v = rng.uniform(-limit, limit);
    params.emplace(net.weight_key(l), std::move(w));
    params.emplace(net.bias_key(l), Tensor({s.out_dim}, 0.0));
  }
  return params;
}

Tensor forward(const Network& net, const ParamSet& params, const Tensor& input) {
  net.validate();
  check_params(net, params);
  Tensor x = as_batch(input);
  if (x.cols() != net.in_dim()) {
    fail(ErrorKind::kConfig, "network '" + net.name + "' expects input width " +
                                 std::to_string(net.in_dim()) + ", got " + std::to_string(x.cols()));
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) x = apply_layer(net, l, params, x);
  return x;
}

BackwardResult backward(const Network& net, const ParamSet& params, const Tensor& input,
                        const Tensor& upstream_grad) {
  net.validate();
  check_params(net, params);
  Tensor x = as_batch(input);
  if (x.cols() != net.in_dim()) {
    fail(ErrorKind::kConfig, "network '" + net.name + "' expects input width " +
                                 std::to_string(net.in_dim()) + ", got " + std::to_string(x.cols()));
  }
  std::vector<Tensor> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) acts.push_back(apply_layer(net, l, params, acts.back()));

  Tensor grad = as_batch(upstream_grad);
  if (!grad.same_shape(acts.back())) {
    fail(ErrorKind::kConfig, "upstream gradient shape " + shape_string(upstream_grad.shape()) +
                                 " does not match output " + shape_string(acts.back().shape()));
  }

  BackwardResult result;
  const std::size_t batch = x.rows();
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& spec = net.layers[l];
    const Tensor& in = acts[l];
    const Tensor& out = acts[l + 1];
    switch (spec.kind) {
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = in[i] > 0.0 ? grad[i] : 0.0;
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - out[i] * out[i];
        break;
      case LayerKind::kAffine: {
        const Tensor& w = param(params, net.weight_key(l));
        const std::size_t ni = spec.in_dim, no = spec.out_dim;
        Tensor dw = Tensor::matrix(ni, no);
        Tensor db({no}, 0.0);
        Tensor dx = Tensor::matrix(batch, ni);
        for (std::size_t r = 0; r < batch; ++r) {
          auto g = grad.row(r);
          auto xi = in.row(r);
          auto dxr = dx.row(r);
          for (std::size_t j = 0; j < no; ++j) db[j] += g[j];
          for (std::size_t i = 0; i < ni; ++i) {
            const double* wi = w.values().data() + i * no;
            double* dwi = dw.values().data() + i * no;
            double acc = 0.0;
            for (std::size_t j = 0; j < no; ++j) {
              dwi[j] += xi[i] * g[j];
              acc += g[j] * wi[j];
            }
            dxr[i] = acc;
          }
        }
        result.grads.emplace(net.weight_key(l), std::move(dw));
        result.grads.emplace(net.bias_key(l), std::move(db));
        grad = std::move(dx);
        break;
      }
    }
  }
  if (input.rank() == 1) grad = Tensor(input.shape(), std::vector<double>(grad.values().begin(), grad.values().end()));
  result.input_grad = std::move(grad);
  return result;
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
  require_compatible(params, grads, "sgd_step");
  ParamSet out = params;
  accumulate(out, grads, -lr);
  return out;
}

ParamSet average_params(std::span<const ParamSet> sets) {
  if (sets.empty()) fail(ErrorKind::kUsage, "average_params needs at least one parameter set");
  for (std::size_t i = 1; i < sets.size(); ++i) require_compatible(sets[0], sets[i], "average_params");
  // Mean as an offset from the first set, so identical inputs come back bit-exact.
  ParamSet offset = zeros_like(sets[0]);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    accumulate(offset, sets[i]);
    accumulate(offset, sets[0], -1.0);
  }
  ParamSet out = sets[0];
  accumulate(out, offset, 1.0 / static_cast<double>(sets.size()));
  return out;
}

ParamSet subset_params(const Network& net, const ParamSet& params) {
  ParamSet out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (net.layers[l].kind != LayerKind::kAffine) continue;
    out.emplace(net.weight_key(l), param(params, net.weight_key(l)));
    out.emplace(net.bias_key(l), param(params, net.bias_key(l)));
  }
  return out;
}

}  // namespace hr

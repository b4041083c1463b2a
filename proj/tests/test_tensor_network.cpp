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

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hr/network.hpp"
#include "hr/parallel.hpp"
#include "hr/rng.hpp"
#include "hr/tensor.hpp"
#include "hr/text_io.hpp"
#include "test_util.hpp"

using namespace hr;
using hr::test::error_kind;

namespace {

Network single_affine(std::size_t in, std::size_t out) { return Network{"net", {{LayerKind::kAffine, in, out}}}; }

// Plain-loop forward pass used as an independent oracle.
std::vector<double> oracle_forward(const Network& net, const ParamSet& p, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    if (s.kind == LayerKind::kAffine) {
      const Tensor& w = p.at(net.weight_key(l));
      const Tensor& b = p.at(net.bias_key(l));
      std::vector<double> y(s.out_dim);
      for (std::size_t j = 0; j < s.out_dim; ++j) {
        double acc = b[j];
        for (std::size_t i = 0; i < s.in_dim; ++i) acc += x[i] * w(i, j);
        y[j] = acc;
      }
      x = y;
    } else if (s.kind == LayerKind::kTanh) {
      for (auto& v : x) v = std::tanh(v);
    } else {
      for (auto& v : x) v = std::max(v, 0.0);
    }
  }
  return x;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape and element access") {
    Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t(1, 2) == 6.0);
    Tensor v({3}, 7.0);
    CHECK(v.rows() == 1);
    CHECK(v.cols() == 3);
    CHECK(error_kind([] { Tensor({2, 2}, std::vector<double>{1, 2, 3}); }) == ErrorKind::kConfig);
  }

  TEST_CASE("gather_rows and slice_cols copy the selected entries") {
    Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    std::vector<std::size_t> idx{2, 0};
    CHECK(t.gather_rows(idx) == Tensor::from_rows({{7, 8, 9}, {1, 2, 3}}));
    CHECK(t.slice_cols(1, 2) == Tensor::from_rows({{2, 3}, {5, 6}, {8, 9}}));
    CHECK(error_kind([&] { t.slice_cols(2, 2); }) == ErrorKind::kConfig);
  }

  TEST_CASE("all_finite spots NaN and infinity") {
    Tensor t({2}, 1.0);
    CHECK(t.all_finite());
    t[1] = std::nan("");
    CHECK_FALSE(t.all_finite());
    t[1] = INFINITY;
    CHECK_FALSE(t.all_finite());
  }

  TEST_CASE("parameter text round trip is exact") {
    Rng rng(3);
    ParamSet p;
    p.emplace("a/w", hr::test::random_matrix(3, 4, rng, 1e3));
    p.emplace("b", Tensor({2}, std::vector<double>{1.0 / 3.0, -2e-300}));
    std::stringstream ss;
    write_params(ss, p);
    ParamSet back = read_params(ss);
    CHECK(back == p);
  }

  TEST_CASE("parameter reader rejects a foreign header") {
    std::stringstream ss("HRPARAMS9\n0\n");
    CHECK(error_kind([&] { read_params(ss); }) == ErrorKind::kVersion);
  }

  TEST_CASE("format_double round-trips") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.index(200)) - 100);
      CHECK(parse_double(format_double(v)) == v);
    }
  }
}

TEST_SUITE("network") {
  TEST_CASE("identity affine layer passes input through") {
    Network net = single_affine(3, 3);
    ParamSet p;
    Tensor w = Tensor::matrix(3, 3);
    for (int i = 0; i < 3; ++i) w(i, i) = 1.0;
    p.emplace(net.weight_key(0), w);
    p.emplace(net.bias_key(0), Tensor({3}, 0.0));
    Tensor y = forward(net, p, Tensor({3}, std::vector<double>{1, 2, 3}));
    CHECK(y == Tensor::from_rows({{1, 2, 3}}));
  }

  TEST_CASE("zero-weight affine layer outputs its bias") {
    Network net = single_affine(4, 2);
    ParamSet p;
    p.emplace(net.weight_key(0), Tensor::matrix(4, 2));
    p.emplace(net.bias_key(0), Tensor({2}, std::vector<double>{0.5, -1.5}));
    Rng rng(1);
    Tensor y = forward(net, p, hr::test::random_matrix(5, 4, rng));
    for (std::size_t r = 0; r < 5; ++r) {
      CHECK(y(r, 0) == 0.5);
      CHECK(y(r, 1) == -1.5);
    }
  }

  TEST_CASE("two-layer net on seed 7 matches a loop oracle") {
    Network net = Network::mlp("net", 4, {5}, 3, LayerKind::kTanh);
    Rng rng(7);
    ParamSet p = hr::test::random_like(init_params(net, rng), rng);
    Tensor x = hr::test::random_matrix(6, 4, rng);
    Tensor y = forward(net, p, x);
    for (std::size_t r = 0; r < 6; ++r) {
      auto row = x.row(r);
      auto expect = oracle_forward(net, p, {row.begin(), row.end()});
      for (std::size_t j = 0; j < 3; ++j) CHECK(y(r, j) == doctest::Approx(expect[j]).epsilon(1e-14));
    }
  }

  TEST_CASE("width mismatches are configuration errors") {
    Network net = single_affine(3, 2);
    Rng rng(1);
    ParamSet p = init_params(net, rng);
    CHECK(error_kind([&] { forward(net, p, Tensor::matrix(2, 4)); }) == ErrorKind::kConfig);
    CHECK(error_kind([&] { backward(net, p, Tensor::matrix(2, 3), Tensor::matrix(2, 3)); }) == ErrorKind::kConfig);
    Network bad{"bad", {{LayerKind::kAffine, 3, 4}, {LayerKind::kAffine, 5, 2}}};
    CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::kConfig);
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    Network net = Network::mlp("net", 3, {4, 4}, 2, LayerKind::kRelu);
    Rng rng(2);
    ParamSet p = init_params(net, rng);
    auto res = backward(net, p, hr::test::random_matrix(5, 3, rng), Tensor::matrix(5, 2));
    CHECK(res.grads.size() == p.size());
    for (const auto& [k, g] : res.grads) {
      for (double v : g.values()) CHECK(v == 0.0);
    }
  }

  TEST_CASE("sum loss of one affine layer: weight gradient is the column sum of inputs") {
    Network net = single_affine(3, 2);
    Rng rng(4);
    ParamSet p = init_params(net, rng);
    Tensor x = hr::test::random_matrix(4, 3, rng);
    auto res = backward(net, p, x, Tensor::matrix(4, 2, 1.0));
    const Tensor& dw = res.grads.at(net.weight_key(0));
    const Tensor& db = res.grads.at(net.bias_key(0));
    for (std::size_t i = 0; i < 3; ++i) {
      double col = 0.0;
      for (std::size_t r = 0; r < 4; ++r) col += x(r, i);
      for (std::size_t j = 0; j < 2; ++j) CHECK(dw(i, j) == doctest::Approx(col).epsilon(1e-14));
    }
    for (std::size_t j = 0; j < 2; ++j) CHECK(db[j] == 4.0);
  }

  TEST_CASE("backward matches central finite differences") {
    for (LayerKind act : {LayerKind::kTanh, LayerKind::kRelu}) {
      Network net = Network::mlp("net", 5, {7, 6}, 3, act);
      Rng rng(11);
      ParamSet p = init_params(net, rng);
      Tensor x = hr::test::random_matrix(4, 5, rng);
      Tensor up = hr::test::random_matrix(4, 3, rng);
      auto loss = [&](const ParamSet& q) {
        Tensor y = forward(net, q, x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
        return s;
      };
      auto res = backward(net, p, x, up);
      CHECK(hr::test::worst_fd_error(p, res.grads, loss, 200, rng) < 1e-4);
    }
  }

  TEST_CASE("input gradient matches finite differences") {
    Network net = Network::mlp("net", 4, {6}, 2, LayerKind::kTanh);
    Rng rng(12);
    ParamSet p = init_params(net, rng);
    Tensor x = hr::test::random_matrix(3, 4, rng);
    Tensor up = hr::test::random_matrix(3, 2, rng);
    auto res = backward(net, p, x, up);
    for (std::size_t i = 0; i < x.size(); ++i) {
      Tensor a = x, b = x;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      Tensor ya = forward(net, p, a), yb = forward(net, p, b);
      double d = 0.0;
      for (std::size_t k = 0; k < ya.size(); ++k) d += (ya[k] - yb[k]) * up[k];
      CHECK(hr::test::rel_error(res.input_grad[i], d / 2e-6) < 1e-6);
    }
  }

  TEST_CASE("forward and backward are bit-deterministic") {
    Network net = Network::mlp("net", 4, {8}, 3, LayerKind::kTanh);
    Rng rng(9);
    ParamSet p = init_params(net, rng);
    Tensor x = hr::test::random_matrix(5, 4, rng);
    Tensor up = hr::test::random_matrix(5, 3, rng);
    CHECK(forward(net, p, x) == forward(net, p, x));
    CHECK(backward(net, p, x, up).grads == backward(net, p, x, up).grads);
  }

  TEST_CASE("init is Glorot-uniform with zero biases") {
    Network net = single_affine(30, 20);
    Rng rng(1);
    ParamSet p = init_params(net, rng);
    const double limit = std::sqrt(6.0 / 50.0);
    for (double v : p.at(net.weight_key(0)).values()) CHECK(std::abs(v) <= limit);
    for (double v : p.at(net.bias_key(0)).values()) CHECK(v == 0.0);
  }
}

TEST_SUITE("sgd and averaging") {
  TEST_CASE("sgd arithmetic") {
    ParamSet p{{"x", Tensor({1}, 1.0)}};
    ParamSet g{{"x", Tensor({1}, 0.5)}};
    CHECK(sgd_step(p, g, 0.0) == p);
    CHECK(sgd_step(p, g, 0.1).at("x")[0] == doctest::Approx(0.95).epsilon(1e-15));
    ParamSet missing{{"y", Tensor({1}, 0.5)}};
    CHECK(error_kind([&] { sgd_step(p, missing, 0.1); }) == ErrorKind::kConfig);
  }

  TEST_CASE("repeated steps on a quadratic reach the closed-form minimizer") {
    // loss = 0.5 * sum a_i (x_i - c_i)^2 has its minimum at c.
    std::vector<double> a{1.0, 2.5, 0.3}, c{-1.0, 4.0, 0.5};
    ParamSet p{{"x", Tensor({3}, 0.0)}};
    for (int it = 0; it < 2000; ++it) {
      ParamSet g{{"x", Tensor({3}, 0.0)}};
      for (std::size_t i = 0; i < 3; ++i) g.at("x")[i] = a[i] * (p.at("x")[i] - c[i]);
      p = sgd_step(p, g, 0.3);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.at("x")[i] - c[i]) < 1e-6);
  }

  TEST_CASE("average of identical sets is the identity") {
    Rng rng(1);
    Network net = Network::mlp("n", 3, {4}, 2, LayerKind::kTanh);
    ParamSet p = init_params(net, rng);
    std::vector<ParamSet> sets(5, p);
    CHECK(average_params(sets) == p);
  }

  TEST_CASE("average of {1} and {3} is {2}") {
    std::vector<ParamSet> sets{{{"x", Tensor({1}, 1.0)}}, {{"x", Tensor({1}, 3.0)}}};
    CHECK(average_params(sets).at("x")[0] == 2.0);
  }

  TEST_CASE("average matches a second-pass element-wise mean and is order-free in value") {
    Rng rng(21);
    Network net = Network::mlp("n", 4, {6}, 3, LayerKind::kTanh);
    ParamSet shape = init_params(net, rng);
    std::vector<ParamSet> sets;
    for (int i = 0; i < 5; ++i) sets.push_back(hr::test::random_like(shape, rng, 10.0));
    ParamSet avg = average_params(sets);
    for (const auto& [k, t] : shape) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        double s = 0.0;
        for (const auto& set : sets) s += set.at(k)[i];
        CHECK(std::abs(avg.at(k)[i] - s / 5.0) <= 1e-12);
      }
    }
    std::vector<ParamSet> reversed(sets.rbegin(), sets.rend());
    ParamSet rev = average_params(reversed);
    for (const auto& [k, t] : avg) {
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(t[i] - rev.at(k)[i]) <= 1e-12);
    }
  }

  TEST_CASE("average rejects empty and mismatched input") {
    CHECK(error_kind([] { average_params({}); }) == ErrorKind::kUsage);
    std::vector<ParamSet> sets{{{"x", Tensor({1}, 1.0)}}, {{"x", Tensor({2}, 1.0)}}};
    CHECK(error_kind([&] { average_params(sets); }) == ErrorKind::kConfig);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("stream keys separate tags and reproduce") {
    auto k = [](int client, const char* what) { return (StreamKey(42) << "client" << client << what).value(); };
    CHECK(k(1, "train") == k(1, "train"));
    CHECK(k(1, "train") != k(2, "train"));
    CHECK(k(1, "train") != k(1, "replay"));
    CHECK((StreamKey(1) << "a").value() != (StreamKey(2) << "a").value());
  }

  TEST_CASE("sample_without_replacement draws distinct in-range indices") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      auto s = rng.sample_without_replacement(20, 7);
      CHECK(s.size() == 7);
      std::sort(s.begin(), s.end());
      CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
      CHECK(s.back() < 20);
    }
  }

  TEST_CASE("permutation is a permutation") {
    Rng rng(4);
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(p[i] == i);
  }
}

TEST_SUITE("parallel") {
  TEST_CASE("every index runs exactly once") {
    for (int threads : {0, 1, 3}) {
      std::vector<std::atomic<int>> hits(100);
      parallel_for(100, threads, [&](std::size_t i) { hits[i]++; });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }

  TEST_CASE("the lowest failing index is rethrown") {
    for (int threads : {0, 4}) {
      try {
        parallel_for(20, threads, [](std::size_t i) {
          if (i == 7 || i == 13) throw std::runtime_error("idx " + std::to_string(i));
        });
        FAIL("no exception");
      } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "idx 7");
      }
    }
  }
}

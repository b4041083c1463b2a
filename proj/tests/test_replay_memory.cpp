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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "hr/replay_memory.hpp"
#include "test_util.hpp"

using namespace hr;
using hr::test::error_kind;

namespace {

using Vectors = LatentExemplarStore::Vectors;

Vectors numbered(std::size_t count, std::size_t dim, double base) {
  Vectors out(count, std::vector<double>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) out[i][k] = base + static_cast<double>(i) + 0.01 * static_cast<double>(k);
  }
  return out;
}

// Quota of the class at `rank` among `classes` keys, dealing the budget out one unit at a time.
std::size_t oracle_quota(std::size_t budget, std::size_t classes, std::size_t rank) {
  std::vector<std::size_t> q(classes, 0);
  for (std::size_t unit = 0; unit < budget; ++unit) ++q[unit % classes];
  return q[rank];
}

CentroidTable two_task_table(std::size_t dim) {
  CentroidTable t(dim);
  t.insert({1, 0}, {std::vector<double>(dim, 1.0), 0, true});
  t.insert({1, 1}, {std::vector<double>(dim, -1.0), 1, true});
  t.insert({2, 2}, {std::vector<double>(dim, 5.0), 2, true});
  return t;
}

bool row_in(const Tensor& x, std::size_t r, const Vectors& pool) {
  std::vector<double> row(x.row(r).begin(), x.row(r).end());
  return std::find(pool.begin(), pool.end(), row) != pool.end();
}

}  // namespace

TEST_SUITE("replay memory") {
  TEST_CASE("quotas split the budget evenly with the remainder to the lowest keys") {
    LatentExemplarStore s(10, 2);
    CHECK(s.base_quota() == 0);
    CHECK(s.quota({1, 0}) == 10);
    s.add_class({1, 0}, numbered(12, 2, 0.0));
    CHECK(s.vectors({1, 0}).size() == 10);
    s.add_class({1, 1}, numbered(12, 2, 100.0));
    s.add_class({2, 2}, numbered(12, 2, 200.0));
    CHECK(s.base_quota() == 3);
    CHECK(s.quota({1, 0}) == 4);
    CHECK(s.quota({1, 1}) == 3);
    CHECK(s.quota({2, 2}) == 3);
    CHECK(s.vectors({1, 0}).size() == 4);
    CHECK(s.total() == 10);
    CHECK(s.float_count() == 20);
    // Truncation keeps the earliest stored vectors.
    CHECK(s.vectors({1, 0}) == numbered(4, 2, 0.0));
    s.check_invariants();
  }

  TEST_CASE("classes with fewer samples than their quota keep all of them") {
    LatentExemplarStore s(100, 1);
    s.add_class({1, 0}, numbered(3, 1, 0.0));
    s.add_class({1, 1}, numbered(70, 1, 0.0));
    CHECK(s.vectors({1, 0}).size() == 3);
    CHECK(s.vectors({1, 1}).size() == 50);
  }

  TEST_CASE("random admission sequences match an independent quota oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t budget = 1 + rng.index(60);
      LatentExemplarStore s(budget, 1);
      std::map<ClassKey, Vectors> original;
      std::map<ClassKey, std::size_t> expected;
      for (int op = 0; op < 20; ++op) {
        const ClassKey key{1 + static_cast<int>(rng.index(5)), static_cast<int>(rng.index(10))};
        if (s.contains(key)) {
          CHECK(error_kind([&] { s.add_class(key, numbered(1, 1, 0.0)); }) == ErrorKind::kProtocol);
          continue;
        }
        const Vectors v = numbered(rng.index(30), 1, 1000.0 * op);
        original[key] = v;
        expected[key] = v.size();
        s.add_class(key, v);
        std::size_t rank = 0;
        for (auto& [k, count] : expected) {
          count = std::min(count, oracle_quota(budget, expected.size(), rank++));
        }
        std::size_t total = 0;
        for (const auto& [k, count] : expected) {
          const Vectors& got = s.vectors(k);
          REQUIRE(got.size() == count);
          CHECK(std::equal(got.begin(), got.end(), original[k].begin()));
          CHECK(got.size() <= s.quota(k));
          total += count;
        }
        CHECK(total <= budget);
        CHECK(s.total() == total);
        s.check_invariants();
      }
    }
  }

  TEST_CASE("admission encodes distinct random rows") {
    Rng rng(12);
    const auto model = hr::test::identity_model(3);
    Tensor data = hr::test::random_matrix(20, 3, rng);
    Vectors rows;
    for (std::size_t r = 0; r < data.rows(); ++r) rows.emplace_back(data.row(r).begin(), data.row(r).end());

    LatentExemplarStore s(6, 3);
    s = admit_new_class(s, model, {1, 0}, data, rng);
    const auto& kept = s.vectors({1, 0});
    CHECK(kept.size() == 6);
    std::set<std::vector<double>> distinct(kept.begin(), kept.end());
    CHECK(distinct.size() == 6);
    for (const auto& v : kept) CHECK(std::find(rows.begin(), rows.end(), v) != rows.end());

    auto raw = admit_raw_class(LatentExemplarStore(50, 3), {1, 1}, data, rng);
    CHECK(raw.vectors({1, 1}).size() == 20);

    CHECK(error_kind([&] { admit_new_class(s, model, {1, 0}, data, rng); }) == ErrorKind::kProtocol);
    CHECK(error_kind([&] { admit_new_class(s, model, {1, 2}, Tensor(), rng); }) == ErrorKind::kData);
    CHECK(error_kind([&] { admit_new_class(LatentExemplarStore(6, 2), model, {1, 2}, data, rng); }) ==
          ErrorKind::kConfig);
    CHECK(error_kind([&] { admit_raw_class(LatentExemplarStore(6, 2), {1, 2}, data, rng); }) == ErrorKind::kConfig);
  }

  TEST_CASE("re-encoding through identity maps is a no-op") {
    const auto model = hr::test::identity_model(2);
    LatentExemplarStore s(8, 2);
    CHECK(reencode_memory(s, model, model) == s);
    s.add_class({1, 0}, numbered(4, 2, 0.5));
    s.add_class({1, 1}, numbered(4, 2, -3.0));
    CHECK(reencode_memory(s, model, model) == s);
  }

  TEST_CASE("re-encoding matches a per-vector decode then encode") {
    const auto old_model = hr::test::small_model(5, 3, 21);
    const auto new_model = hr::test::small_model(5, 3, 22);
    LatentExemplarStore s(9, 3);
    Rng rng(23);
    s.add_class({1, 0}, {});
    for (int c = 1; c < 3; ++c) {
      Vectors v;
      for (int i = 0; i < 4; ++i) v.push_back({rng.normal(), rng.normal(), rng.normal()});
      s.add_class({1, c}, v);
    }
    auto out = reencode_memory(s, old_model, new_model);
    CHECK(out.vectors({1, 0}).empty());
    for (const auto& [key, vecs] : s.classes()) {
      REQUIRE(out.vectors(key).size() == vecs.size());
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        Tensor z({1, 3}, vecs[i]);
        Tensor expected = encode_mean(new_model, decode(old_model, z));
        for (std::size_t k = 0; k < 3; ++k) CHECK(out.vectors(key)[i][k] == doctest::Approx(expected[k]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("replay decodes exemplars where stored and noised centroids elsewhere") {
    Rng rng(31);
    const auto model = hr::test::identity_model(2);
    const auto table = two_task_table(2);
    LatentExemplarStore s(12, 2);
    s.add_class({1, 0}, numbered(3, 2, 10.0));
    ReplayConfig cfg;
    cfg.samples_per_class = 5;
    cfg.noise_sigma = 0.0;

    auto batch = synthesize_replay(s, table, model, 2, cfg, rng);
    REQUIRE(batch.size() == 10);
    REQUIRE(batch.x.rows() == 10);
    for (std::size_t r = 0; r < batch.size(); ++r) {
      if (batch.labels[r] == ClassKey{1, 0}) {
        CHECK(batch.sources[r] == ReplaySource::kLatentExemplar);
        CHECK(row_in(batch.x, r, s.vectors({1, 0})));
      } else {
        CHECK(batch.labels[r] == ClassKey{1, 1});
        CHECK(batch.sources[r] == ReplaySource::kCentroidNoise);
        CHECK(batch.x(r, 0) == -1.0);
        CHECK(batch.x(r, 1) == -1.0);
      }
    }

    cfg.global_replay = false;
    batch = synthesize_replay(s, table, model, 2, cfg, rng);
    CHECK(batch.size() == 5);

    cfg.raw_exemplars = true;
    batch = synthesize_replay(s, table, model, 2, cfg, rng);
    for (std::size_t r = 0; r < batch.size(); ++r) CHECK(batch.sources[r] == ReplaySource::kRawExemplar);

    CHECK(synthesize_replay(s, table, model, 1, cfg, rng).size() == 0);
    CHECK(synthesize_replay(s, table, model, 3, cfg, rng).size() == 5);
  }

  TEST_CASE("centroid replay noise has the configured spread") {
    Rng rng(32);
    const auto model = hr::test::identity_model(2);
    CentroidTable table(2);
    table.insert({1, 0}, {{2.0, -1.0}, 0, true});
    ReplayConfig cfg;
    cfg.samples_per_class = 20000;
    cfg.noise_sigma = 0.5;
    auto batch = synthesize_replay(LatentExemplarStore(10, 2), table, model, 2, cfg, rng);
    REQUIRE(batch.size() == 20000);
    for (std::size_t k = 0; k < 2; ++k) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < batch.size(); ++r) mean += batch.x(r, k);
      mean /= batch.size();
      for (std::size_t r = 0; r < batch.size(); ++r) sq += (batch.x(r, k) - mean) * (batch.x(r, k) - mean);
      CHECK(mean == doctest::Approx(table.at({1, 0}).embedding[k]).epsilon(0.02));
      CHECK(std::sqrt(sq / batch.size()) == doctest::Approx(0.5).epsilon(0.03));
    }
  }

  TEST_CASE("replay per class defaults to the larger of the base quota and eight") {
    ReplayConfig cfg;
    LatentExemplarStore small(4, 1), large(60, 1);
    small.add_class({1, 0}, {});
    large.add_class({1, 0}, {});
    large.add_class({1, 1}, {});
    CHECK(cfg.effective_samples_per_class(small) == 8);
    CHECK(cfg.effective_samples_per_class(large) == 30);
    cfg.samples_per_class = 3;
    CHECK(cfg.effective_samples_per_class(large) == 3);
  }

  TEST_CASE("replay rejects memory the centroid table does not know and negative noise") {
    Rng rng(33);
    const auto model = hr::test::identity_model(2);
    LatentExemplarStore s(4, 2);
    s.add_class({1, 7}, numbered(2, 2, 0.0));
    CHECK(error_kind([&] { synthesize_replay(s, two_task_table(2), model, 2, ReplayConfig{}, rng); }) ==
          ErrorKind::kProtocol);
    ReplayConfig bad;
    bad.noise_sigma = -1.0;
    CHECK(error_kind([&] { synthesize_replay(LatentExemplarStore(4, 2), two_task_table(2), model, 2, bad, rng); }) ==
          ErrorKind::kConfig);
  }

  TEST_CASE("latent memory holds the same exemplar count in a fraction of the floats") {
    Rng rng(34);
    const auto model = hr::test::small_model(16, 2, 35);
    Tensor data = hr::test::random_matrix(30, 16, rng);
    auto latent = admit_new_class(LatentExemplarStore(20, 2), model, {1, 0}, data, rng);
    auto raw = admit_raw_class(LatentExemplarStore(20, 16), {1, 0}, data, rng);
    CHECK(latent.total() == raw.total());
    CHECK(static_cast<double>(raw.float_count()) / static_cast<double>(latent.float_count()) == 8.0);
  }

  TEST_CASE("HRMEM1 round trip is exact and validated") {
    Rng rng(36);
    LatentExemplarStore s(7, 3);
    for (int c = 0; c < 3; ++c) {
      Vectors v;
      for (int i = 0; i < 3; ++i) v.push_back({rng.normal(), rng.normal() * 1e-12, rng.normal() * 1e12});
      s.add_class({1 + c, c}, v);
    }
    std::stringstream ss;
    write_store(ss, s);
    CHECK(read_store(ss) == s);

    std::stringstream foreign("HRMEM9\n7 3 0\n");
    CHECK(error_kind([&] { read_store(foreign); }) == ErrorKind::kVersion);
    std::stringstream over("HRMEM1\n2 1 1\n1 0 3 1 0 1 2\n");
    CHECK(error_kind([&] { read_store(over); }) == ErrorKind::kData);
    std::stringstream truncated("HRMEM1\n2 1 1\n1 0 2 1 0\n");
    CHECK(error_kind([&] { read_store(truncated); }).has_value());
  }
}

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

#include <cmath>
#include <map>
#include <vector>

#include "hr/metrics.hpp"
#include "test_util.hpp"

using namespace hr;
using hr::test::error_kind;

namespace {

Dataset rows(std::vector<std::vector<double>> points, std::vector<int> labels) {
  Dataset d;
  d.dim = points.front().size();
  std::vector<double> values;
  for (const auto& p : points) values.insert(values.end(), p.begin(), p.end());
  d.x = Tensor({points.size(), d.dim}, std::move(values));
  d.labels = std::move(labels);
  return d;
}

AccuracyMatrix matrix(std::vector<std::vector<double>> cells) {
  AccuracyMatrix m;
  int t = 0;
  for (auto& r : cells) {
    AccuracyRow row;
    row.after_task = ++t;
    for (double v : r) row.per_task.push_back(v);
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("separable classes score perfectly") {
    const auto model = hr::test::identity_model(2);
    CentroidTable t(2);
    t.insert({1, 0}, {{-5.0, 0.0}, 0, true});
    t.insert({1, 1}, {{5.0, 0.0}, 1, true});
    t.insert({2, 2}, {{0.0, 5.0}, 1, true});
    std::vector<Dataset> sets{rows({{-4.0, 1.0}, {4.5, -0.5}, {6.0, 0.0}}, {0, 1, 1}), rows({{0.2, 4.0}}, {2})};
    auto row = evaluate(model, t, sets, 2);
    CHECK(row.after_task == 2);
    REQUIRE(row.per_task.size() == 2);
    CHECK(*row.per_task[0] == 1.0);
    CHECK(*row.per_task[1] == 1.0);
    CHECK(*row.overall == 1.0);
  }

  TEST_CASE("accuracy counts hits per task and pooled") {
    const auto model = hr::test::identity_model(1);
    CentroidTable t(1);
    t.insert({1, 0}, {{0.0}, 0, true});
    t.insert({1, 1}, {{10.0}, 0, true});
    std::vector<Dataset> sets{rows({{1.0}, {9.0}, {2.0}, {3.0}}, {0, 0, 1, 0}), Dataset{}, rows({{8.0}}, {1})};
    auto row = evaluate(model, t, sets, 3);
    CHECK(*row.per_task[0] == 0.5);
    CHECK_FALSE(row.per_task[1].has_value());
    CHECK(*row.per_task[2] == 1.0);
    CHECK(*row.overall == doctest::Approx(3.0 / 5.0));
    CHECK_FALSE(evaluate(model, t, std::vector<Dataset>{Dataset{}}, 1).overall.has_value());
  }

  TEST_CASE("accuracy matches a brute-force nearest-centroid scan") {
    Rng rng(5);
    const auto model = hr::test::small_model(3, 2, 9);
    for (int trial = 0; trial < 20; ++trial) {
      CentroidTable t(2);
      for (int c = 0; c < 4; ++c) t.insert({1 + c / 2, c}, {{rng.normal(), rng.normal()}, c, true});
      Dataset d;
      d.dim = 3;
      d.x = hr::test::random_matrix(50, 3, rng, 2.0);
      for (int i = 0; i < 50; ++i) d.labels.push_back(static_cast<int>(rng.index(4)));
      Tensor z = encode_mean(model, d.x);
      std::size_t hits = 0;
      for (std::size_t r = 0; r < 50; ++r) {
        double best = INFINITY;
        int pred = -1;
        for (const auto& [key, e] : t) {
          double s = 0.0;
          for (std::size_t k = 0; k < 2; ++k) s += (z(r, k) - e.embedding[k]) * (z(r, k) - e.embedding[k]);
          if (s < best) {
            best = s;
            pred = key.cls;
          }
        }
        hits += pred == d.labels[r];
      }
      auto row = evaluate(model, t, std::vector<Dataset>{d}, 1);
      CHECK(*row.per_task[0] == doctest::Approx(hits / 50.0));
    }
  }

  TEST_CASE("well separated classes have no confusion") {
    const auto model = hr::test::identity_model(2);
    CentroidTable t(2);
    t.insert({1, 0}, {{-5.0, 0.0}, 0, true});
    t.insert({1, 1}, {{5.0, 0.0}, 1, true});
    t.insert({2, 2}, {{0.0, 5.0}, 0, true});
    std::vector<Dataset> sets{rows({{-5.0, 0.1}, {5.0, 0.1}}, {0, 1}), rows({{0.0, 5.5}}, {2})};
    auto c = pairwise_confusion(model, t, sets, 2);
    CHECK(c.terms.size() == 6);
    CHECK(c.total == 0.0);
  }

  TEST_CASE("two classes sharing a centroid position split about evenly") {
    Rng rng(6);
    const auto model = hr::test::identity_model(2);
    CentroidTable t(2);
    t.insert({1, 0}, {{0.0, 0.0}, 0, true});
    t.insert({2, 1}, {{1e-9, 0.0}, 1, true});
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
      pts.push_back({rng.normal(), rng.normal()});
      labels.push_back(i % 2);
    }
    auto c = pairwise_confusion(model, t, std::vector<Dataset>{rows(pts, labels)}, 1);
    REQUIRE(c.terms.size() == 2);
    for (const auto& term : c.terms) CHECK(term.u == doctest::Approx(0.5).epsilon(0.05));
    CHECK(c.within_task == 0.0);
    CHECK(c.intra_client == 0.0);
    CHECK(c.inter_client == doctest::Approx(c.terms[0].u + c.terms[1].u));
  }

  TEST_CASE("confusion groups match an independent regrouping of the terms") {
    Rng rng(7);
    const auto model = hr::test::small_model(3, 2, 11);
    for (int trial = 0; trial < 10; ++trial) {
      CentroidTable t(2);
      for (int c = 0; c < 6; ++c) {
        t.insert({1 + c / 2, c}, {{rng.normal() * 0.3, rng.normal() * 0.3}, static_cast<int>(rng.index(3)), true});
      }
      std::vector<Dataset> sets;
      for (int task = 0; task < 3; ++task) {
        Dataset d;
        d.dim = 3;
        d.x = hr::test::random_matrix(30, 3, rng, 2.0);
        for (int i = 0; i < 30; ++i) d.labels.push_back(2 * task + i % 2);
        sets.push_back(d);
      }
      const int per_task = 2;
      auto c = pairwise_confusion(model, t, sets, per_task);
      REQUIRE(c.terms.size() == 30);
      double within = 0.0, intra = 0.0, inter = 0.0;
      for (const auto& term : c.terms) {
        // Recompute u for this pair directly from the encodings.
        const Dataset& set = sets[static_cast<std::size_t>(term.a.task - 1)];
        Tensor z = encode_mean(model, set.rows_of(term.a.cls));
        std::size_t closer = 0;
        for (std::size_t r = 0; r < z.rows(); ++r) {
          closer += squared_distance(z.row(r), t.at(term.b).embedding) < squared_distance(z.row(r), t.at(term.a).embedding);
        }
        CHECK(term.u == doctest::Approx(static_cast<double>(closer) / z.rows()));
        const double scaled = term.u / (per_task * per_task);
        if (term.a.task == term.b.task) {
          within += scaled;
        } else if (t.at(term.a).origin_client == t.at(term.b).origin_client) {
          intra += scaled;
        } else {
          inter += scaled;
        }
      }
      CHECK(c.within_task == doctest::Approx(within).epsilon(1e-12));
      CHECK(c.intra_client == doctest::Approx(intra).epsilon(1e-12));
      CHECK(c.inter_client == doctest::Approx(inter).epsilon(1e-12));
      CHECK(c.total == doctest::Approx(within + intra + inter).epsilon(1e-12));
    }
    CHECK(error_kind([] { pairwise_confusion(hr::test::identity_model(1), CentroidTable(1), {}, 0); }) ==
          ErrorKind::kConfig);
  }

  TEST_CASE("forgetting") {
    SUBCASE("constant accuracy forgets nothing") {
      auto f = forgetting(matrix({{0.8}, {0.8, 0.7}, {0.8, 0.7, 0.9}}));
      CHECK(f.per_task == std::vector<double>{0.0, 0.0});
      CHECK(f.mean == 0.0);
      CHECK_FALSE(f.negative_flag);
      REQUIRE(f.trend.size() == 3);
      CHECK(f.trend[2] == doctest::Approx(0.8));
    }
    SUBCASE("a drop from the peak is forgetting") {
      auto f = forgetting(matrix({{0.9}, {0.6, 1.0}}));
      REQUIRE(f.per_task.size() == 1);
      CHECK(f.per_task[0] == doctest::Approx(0.3));
      CHECK(f.mean == doctest::Approx(0.3));
    }
    SUBCASE("the peak may come after the first evaluation") {
      auto f = forgetting(matrix({{0.5}, {0.9, 0.4}, {0.7, 0.6, 0.8}}));
      REQUIRE(f.per_task.size() == 2);
      CHECK(f.per_task[0] == doctest::Approx(0.2));
      CHECK(f.per_task[1] == doctest::Approx(0.0));
      CHECK(f.mean == doctest::Approx(0.1));
    }
    SUBCASE("single evaluation") {
      auto f = forgetting(matrix({{0.4}}));
      CHECK(f.per_task.empty());
      CHECK(f.mean == 0.0);
    }
  }

  TEST_CASE("seed aggregation") {
    SUBCASE("identical runs have zero standard error") {
      auto m = matrix({{0.5}, {0.4, 0.6}});
      std::vector<AccuracyMatrix> runs{m, m, m};
      auto a = aggregate_seeds(runs);
      CHECK(a.mean[1][1] == doctest::Approx(0.6));
      CHECK(*a.sem[1][1] == doctest::Approx(0.0));
    }
    SUBCASE("two runs") {
      std::vector<AccuracyMatrix> runs{matrix({{0.4}}), matrix({{0.6}})};
      runs[0].rows[0].overall = 0.4;
      runs[1].rows[0].overall = 0.6;
      auto a = aggregate_seeds(runs);
      CHECK(a.mean[0][0] == doctest::Approx(0.5));
      CHECK(*a.sem[0][0] == doctest::Approx(0.1));
      CHECK(a.overall_mean[0] == doctest::Approx(0.5));
      CHECK(*a.overall_sem[0] == doctest::Approx(0.1));
    }
    SUBCASE("a single run has no standard error") {
      std::vector<AccuracyMatrix> runs{matrix({{0.7}})};
      auto a = aggregate_seeds(runs);
      CHECK(a.mean[0][0] == 0.7);
      CHECK_FALSE(a.sem[0][0].has_value());
    }
    SUBCASE("shape mismatches are usage errors") {
      std::vector<AccuracyMatrix> runs{matrix({{0.7}}), matrix({{0.7}, {0.1, 0.2}})};
      CHECK(error_kind([&] { aggregate_seeds(runs); }) == ErrorKind::kUsage);
      std::vector<AccuracyMatrix> ragged{matrix({{0.7, 0.1}}), matrix({{0.7}})};
      CHECK(error_kind([&] { aggregate_seeds(ragged); }) == ErrorKind::kUsage);
      CHECK(error_kind([] { aggregate_seeds({}); }) == ErrorKind::kUsage);
    }
    SUBCASE("mean and sem of a sample") {
      std::vector<double> v{1.0, 2.0, 3.0, 4.0};
      auto ms = mean_sem(v);
      CHECK(ms.mean == 2.5);
      CHECK(*ms.sem == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    }
  }
}

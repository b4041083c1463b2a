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
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hr/experiment.hpp"
#include "test_util.hpp"

using namespace hr;
using hr::test::error_kind;
using hr::test::tiny_config;
namespace fs = std::filesystem;

namespace {

std::string error_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// Rows of a CSV file split on commas (no quoting needed for the columns read here).
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// Keys whose values differ between two canonical config echoes.
std::set<std::string> changed_keys(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto ja = nlohmann::json::parse(config_to_json(a));
  auto jb = nlohmann::json::parse(config_to_json(b));
  std::set<std::string> out;
  for (const auto& [k, v] : ja.items()) {
    if (jb[k] != v) out.insert(k);
  }
  return out;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("a complete config parses into the simulation settings") {
    auto cfg = parse_config(tiny_config("out/x", R"("lambda": 2.5, "alignment": "rfa", "activation": "relu")"));
    CHECK(cfg.variant == "HR");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(cfg.output_dir == "out/x");
    CHECK(cfg.blobs.classes == 4);
    CHECK(cfg.sim.round.tasks == 2);
    CHECK(cfg.sim.round.per_round == 2);
    CHECK(cfg.sim.arch.input_dim == 4);
    CHECK(cfg.sim.arch.encoder_hidden == std::vector<std::size_t>{8});
    CHECK(cfg.sim.arch.activation == LayerKind::kRelu);
    CHECK(cfg.sim.loss.lambda == 2.5);
    CHECK(cfg.sim.alignment.method == AlignmentMethod::kRepulsive);
    CHECK(cfg.sim.replay.samples_per_class == 8);
  }

  TEST_CASE("parse errors name the field and carry the right kind") {
    CHECK(error_message(tiny_config("o", R"("bogus_key": 1)")).find("bogus_key") != std::string::npos);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("bogus_key": 1)")); }) == ErrorKind::kConfig);
    CHECK(error_message(tiny_config("o", R"("lr": "fast")")).find("'lr'") != std::string::npos);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("epochs": 1.5)")); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("kd": 1)")); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("seeds": [-1])")); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("alignment": "magnets")")); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config(tiny_config("o", R"("schema_version": 2)")); }) == ErrorKind::kVersion);
    CHECK(error_kind([] { parse_config(R"({"variant": "HR"})"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config("{ not json"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { parse_config("[1, 2]"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { load_config("/nonexistent/config.json"); }) == ErrorKind::kConfig);
  }

  TEST_CASE("inconsistent settings are rejected") {
    for (const char* extra : {R"("clients_per_round": 4)", R"("tasks": 3)", R"("seeds": [])", R"("seeds": [1, 1])",
                              R"("holdout_fraction": 0)", R"("alpha": 0)", R"("perfect_exemplars": true, "latent_exemplars": false)",
                              R"("memory_budget_floats": 1)", R"("lj_eta": 0)", R"("rfa_strength": -1, "alignment": "rfa")",
                              R"("noise_sigma": -0.5)", R"("lr": -1)"}) {
      CAPTURE(extra);
      CHECK(error_kind([&] { parse_config(tiny_config("o", extra)); }) == ErrorKind::kConfig);
    }
  }

  TEST_CASE("the canonical echo round-trips") {
    auto cfg = parse_config(tiny_config("out/y", R"("blob_seed": 7, "kd_weight": 0.125, "lj_gradient": "literal")"));
    const auto text = config_to_json(cfg);
    auto again = parse_config(text);
    CHECK(config_to_json(again) == text);
    CHECK(again.blob_seed == std::optional<std::uint64_t>{7});
    auto doc = nlohmann::json::parse(text);
    CHECK(doc["lj_gradient"] == "literal");
    CHECK(doc["schema_version"] == kConfigSchemaVersion);
  }

  TEST_CASE("relative dataset paths resolve against the config directory") {
    auto dir = hr::test::temp_dir("cfg_csv");
    hr::test::write_file(dir / "d.csv", "0,1,2,3\n1,4,5,6\n2,1,1,1\n3,0,0,0\n");
    hr::test::write_file(dir / "c.json", tiny_config("o", R"("dataset": "d.csv", "blob_dim": 3)"));
    auto cfg = load_config(dir / "c.json");
    CHECK(fs::path(cfg.dataset).is_absolute());
    CHECK(cfg.sim.arch.input_dim == 3);
  }

  TEST_CASE("ablations flip exactly one setting each") {
    auto base = parse_config(tiny_config("o"));
    auto variants = ablation_variants(base);
    REQUIRE(variants.size() == 7);
    const std::vector<std::string> names{"HR",
                                         "HR w/o Latent Exemplars",
                                         "HR w/o KD",
                                         "HR w/o Global Replay",
                                         "HR w RFA",
                                         "HR w Perfect Exemplars",
                                         "HR-mini"};
    const std::vector<std::set<std::string>> changed{{},
                                                     {"latent_exemplars"},
                                                     {"kd"},
                                                     {"global_replay"},
                                                     {"alignment"},
                                                     {"perfect_exemplars"},
                                                     {"memory_budget_floats"}};
    for (std::size_t i = 0; i < variants.size(); ++i) {
      CHECK(variants[i].variant == names[i]);
      auto diff = changed_keys(base, variants[i]);
      diff.erase("variant");
      CHECK(diff == changed[i]);
    }
    CHECK(variants[6].sim.memory_budget_floats == base.sim.memory_budget_floats / 10);
    CHECK(variants[5].sim.replay.raw_exemplars);
  }

  TEST_CASE("variant slugs") {
    CHECK(variant_slug("HR") == "hr");
    CHECK(variant_slug("HR w/o KD") == "hr_wo_kd");
    CHECK(variant_slug("HR w/o Latent Exemplars") == "hr_wo_latent_exemplars");
    CHECK(variant_slug("HR-mini") == "hr_mini");
    CHECK(variant_slug("HR w RFA") == "hr_w_rfa");
    CHECK(variant_slug("???") == "variant");
  }
}

TEST_SUITE("runs and artifacts") {
  TEST_CASE("a run writes its artifacts and the summary agrees with the per-seed logs") {
    auto dir = hr::test::temp_dir("artifacts");
    auto cfg = parse_config(tiny_config(dir.string()));
    auto run = run_variant(cfg, RunOptions{});
    REQUIRE(run.runs.size() == 2);
    write_run_artifacts(dir, run);
    for (const char* name : {"config.json", "run_0.csv", "run_1.csv", "summary.csv", "forgetting.svg", "timing.txt"}) {
      CHECK(fs::exists(dir / name));
    }
    CHECK(config_to_json(parse_config(hr::test::read_file(dir / "config.json"))) == config_to_json(cfg));

    // Per seed: overall accuracy after each task from the long-format log.
    std::map<int, std::vector<double>> per_task;
    for (const char* name : {"run_0.csv", "run_1.csv"}) {
      auto rows = csv_rows(hr::test::read_file(dir / name));
      CHECK(rows.front() == std::vector<std::string>{"kind", "task", "round", "target", "value"});
      for (const auto& r : rows) {
        if (r[0] == "accuracy" && r[3] == "overall") per_task[std::stoi(r[1])].push_back(std::stod(r[4]));
      }
    }
    auto summary = csv_rows(hr::test::read_file(dir / "summary.csv"));
    REQUIRE(summary.size() == 3);
    for (std::size_t i = 1; i < summary.size(); ++i) {
      const int task = std::stoi(summary[i][2]);
      const auto& v = per_task.at(task);
      REQUIRE(v.size() == 2);
      const double mean = (v[0] + v[1]) / 2.0;
      const double sem = std::abs(v[0] - v[1]) / 2.0;
      CHECK(std::stod(summary[i][3]) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(std::stod(summary[i][4]) == doctest::Approx(sem).epsilon(1e-9));
    }
    CHECK(final_accuracy(run).mean == doctest::Approx((per_task.at(2)[0] + per_task.at(2)[1]) / 2.0));
  }

  TEST_CASE("checkpoints re-evaluate to the recorded accuracies") {
    auto dir = hr::test::temp_dir("eval");
    auto cfg = parse_config(tiny_config(dir.string()));
    RunOptions opts;
    opts.checkpoint_dir = dir;
    auto run = run_variant(cfg, opts);
    write_run_artifacts(dir, run);
    auto results = evaluate_checkpoints(dir);
    REQUIRE(results.size() == 2);
    for (std::size_t s = 0; s < results.size(); ++s) {
      CHECK(results[s].seed == run.runs[s].seed);
      const auto& want = run.runs[s].result.accuracy.rows;
      const auto& got = results[s].accuracy.rows;
      REQUIRE(got.size() == want.size());
      for (std::size_t r = 0; r < got.size(); ++r) {
        REQUIRE(got[r].per_task.size() == want[r].per_task.size());
        for (std::size_t t = 0; t < got[r].per_task.size(); ++t) {
          CHECK(std::abs(*got[r].per_task[t] - *want[r].per_task[t]) <= 1e-12);
        }
      }
    }
    CHECK(eval_csv(results).rfind("seed,after_task,target,value\n", 0) == 0);

    // A foreign parameter header is a version error.
    const auto params = dir / "ckpt_0" / "task_1" / "params.hrp";
    const auto saved = hr::test::read_file(params);
    hr::test::write_file(params, "NOTPARAMS\n" + saved.substr(saved.find('\n') + 1));
    CHECK(error_kind([&] { evaluate_checkpoints(dir); }) == ErrorKind::kVersion);
    hr::test::write_file(params, saved);

    // A missing file is an I/O error that names it.
    fs::remove(dir / "ckpt_1" / "task_2" / "centroids.hrc");
    try {
      evaluate_checkpoints(dir);
      FAIL("expected an I/O error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIo);
      CHECK(std::string(e.what()).find("centroids.hrc") != std::string::npos);
    }
    CHECK(error_kind([] { evaluate_checkpoints("/nonexistent/run"); }) == ErrorKind::kIo);
  }

  TEST_CASE("blob centers follow the run seed unless pinned") {
    auto cfg = parse_config(tiny_config("o"));
    CHECK_FALSE(load_dataset(cfg, 0).x == load_dataset(cfg, 1).x);
    cfg.blob_seed = 5;
    CHECK(load_dataset(cfg, 0).x == load_dataset(cfg, 1).x);
  }

  TEST_CASE("the mini budget uses a tenth of the memory") {
    auto cfg = parse_config(tiny_config("o", R"("seeds": [0])"));
    auto variants = ablation_variants(cfg);
    auto full = run_variant(variants[0], RunOptions{});
    auto mini = run_variant(variants[6], RunOptions{});
    CHECK(full.runs[0].result.memory_floats_used <= 40);
    CHECK(mini.runs[0].result.memory_floats_used <= 4);
  }
}

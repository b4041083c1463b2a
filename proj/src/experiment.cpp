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

#include "hr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hr/error.hpp"
#include "hr/text_io.hpp"

namespace hr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string type_name(const json& v) { return v.type_name(); }

[[noreturn]] void bad_field(const std::string& key, const std::string& what) {
  fail(ErrorKind::kConfig, "config field '" + key + "': " + what);
}

long long get_int(const std::string& key, const json& v, long long lo, long long hi) {
  if (!v.is_number_integer()) bad_field(key, "expected an integer, got " + type_name(v));
  const long long x = v.is_number_unsigned() ? static_cast<long long>(v.get<unsigned long long>()) : v.get<long long>();
  if (x < lo || x > hi) bad_field(key, "value " + std::to_string(x) + " is outside [" + std::to_string(lo) + ", " +
                                           std::to_string(hi) + "]");
  return x;
}

std::uint64_t get_u64(const std::string& key, const json& v) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
    bad_field(key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_double(const std::string& key, const json& v) {
  if (!v.is_number()) bad_field(key, "expected a number, got " + type_name(v));
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad_field(key, "must be finite");
  return x;
}

bool get_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_field(key, "expected true or false, got " + type_name(v));
  return v.get<bool>();
}

std::string get_string(const std::string& key, const json& v) {
  if (!v.is_string()) bad_field(key, "expected a string, got " + type_name(v));
  return v.get<std::string>();
}

constexpr long long kMaxCount = 1'000'000;

using Setter = std::function<void(ExperimentConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["schema_version"] = [](ExperimentConfig&, const json&) {};
    t["variant"] = [](ExperimentConfig& c, const json& v) { c.variant = get_string("variant", v); };
    t["seeds"] = [](ExperimentConfig& c, const json& v) {
      if (!v.is_array()) bad_field("seeds", "expected an array of non-negative integers");
      c.seeds.clear();
      for (const auto& s : v) c.seeds.push_back(get_u64("seeds", s));
    };
    t["output_dir"] = [](ExperimentConfig& c, const json& v) { c.output_dir = get_string("output_dir", v); };
    t["dataset"] = [](ExperimentConfig& c, const json& v) { c.dataset = get_string("dataset", v); };
    t["blob_classes"] = [](ExperimentConfig& c, const json& v) {
      c.blobs.classes = static_cast<int>(get_int("blob_classes", v, 1, kMaxCount));
    };
    t["blob_samples_per_class"] = [](ExperimentConfig& c, const json& v) {
      c.blobs.samples_per_class = static_cast<int>(get_int("blob_samples_per_class", v, 1, kMaxCount));
    };
    t["blob_dim"] = [](ExperimentConfig& c, const json& v) {
      c.blobs.dim = static_cast<std::size_t>(get_int("blob_dim", v, 2, 4096));
    };
    t["blob_cluster_std"] = [](ExperimentConfig& c, const json& v) {
      c.blobs.cluster_std = get_double("blob_cluster_std", v);
    };
    t["blob_separation"] = [](ExperimentConfig& c, const json& v) {
      c.blobs.separation = get_double("blob_separation", v);
    };
    t["blob_seed"] = [](ExperimentConfig& c, const json& v) {
      if (v.is_null()) {
        c.blob_seed.reset();
      } else {
        c.blob_seed = get_u64("blob_seed", v);
      }
    };
    t["normalize"] = [](ExperimentConfig& c, const json& v) { c.normalize = get_bool("normalize", v); };
    t["alpha"] = [](ExperimentConfig& c, const json& v) { c.alpha = get_double("alpha", v); };
    t["holdout_fraction"] = [](ExperimentConfig& c, const json& v) {
      c.holdout_fraction = get_double("holdout_fraction", v);
    };
    t["tasks"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.tasks = static_cast<int>(get_int("tasks", v, 1, kMaxCount));
    };
    t["classes_per_task"] = [](ExperimentConfig& c, const json& v) {
      c.sim.classes_per_task = static_cast<int>(get_int("classes_per_task", v, 1, kMaxCount));
    };
    t["clients"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.clients = static_cast<int>(get_int("clients", v, 1, kMaxCount));
    };
    t["clients_per_round"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.per_round = static_cast<int>(get_int("clients_per_round", v, 1, kMaxCount));
    };
    t["rounds"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.rounds = static_cast<int>(get_int("rounds", v, 1, kMaxCount));
    };
    t["epochs"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.epochs = static_cast<int>(get_int("epochs", v, 1, kMaxCount));
    };
    t["batch_size"] = [](ExperimentConfig& c, const json& v) {
      c.sim.round.batch_size = static_cast<std::size_t>(get_int("batch_size", v, 1, kMaxCount));
    };
    t["lr"] = [](ExperimentConfig& c, const json& v) { c.sim.round.lr = get_double("lr", v); };
    t["grad_clip"] = [](ExperimentConfig& c, const json& v) { c.sim.round.grad_clip = get_double("grad_clip", v); };
    t["latent_dim"] = [](ExperimentConfig& c, const json& v) {
      c.sim.arch.latent_dim = static_cast<std::size_t>(get_int("latent_dim", v, 1, 4096));
    };
    t["hidden"] = [](ExperimentConfig& c, const json& v) {
      if (!v.is_array()) bad_field("hidden", "expected an array of layer widths");
      std::vector<std::size_t> widths;
      for (const auto& w : v) widths.push_back(static_cast<std::size_t>(get_int("hidden", w, 1, 4096)));
      c.sim.arch.encoder_hidden = widths;
      c.sim.arch.decoder_hidden = widths;
    };
    t["activation"] = [](ExperimentConfig& c, const json& v) {
      const auto s = get_string("activation", v);
      if (s == "tanh") {
        c.sim.arch.activation = LayerKind::kTanh;
      } else if (s == "relu") {
        c.sim.arch.activation = LayerKind::kRelu;
      } else {
        bad_field("activation", "expected \"tanh\" or \"relu\", got \"" + s + "\"");
      }
    };
    t["lambda"] = [](ExperimentConfig& c, const json& v) { c.sim.loss.lambda = get_double("lambda", v); };
    t["kd_weight"] = [](ExperimentConfig& c, const json& v) { c.sim.loss.kd_weight = get_double("kd_weight", v); };
    t["noise_sigma"] = [](ExperimentConfig& c, const json& v) {
      c.sim.replay.noise_sigma = get_double("noise_sigma", v);
    };
    t["replay_samples_per_class"] = [](ExperimentConfig& c, const json& v) {
      c.sim.replay.samples_per_class = static_cast<std::size_t>(get_int("replay_samples_per_class", v, 0, kMaxCount));
    };
    t["memory_budget_floats"] = [](ExperimentConfig& c, const json& v) {
      c.sim.memory_budget_floats = static_cast<std::size_t>(get_int("memory_budget_floats", v, 0, 1'000'000'000));
    };
    t["alignment"] = [](ExperimentConfig& c, const json& v) {
      const auto s = get_string("alignment", v);
      if (s == "lj") {
        c.sim.alignment.method = AlignmentMethod::kLennardJones;
      } else if (s == "rfa") {
        c.sim.alignment.method = AlignmentMethod::kRepulsive;
      } else {
        bad_field("alignment", "expected \"lj\" or \"rfa\", got \"" + s + "\"");
      }
    };
    t["rfa_strength"] = [](ExperimentConfig& c, const json& v) {
      c.sim.alignment.rfa_strength = get_double("rfa_strength", v);
    };
    t["lj_epsilon"] = [](ExperimentConfig& c, const json& v) { c.sim.alignment.lj.epsilon = get_double("lj_epsilon", v); };
    t["lj_sigma"] = [](ExperimentConfig& c, const json& v) { c.sim.alignment.lj.sigma = get_double("lj_sigma", v); };
    t["lj_eta"] = [](ExperimentConfig& c, const json& v) { c.sim.alignment.lj.eta = get_double("lj_eta", v); };
    t["lj_max_iters"] = [](ExperimentConfig& c, const json& v) {
      c.sim.alignment.lj.max_iters = static_cast<int>(get_int("lj_max_iters", v, 1, kMaxCount));
    };
    t["lj_min_step"] = [](ExperimentConfig& c, const json& v) {
      c.sim.alignment.lj.min_step = get_double("lj_min_step", v);
    };
    t["lj_max_step_sigma"] = [](ExperimentConfig& c, const json& v) {
      c.sim.alignment.lj.max_step_sigma = get_double("lj_max_step_sigma", v);
    };
    t["lj_gradient"] = [](ExperimentConfig& c, const json& v) {
      const auto s = get_string("lj_gradient", v);
      if (s == "analytic") {
        c.sim.alignment.lj.gradient_source = GradientSource::kAnalytic;
      } else if (s == "literal") {
        c.sim.alignment.lj.gradient_source = GradientSource::kLiteral;
      } else {
        bad_field("lj_gradient", "expected \"analytic\" or \"literal\", got \"" + s + "\"");
      }
    };
    t["latent_exemplars"] = [](ExperimentConfig& c, const json& v) {
      c.sim.latent_exemplars = get_bool("latent_exemplars", v);
    };
    t["global_replay"] = [](ExperimentConfig& c, const json& v) {
      c.sim.replay.global_replay = get_bool("global_replay", v);
    };
    t["kd"] = [](ExperimentConfig& c, const json& v) { c.sim.kd = get_bool("kd", v); };
    t["perfect_exemplars"] = [](ExperimentConfig& c, const json& v) {
      c.sim.perfect_exemplars = get_bool("perfect_exemplars", v);
      c.sim.replay.raw_exemplars = c.sim.perfect_exemplars;
    };
    return t;
  }();
  return table;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "missing or unreadable file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kIo, "checkpoint depends on missing file '" + path.string() + "'");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read '" + path.string() + "'");
  return in;
}

std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); }

// Mean forgetting of the first `rows` evaluation points.
double prefix_forgetting(const AccuracyMatrix& m, std::size_t rows) {
  AccuracyMatrix prefix;
  prefix.rows.assign(m.rows.begin(), m.rows.begin() + static_cast<std::ptrdiff_t>(rows));
  return forgetting(prefix).mean;
}

void write_checkpoint(const fs::path& dir, const ServerState& state, std::span<const ClientState> clients) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "params.hrp");
    write_params(out, state.global.params);
  }
  {
    std::ofstream out(dir / "centroids.hrc");
    write_centroids(out, state.centroids);
  }
  for (const auto& c : clients) {
    std::ofstream out(dir / ("memory_" + std::to_string(c.id) + ".hrm"));
    write_store(out, c.store);
  }
}

std::optional<long long> numeric_suffix(const std::string& name, const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0) return std::nullopt;
  return parse_int(std::string_view(name).substr(prefix.size()));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) fail(ErrorKind::kConfig, "config field 'seeds': at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail(ErrorKind::kConfig, "config field 'seeds': seeds must be distinct");
  }
  if (variant.empty()) fail(ErrorKind::kConfig, "config field 'variant': must not be empty");
  if (!(alpha > 0.0)) fail(ErrorKind::kConfig, "config field 'alpha': must be positive");
  if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0)) {
    fail(ErrorKind::kConfig, "config field 'holdout_fraction': must lie in (0, 1)");
  }
  if (dataset == "blobs") {
    blobs.validate();
    const long long needed = static_cast<long long>(sim.round.tasks) * sim.classes_per_task;
    if (needed > blobs.classes) {
      fail(ErrorKind::kConfig, "tasks x classes_per_task = " + std::to_string(needed) + " exceeds blob_classes = " +
                                   std::to_string(blobs.classes));
    }
    if (sim.arch.input_dim != blobs.dim) fail(ErrorKind::kConfig, "input width must equal blob_dim");
  } else if (dataset.empty()) {
    fail(ErrorKind::kConfig, "config field 'dataset': expected \"blobs\" or a CSV path");
  }
  sim.validate();
}

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kConfig, "config must be a JSON object");
  if (!doc.contains("schema_version")) fail(ErrorKind::kConfig, "config field 'schema_version' is required");
  const auto version = get_int("schema_version", doc["schema_version"], 0, kMaxCount);
  if (version != kConfigSchemaVersion) {
    fail(ErrorKind::kVersion, "config schema_version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kConfigSchemaVersion) + ")");
  }
  ExperimentConfig cfg;
  const auto& table = setters();
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) fail(ErrorKind::kConfig, "unknown config field '" + key + "'");
    it->second(cfg, value);
  }
  if (cfg.dataset == "blobs") {
    cfg.sim.arch.input_dim = cfg.blobs.dim;
  } else {
    fs::path p(cfg.dataset);
    if (p.is_relative()) p = base_dir / p;
    cfg.dataset = fs::absolute(p).lexically_normal().string();
    cfg.sim.arch.input_dim = load_dataset(cfg, 0).dim;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kConfig, "config file '" + path.string() + "' does not exist");
  return parse_config(read_text(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["variant"] = c.variant;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["dataset"] = c.dataset;
  j["blob_classes"] = c.blobs.classes;
  j["blob_samples_per_class"] = c.blobs.samples_per_class;
  j["blob_dim"] = c.blobs.dim;
  j["blob_cluster_std"] = c.blobs.cluster_std;
  j["blob_separation"] = c.blobs.separation;
  j["blob_seed"] = c.blob_seed ? json(*c.blob_seed) : json(nullptr);
  j["normalize"] = c.normalize;
  j["alpha"] = c.alpha;
  j["holdout_fraction"] = c.holdout_fraction;
  j["tasks"] = c.sim.round.tasks;
  j["classes_per_task"] = c.sim.classes_per_task;
  j["clients"] = c.sim.round.clients;
  j["clients_per_round"] = c.sim.round.per_round;
  j["rounds"] = c.sim.round.rounds;
  j["epochs"] = c.sim.round.epochs;
  j["batch_size"] = c.sim.round.batch_size;
  j["lr"] = c.sim.round.lr;
  j["grad_clip"] = c.sim.round.grad_clip;
  j["latent_dim"] = c.sim.arch.latent_dim;
  j["hidden"] = c.sim.arch.encoder_hidden;
  j["activation"] = c.sim.arch.activation == LayerKind::kRelu ? "relu" : "tanh";
  j["lambda"] = c.sim.loss.lambda;
  j["kd_weight"] = c.sim.loss.kd_weight;
  j["noise_sigma"] = c.sim.replay.noise_sigma;
  j["replay_samples_per_class"] = c.sim.replay.samples_per_class;
  j["memory_budget_floats"] = c.sim.memory_budget_floats;
  j["alignment"] = c.sim.alignment.method == AlignmentMethod::kRepulsive ? "rfa" : "lj";
  j["rfa_strength"] = c.sim.alignment.rfa_strength;
  j["lj_epsilon"] = c.sim.alignment.lj.epsilon;
  j["lj_sigma"] = c.sim.alignment.lj.sigma;
  j["lj_eta"] = c.sim.alignment.lj.eta;
  j["lj_max_iters"] = c.sim.alignment.lj.max_iters;
  j["lj_min_step"] = c.sim.alignment.lj.min_step;
  j["lj_max_step_sigma"] = c.sim.alignment.lj.max_step_sigma;
  j["lj_gradient"] = c.sim.alignment.lj.gradient_source == GradientSource::kLiteral ? "literal" : "analytic";
  j["latent_exemplars"] = c.sim.latent_exemplars;
  j["global_replay"] = c.sim.replay.global_replay;
  j["kd"] = c.sim.kd;
  j["perfect_exemplars"] = c.sim.perfect_exemplars;
  return j.dump(2) + "\n";
}

std::vector<ExperimentConfig> ablation_variants(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  auto add = [&](const std::string& name, const std::function<void(ExperimentConfig&)>& edit) {
    ExperimentConfig c = base;
    c.variant = name;
    edit(c);
    out.push_back(std::move(c));
  };
  add(base.variant, [](ExperimentConfig&) {});
  add("HR w/o Latent Exemplars", [](ExperimentConfig& c) { c.sim.latent_exemplars = false; });
  add("HR w/o KD", [](ExperimentConfig& c) { c.sim.kd = false; });
  add("HR w/o Global Replay", [](ExperimentConfig& c) { c.sim.replay.global_replay = false; });
  add("HR w RFA", [](ExperimentConfig& c) { c.sim.alignment.method = AlignmentMethod::kRepulsive; });
  add("HR w Perfect Exemplars", [](ExperimentConfig& c) {
    c.sim.perfect_exemplars = true;
    c.sim.replay.raw_exemplars = true;
  });
  add("HR-mini", [](ExperimentConfig& c) { c.sim.memory_budget_floats /= 10; });
  for (const auto& c : out) c.validate();
  return out;
}

Dataset load_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  Dataset data;
  if (cfg.dataset == "blobs") {
    BlobSpec spec = cfg.blobs;
    spec.seed = cfg.blob_seed.value_or(seed);
    data = generate_blobs(spec);
  } else {
    data = load_csv_dataset(cfg.dataset);
  }
  if (cfg.normalize) normalize_features(data);
  return data;
}

TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
  StreamConfig sc;
  sc.tasks = cfg.sim.round.tasks;
  sc.classes_per_task = cfg.sim.classes_per_task;
  sc.clients = cfg.sim.round.clients;
  sc.alpha = cfg.alpha;
  sc.holdout_fraction = cfg.holdout_fraction;
  sc.seed = seed;
  return build_task_stream(load_dataset(cfg, seed), sc);
}

VariantRun run_variant(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  VariantRun out;
  out.config = cfg;
  const auto start = std::chrono::steady_clock::now();
  for (auto seed : cfg.seeds) {
    auto stream = build_stream(cfg, seed);
    SimulationConfig sim = cfg.sim;
    sim.round.seed = seed;
    sim.arch.input_dim = stream.feature_dim;
    sim.threads = options.threads;
    TaskObserver observer;
    if (options.checkpoint_dir) {
      const fs::path base = *options.checkpoint_dir / ("ckpt_" + std::to_string(seed));
      observer = [base](int task, const ServerState& state, std::span<const ClientState> clients) {
        write_checkpoint(base / ("task_" + std::to_string(task)), state, clients);
      };
    }
    out.runs.push_back({seed, run_experiment(sim, stream, observer)});
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MeanSem final_accuracy(const VariantRun& run) {
  std::vector<double> v;
  for (const auto& r : run.runs) v.push_back(r.result.accuracy.rows.back().overall.value_or(0.0));
  return mean_sem(v);
}

MeanSem mean_forgetting(const VariantRun& run) {
  std::vector<double> v;
  for (const auto& r : run.runs) v.push_back(r.result.forgetting.mean);
  return mean_sem(v);
}

double mean_inter_client(const VariantRun& run) {
  std::vector<double> v;
  for (const auto& r : run.runs) v.push_back(r.result.confusion.inter_client);
  return mean_sem(v).mean;
}

double mean_intra_client(const VariantRun& run) {
  std::vector<double> v;
  for (const auto& r : run.runs) v.push_back(r.result.confusion.intra_client);
  return mean_sem(v).mean;
}

std::string run_csv(const SeedRun& run) {
  std::ostringstream out;
  const auto& res = run.result;
  out << "kind,task,round,target,value\n";
  auto row = [&](const char* kind, int task, int round, const std::string& target, const std::string& value) {
    out << kind << ',' << task << ',' << round << ',' << target << ',' << value << '\n';
  };
  for (const auto& t : res.tasks) {
    for (int c : t.cohort) row("cohort", t.task, 0, "client", std::to_string(c));
    row("alignment", t.task, 0, "initial_energy", format_double(t.alignment.initial_energy));
    row("alignment", t.task, 0, "final_energy", format_double(t.alignment.final_energy));
    row("alignment", t.task, 0, "iterations", std::to_string(t.alignment.iterations));
    row("alignment", t.task, 0, "converged", t.alignment.converged ? "1" : "0");
    row("alignment", t.task, 0, "warning", t.alignment.non_decrease_warning ? "1" : "0");
  }
  for (const auto& r : res.rounds) {
    row("loss", r.task, r.round, "recon", format_double(r.loss.recon));
    row("loss", r.task, r.round, "kl", format_double(r.loss.kl));
    row("loss", r.task, r.round, "cluster", format_double(r.loss.cluster));
    row("loss", r.task, r.round, "encoder_kd", format_double(r.loss.encoder_kd));
    row("loss", r.task, r.round, "decoder_kd", format_double(r.loss.decoder_kd));
    row("loss", r.task, r.round, "total", format_double(r.loss.total));
    row("loss", r.task, r.round, "batches", std::to_string(r.batches));
  }
  for (const auto& a : res.accuracy.rows) {
    for (std::size_t t = 0; t < a.per_task.size(); ++t) {
      row("accuracy", a.after_task, 0, "task_" + std::to_string(t + 1), fmt(a.per_task[t]));
    }
    row("accuracy", a.after_task, 0, "overall", fmt(a.overall));
  }
  for (std::size_t t = 0; t < res.forgetting.per_task.size(); ++t) {
    row("forgetting", static_cast<int>(t + 1), 0, "forgetting", format_double(res.forgetting.per_task[t]));
  }
  row("forgetting", 0, 0, "mean", format_double(res.forgetting.mean));
  row("forgetting", 0, 0, "negative_flag", res.forgetting.negative_flag ? "1" : "0");
  row("confusion", 0, 0, "within_task", format_double(res.confusion.within_task));
  row("confusion", 0, 0, "intra_client", format_double(res.confusion.intra_client));
  row("confusion", 0, 0, "inter_client", format_double(res.confusion.inter_client));
  row("confusion", 0, 0, "total", format_double(res.confusion.total));
  row("memory", 0, 0, "floats_used", std::to_string(res.memory_floats_used));
  return out.str();
}

void write_summary_csv(const fs::path& path, std::span<const VariantRun> runs) {
  std::ostringstream out;
  out << "variant,seed_count,task,acc_mean,acc_sem,forgetting_mean\n";
  for (const auto& v : runs) {
    std::vector<AccuracyMatrix> mats;
    for (const auto& r : v.runs) mats.push_back(r.result.accuracy);
    auto agg = aggregate_seeds(mats);
    for (std::size_t h = 0; h < agg.overall_mean.size(); ++h) {
      std::vector<double> f;
      for (const auto& m : mats) f.push_back(prefix_forgetting(m, h + 1));
      out << '"' << v.config.variant << "\"," << v.runs.size() << ',' << h + 1 << ','
          << format_double(agg.overall_mean[h]) << ',' << (agg.overall_sem[h] ? format_double(*agg.overall_sem[h]) : "")
          << ',' << format_double(mean_sem(f).mean) << '\n';
    }
  }
  write_text(path, out.str());
}

void write_ablation_csv(const fs::path& path, std::span<const VariantRun> runs) {
  std::ostringstream out;
  out << "variant,seed_count,final_acc_mean,final_acc_sem,forgetting_mean,inter_client_mean,intra_client_mean,"
         "memory_budget_floats,memory_floats_used\n";
  for (const auto& v : runs) {
    auto acc = final_accuracy(v);
    std::size_t used = 0;
    for (const auto& r : v.runs) used = std::max(used, r.result.memory_floats_used);
    out << '"' << v.config.variant << "\"," << v.runs.size() << ',' << format_double(acc.mean) << ','
        << (acc.sem ? format_double(*acc.sem) : "") << ',' << format_double(mean_forgetting(v).mean) << ','
        << format_double(mean_inter_client(v)) << ',' << format_double(mean_intra_client(v)) << ','
        << v.config.sim.memory_budget_floats << ',' << used << '\n';
  }
  write_text(path, out.str());
}

void write_forgetting_svg(const fs::path& path, std::span<const VariantRun> runs) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  const double w = 640, h = 400, left = 60, right = 200, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  std::size_t tasks = 1;
  for (const auto& v : runs) tasks = std::max<std::size_t>(tasks, static_cast<std::size_t>(v.config.sim.round.tasks));
  auto x_of = [&](std::size_t task) {
    return tasks == 1 ? left + pw / 2 : left + pw * static_cast<double>(task - 1) / static_cast<double>(tasks - 1);
  };
  auto y_of = [&](double acc) { return top + ph * (1.0 - acc); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double acc = i / 5.0;
    s << "<line x1=\"" << left - 4 << "\" y1=\"" << y_of(acc) << "\" x2=\"" << left << "\" y2=\"" << y_of(acc)
      << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << y_of(acc) + 4 << "\" text-anchor=\"end\">"
      << format_double(acc) << "</text>\n";
  }
  for (std::size_t t = 1; t <= tasks; ++t) {
    s << "<line x1=\"" << x_of(t) << "\" y1=\"" << top + ph << "\" x2=\"" << x_of(t) << "\" y2=\"" << top + ph + 4
      << "\" stroke=\"black\"/><text x=\"" << x_of(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << t << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">task</text>\n";
  s << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
    << ")\" text-anchor=\"middle\">accuracy on seen classes</text>\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& v = runs[i];
    std::vector<AccuracyMatrix> mats;
    for (const auto& r : v.runs) mats.push_back(r.result.accuracy);
    auto agg = aggregate_seeds(mats);
    const char* color = kColors[i % std::size(kColors)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t t = 0; t < agg.overall_mean.size(); ++t) {
      s << (t ? " " : "") << x_of(t + 1) << ',' << y_of(agg.overall_mean[t]);
    }
    s << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(i);
    s << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 35 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4
      << "\">";
    for (char ch : v.config.variant) {
      if (ch == '<') {
        s << "&lt;";
      } else if (ch == '&') {
        s << "&amp;";
      } else {
        s << ch;
      }
    }
    s << "</text>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

void write_run_artifacts(const fs::path& dir, const VariantRun& run) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config_to_json(run.config));
  for (const auto& r : run.runs) write_text(dir / ("run_" + std::to_string(r.seed) + ".csv"), run_csv(r));
  write_summary_csv(dir / "summary.csv", std::span<const VariantRun>(&run, 1));
  write_forgetting_svg(dir / "forgetting.svg", std::span<const VariantRun>(&run, 1));
  std::ostringstream timing;
  timing << "variant,wall_seconds\n\"" << run.config.variant << "\"," << run.wall_seconds << '\n';
  write_text(dir / "timing.txt", timing.str());
}

std::vector<EvalResult> evaluate_checkpoints(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "'" + dir.string() + "' is not a directory");
  const fs::path cfg_path = dir / "config.json";
  if (!fs::exists(cfg_path)) fail(ErrorKind::kIo, "checkpoint directory lacks '" + cfg_path.string() + "'");
  const ExperimentConfig cfg = parse_config(read_text(cfg_path), dir);

  std::vector<std::pair<std::uint64_t, fs::path>> seeds;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_directory()) continue;
    if (auto s = numeric_suffix(e.path().filename().string(), "ckpt_"); s && *s >= 0) {
      seeds.emplace_back(static_cast<std::uint64_t>(*s), e.path());
    }
  }
  if (seeds.empty()) fail(ErrorKind::kIo, "no ckpt_<seed> directories under '" + dir.string() + "'");
  std::sort(seeds.begin(), seeds.end());

  std::vector<EvalResult> results;
  for (const auto& [seed, sdir] : seeds) {
    auto stream = build_stream(cfg, seed);
    Architecture arch = cfg.sim.arch;
    arch.input_dim = stream.feature_dim;
    Rng rng(0);
    const AutoencoderModel shape = AutoencoderModel::create(arch, rng);
    EvalResult er;
    er.seed = seed;
    std::vector<Dataset> eval_sets;
    for (const auto& task : stream.tasks) {
      const fs::path tdir = sdir / ("task_" + std::to_string(task.index));
      if (!fs::is_directory(tdir)) fail(ErrorKind::kIo, "missing checkpoint directory '" + tdir.string() + "'");
      auto pin = open_checkpoint(tdir / "params.hrp");
      auto model = AutoencoderModel::assemble(shape.encoder, shape.decoder, read_params(pin));
      auto cin = open_checkpoint(tdir / "centroids.hrc");
      auto centroids = read_centroids(cin);
      for (int c = 0; c < cfg.sim.round.clients; ++c) {
        auto min = open_checkpoint(tdir / ("memory_" + std::to_string(c) + ".hrm"));
        (void)read_store(min);
      }
      eval_sets.push_back(task.eval);
      er.accuracy.rows.push_back(evaluate(model, centroids, eval_sets, task.index));
    }
    results.push_back(std::move(er));
  }
  return results;
}

std::string eval_csv(std::span<const EvalResult> results) {
  std::ostringstream out;
  out << "seed,after_task,target,value\n";
  for (const auto& r : results) {
    for (const auto& row : r.accuracy.rows) {
      for (std::size_t t = 0; t < row.per_task.size(); ++t) {
        out << r.seed << ',' << row.after_task << ",task_" << t + 1 << ',' << fmt(row.per_task[t]) << '\n';
      }
      out << r.seed << ',' << row.after_task << ",overall," << fmt(row.overall) << '\n';
    }
  }
  return out.str();
}

std::string variant_slug(std::string_view variant) {
  std::string out;
  bool sep = false;
  for (char ch : variant) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      if (sep && !out.empty()) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      sep = false;
    } else if (ch != '/') {
      sep = true;
    }
  }
  return out.empty() ? "variant" : out;
}

}  // namespace hr

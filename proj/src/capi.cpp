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

#include "hr/hr.h"

#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hr/error.hpp"
#include "hr/experiment.hpp"
#include "hr/text_io.hpp"

struct hr_config {
  hr::ExperimentConfig cfg;
  std::string json;
};

struct hr_report {
  std::vector<hr::VariantRun> variants;
  std::string text;
};

struct hr_model {
  hr::AutoencoderModel model;
  hr::CentroidTable centroids;
};

namespace {

thread_local std::string g_last_error;

hr_status status_of(hr::ErrorKind kind) {
  switch (kind) {
    case hr::ErrorKind::kUsage: return HR_ERR_USAGE;
    case hr::ErrorKind::kConfig: return HR_ERR_CONFIG;
    case hr::ErrorKind::kData: return HR_ERR_DATA;
    case hr::ErrorKind::kProtocol: return HR_ERR_PROTOCOL;
    case hr::ErrorKind::kDivergence: return HR_ERR_DIVERGENCE;
    case hr::ErrorKind::kDegenerate: return HR_ERR_DEGENERATE;
    case hr::ErrorKind::kIo: return HR_ERR_IO;
    case hr::ErrorKind::kVersion: return HR_ERR_VERSION;
  }
  return HR_ERR_INTERNAL;
}

template <class F>
hr_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return HR_OK;
  } catch (const hr::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return HR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error";
    return HR_ERR_INTERNAL;
  }
}

hr_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return HR_ERR_USAGE;
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

std::string summary_text(const std::vector<hr::VariantRun>& runs) {
  std::ostringstream s;
  for (const auto& v : runs) {
    auto acc = hr::final_accuracy(v);
    auto f = hr::mean_forgetting(v);
    s << v.config.variant << ": final accuracy " << pct(acc.mean);
    if (acc.sem) s << " +/- " << pct(*acc.sem);
    s << ", forgetting " << pct(f.mean) << ", inter-client " << hr::format_double(hr::mean_inter_client(v))
      << ", intra-client " << hr::format_double(hr::mean_intra_client(v)) << " (" << v.runs.size() << " seeds)\n";
  }
  return s.str();
}

}  // namespace

extern "C" {

const char* hr_version(void) { return "1.0.0"; }
int hr_abi_version(void) { return HR_ABI_VERSION; }
const char* hr_last_error(void) { return g_last_error.c_str(); }

const char* hr_status_name(hr_status status) {
  switch (status) {
    case HR_OK: return "ok";
    case HR_ERR_USAGE: return "usage";
    case HR_ERR_CONFIG: return "config";
    case HR_ERR_DATA: return "data";
    case HR_ERR_PROTOCOL: return "protocol";
    case HR_ERR_DIVERGENCE: return "divergence";
    case HR_ERR_DEGENERATE: return "degenerate";
    case HR_ERR_IO: return "io";
    case HR_ERR_VERSION: return "version";
    case HR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

hr_status hr_config_load(const char* path, hr_config_t** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto cfg = hr::load_config(path);
    *out = new hr_config{cfg, hr::config_to_json(cfg)};
  });
}

hr_status hr_config_parse(const char* json_text, hr_config_t** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto cfg = hr::parse_config(json_text);
    *out = new hr_config{cfg, hr::config_to_json(cfg)};
  });
}

void hr_config_free(hr_config_t* config) { delete config; }

hr_status hr_config_set_seeds(hr_config_t* config, const uint64_t* seeds, size_t count) {
  if (!config) return null_arg("config");
  if (!seeds && count > 0) return null_arg("seeds");
  return guarded([&] {
    hr::ExperimentConfig next = config->cfg;
    next.seeds.assign(seeds, seeds + count);
    next.validate();
    config->cfg = std::move(next);
    config->json = hr::config_to_json(config->cfg);
  });
}

hr_status hr_config_set_output_dir(hr_config_t* config, const char* dir) {
  if (!config) return null_arg("config");
  if (!dir) return null_arg("dir");
  return guarded([&] {
    config->cfg.output_dir = dir;
    config->json = hr::config_to_json(config->cfg);
  });
}

const char* hr_config_output_dir(const hr_config_t* config) {
  return config ? config->cfg.output_dir.c_str() : "";
}

const char* hr_config_json(const hr_config_t* config) { return config ? config->json.c_str() : ""; }

hr_status hr_run(const hr_config_t* config, int threads, hr_report_t** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const std::filesystem::path dir = config->cfg.output_dir;
    hr::RunOptions opts;
    opts.threads = threads;
    opts.checkpoint_dir = dir;
    auto run = hr::run_variant(config->cfg, opts);
    hr::write_run_artifacts(dir, run);
    auto* rep = new hr_report;
    rep->variants.push_back(std::move(run));
    rep->text = summary_text(rep->variants);
    *out = rep;
  });
}

hr_status hr_ablate(const hr_config_t* config, int threads, hr_report_t** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const std::filesystem::path dir = config->cfg.output_dir;
    auto variants = hr::ablation_variants(config->cfg);
    std::vector<hr::VariantRun> runs;
    for (const auto& v : variants) {
      hr::RunOptions opts;
      opts.threads = threads;
      const auto vdir = dir / hr::variant_slug(v.variant);
      opts.checkpoint_dir = vdir;
      runs.push_back(hr::run_variant(v, opts));
      hr::write_run_artifacts(vdir, runs.back());
    }
    std::filesystem::create_directories(dir);
    hr::write_ablation_csv(dir / "ablation.csv", runs);
    hr::write_summary_csv(dir / "summary.csv", runs);
    hr::write_forgetting_svg(dir / "forgetting.svg", runs);
    std::ostringstream timing;
    timing << "variant,wall_seconds\n";
    for (const auto& r : runs) timing << '"' << r.config.variant << "\"," << r.wall_seconds << '\n';
    std::ofstream(dir / "timing.txt") << timing.str();
    auto* rep = new hr_report;
    rep->variants = std::move(runs);
    rep->text = summary_text(rep->variants);
    *out = rep;
  });
}

hr_status hr_eval(const char* dir, hr_report_t** out) {
  if (!dir) return null_arg("dir");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto results = hr::evaluate_checkpoints(dir);
    auto* rep = new hr_report;
    rep->text = hr::eval_csv(results);
    *out = rep;
  });
}

void hr_report_free(hr_report_t* report) { delete report; }

const char* hr_report_text(const hr_report_t* report) { return report ? report->text.c_str() : ""; }

size_t hr_report_variant_count(const hr_report_t* report) { return report ? report->variants.size() : 0; }

const char* hr_report_variant_name(const hr_report_t* report, size_t index) {
  if (!report || index >= report->variants.size()) return nullptr;
  return report->variants[index].config.variant.c_str();
}

hr_status hr_report_final_accuracy(const hr_report_t* report, size_t index, double* mean) {
  if (!report) return null_arg("report");
  if (!mean) return null_arg("mean");
  if (index >= report->variants.size()) {
    g_last_error = "variant index out of range";
    return HR_ERR_USAGE;
  }
  *mean = hr::final_accuracy(report->variants[index]).mean;
  g_last_error.clear();
  return HR_OK;
}

hr_status hr_model_load(const char* config_path, const char* task_dir, hr_model_t** out) {
  if (!config_path) return null_arg("config_path");
  if (!task_dir) return null_arg("task_dir");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto cfg = hr::load_config(config_path);
    const std::filesystem::path dir = task_dir;
    hr::Rng rng(0);
    auto shape = hr::AutoencoderModel::create(cfg.sim.arch, rng);
    std::ifstream pin(dir / "params.hrp");
    if (!pin) hr::fail(hr::ErrorKind::kIo, "missing '" + (dir / "params.hrp").string() + "'");
    auto model = hr::AutoencoderModel::assemble(shape.encoder, shape.decoder, hr::read_params(pin));
    std::ifstream cin(dir / "centroids.hrc");
    if (!cin) hr::fail(hr::ErrorKind::kIo, "missing '" + (dir / "centroids.hrc").string() + "'");
    auto centroids = hr::read_centroids(cin);
    *out = new hr_model{std::move(model), std::move(centroids)};
  });
}

void hr_model_free(hr_model_t* model) { delete model; }

size_t hr_model_input_dim(const hr_model_t* model) { return model ? model->model.input_dim : 0; }

hr_status hr_model_classify(const hr_model_t* model, const double* x, size_t n, int* label) {
  if (!model) return null_arg("model");
  if (!x) return null_arg("x");
  if (!label) return null_arg("label");
  return guarded([&] {
    if (n != model->model.input_dim) {
      hr::fail(hr::ErrorKind::kUsage, "expected " + std::to_string(model->model.input_dim) + " values, got " +
                                          std::to_string(n));
    }
    *label = hr::classify(model->model, model->centroids, std::span<const double>(x, n)).key.cls;
  });
}

}  // extern "C"

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

// Command-line driver. Talks to the simulator only through the C API.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hr/hr.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int exit_code(hr_status s) {
  switch (s) {
    case HR_OK: return kExitOk;
    case HR_ERR_USAGE:
    case HR_ERR_CONFIG:
    case HR_ERR_VERSION: return kExitConfig;
    case HR_ERR_PROTOCOL:
    case HR_ERR_DIVERGENCE:
    case HR_ERR_DEGENERATE: return kExitRuntime;
    default: return kExitFailure;
  }
}

int report_failure(hr_status s) {
  std::cerr << "hr: " << hr_status_name(s) << " error: " << hr_last_error() << '\n';
  return exit_code(s);
}

// HR_THREADS caps worker threads; 0 means serial. Unset uses the hardware count.
bool thread_cap(int& threads) {
  const char* env = std::getenv("HR_THREADS");
  if (env == nullptr || *env == '\0') {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    return true;
  }
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(env, &end, 10);
  if (errno != 0 || *end != '\0' || v < 0 || v > 4096) return false;
  threads = static_cast<int>(v);
  return true;
}

bool parse_seeds(const std::string& text, std::vector<uint64_t>& seeds) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) return false;
    errno = 0;
    const unsigned long long v = std::strtoull(item.c_str(), nullptr, 10);
    if (errno != 0) return false;
    seeds.push_back(v);
  }
  return !seeds.empty();
}

int load(const std::string& path, hr_config_t** cfg) {
  const hr_status s = hr_config_load(path.c_str(), cfg);
  return s == HR_OK ? kExitOk : report_failure(s);
}

}  // namespace

int main(int argc, char** argv) {
  if (hr_abi_version() != HR_ABI_VERSION) {
    std::cerr << "hr: library ABI " << hr_abi_version() << " does not match CLI ABI " << HR_ABI_VERSION << '\n';
    return kExitConfig;
  }

  CLI::App app{"Hybrid replay simulator for federated class-incremental learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hr_version());

  std::string run_config, out_dir, seeds_text;
  auto* run = app.add_subcommand("run", "Run every seed of a configuration");
  run->add_option("config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--seeds", seeds_text, "Comma-separated seeds (overrides seeds)");

  std::string ablate_config;
  auto* ablate = app.add_subcommand("ablate", "Run the base configuration and its six ablations");
  ablate->add_option("config", ablate_config, "Experiment config (JSON)")->required();

  std::string eval_dir;
  auto* eval = app.add_subcommand("eval", "Re-evaluate the checkpoints of a run directory");
  eval->add_option("dir", eval_dir, "Directory written by `hr run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  int threads = 0;
  if (!thread_cap(threads)) {
    std::cerr << "hr: HR_THREADS must be a non-negative integer\n";
    return kExitConfig;
  }

  hr_report_t* report = nullptr;
  hr_status status = HR_OK;

  if (*run) {
    hr_config_t* cfg = nullptr;
    if (int rc = load(run_config, &cfg); rc != kExitOk) return rc;
    if (!seeds_text.empty()) {
      std::vector<uint64_t> seeds;
      if (!parse_seeds(seeds_text, seeds)) {
        hr_config_free(cfg);
        std::cerr << "hr: --seeds expects a comma-separated list of non-negative integers\n";
        return kExitConfig;
      }
      status = hr_config_set_seeds(cfg, seeds.data(), seeds.size());
    }
    if (status == HR_OK && !out_dir.empty()) status = hr_config_set_output_dir(cfg, out_dir.c_str());
    if (status == HR_OK) status = hr_run(cfg, threads, &report);
    if (status == HR_OK) std::cerr << "hr: wrote " << hr_config_output_dir(cfg) << '\n';
    hr_config_free(cfg);
  } else if (*ablate) {
    hr_config_t* cfg = nullptr;
    if (int rc = load(ablate_config, &cfg); rc != kExitOk) return rc;
    status = hr_ablate(cfg, threads, &report);
    if (status == HR_OK) std::cerr << "hr: wrote " << hr_config_output_dir(cfg) << '\n';
    hr_config_free(cfg);
  } else if (*eval) {
    status = hr_eval(eval_dir.c_str(), &report);
  }

  if (status != HR_OK) return report_failure(status);
  std::cout << hr_report_text(report);
  hr_report_free(report);
  return kExitOk;
}

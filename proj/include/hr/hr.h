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

#ifndef HR_HR_H_
#define HR_HR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HR_BUILDING_LIBRARY)
#    define HR_API __declspec(dllexport)
#  else
#    define HR_API __declspec(dllimport)
#  endif
#else
#  define HR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define HR_ABI_VERSION 1

typedef enum hr_status {
  HR_OK = 0,
  HR_ERR_USAGE = 1,
  HR_ERR_CONFIG = 2,
  HR_ERR_DATA = 3,
  HR_ERR_PROTOCOL = 4,
  HR_ERR_DIVERGENCE = 5,
  HR_ERR_DEGENERATE = 6,
  HR_ERR_IO = 7,
  HR_ERR_VERSION = 8,
  HR_ERR_INTERNAL = 9
} hr_status;

typedef struct hr_config hr_config_t;
typedef struct hr_report hr_report_t;
typedef struct hr_model hr_model_t;

/* Library version string and ABI number. */
HR_API const char* hr_version(void);
HR_API int hr_abi_version(void);

/* Message of the last failed call on this thread ("" if none). */
HR_API const char* hr_last_error(void);
HR_API const char* hr_status_name(hr_status status);

/* Configuration. */
HR_API hr_status hr_config_load(const char* path, hr_config_t** out);
HR_API hr_status hr_config_parse(const char* json_text, hr_config_t** out);
HR_API void hr_config_free(hr_config_t* config);
HR_API hr_status hr_config_set_seeds(hr_config_t* config, const uint64_t* seeds, size_t count);
HR_API hr_status hr_config_set_output_dir(hr_config_t* config, const char* dir);
HR_API const char* hr_config_output_dir(const hr_config_t* config);
/* Canonical JSON echo; owned by the handle. */
HR_API const char* hr_config_json(const hr_config_t* config);

/* Runs every seed and writes artifacts (and checkpoints) into the output directory.
   `threads` caps client-level parallelism; 0 runs serially. */
HR_API hr_status hr_run(const hr_config_t* config, int threads, hr_report_t** out);
/* Base config plus the six ablations; one subdirectory per variant plus ablation.csv. */
HR_API hr_status hr_ablate(const hr_config_t* config, int threads, hr_report_t** out);
/* Re-evaluates the checkpoints of a `run` output directory. */
HR_API hr_status hr_eval(const char* dir, hr_report_t** out);

HR_API void hr_report_free(hr_report_t* report);
/* Human-readable text (run: summary table, eval: accuracy CSV); owned by the handle. */
HR_API const char* hr_report_text(const hr_report_t* report);
HR_API size_t hr_report_variant_count(const hr_report_t* report);
HR_API const char* hr_report_variant_name(const hr_report_t* report, size_t index);
/* Seed-averaged final accuracy of a variant. */
HR_API hr_status hr_report_final_accuracy(const hr_report_t* report, size_t index, double* mean);

/* Loads the model and centroid table of one checkpoint task directory. */
HR_API hr_status hr_model_load(const char* config_path, const char* task_dir, hr_model_t** out);
HR_API void hr_model_free(hr_model_t* model);
HR_API size_t hr_model_input_dim(const hr_model_t* model);
/* Nearest-centroid label of one input row of hr_model_input_dim values. */
HR_API hr_status hr_model_classify(const hr_model_t* model, const double* x, size_t n, int* label);

#ifdef __cplusplus
}
#endif

#endif  // HR_HR_H_

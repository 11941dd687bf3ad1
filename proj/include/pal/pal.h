/*
 * Copyright 2026 The PAL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * PAL: training segmentation networks on noisy labels with a quality
 * network that re-weights samples inside each mini-batch.
 *
 * Every function returns a pal_status. On failure, pal_last_error() holds
 * a message for the calling thread until its next PAL call. Strings
 * returned through char** out-parameters are owned by the caller and must
 * be released with pal_string_free(). Handles are released with their
 * matching *_free function; passing NULL to a free function is a no-op.
 */

#ifndef PAL_PAL_H_
#define PAL_PAL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PAL_API __declspec(dllexport)
#else
#define PAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pal_status {
  PAL_OK = 0,
  PAL_ERR_INVALID_ARGUMENT = 1,
  PAL_ERR_IO = 2,
  PAL_ERR_FORMAT = 3,
  PAL_ERR_STATE_CONFLICT = 4,
  PAL_ERR_DIVERGED = 5,
  PAL_ERR_INTERNAL = 6
} pal_status;

typedef enum pal_strategy {
  PAL_STRATEGY_BASELINE = 0,
  PAL_STRATEGY_QAM = 1,
  PAL_STRATEGY_QAM_OCM = 2
} pal_strategy;

typedef struct pal_dataset pal_dataset;

/* Called once per finished epoch with a one-line progress message. */
typedef void (*pal_log_fn)(const char* message, void* user);

PAL_API const char* pal_version(void);
PAL_API const char* pal_last_error(void);
PAL_API const char* pal_status_name(pal_status status);
PAL_API void pal_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

PAL_API pal_status pal_dataset_synthetic(int count, int size, int n_classes, uint64_t seed,
                                         pal_dataset** out);
/* Directory written by pal_dataset_save. */
PAL_API pal_status pal_dataset_load(const char* dir, pal_dataset** out);
/* grouping_json_path may be NULL for lungs / heart / clavicles. *skipped
 * (optional) receives the number of images dropped for missing masks. */
PAL_API pal_status pal_dataset_load_jsrt(const char* image_dir, const char* mask_dir,
                                         const char* grouping_json_path, pal_dataset** out,
                                         size_t* skipped);
PAL_API pal_status pal_dataset_save(const pal_dataset* d, const char* dir);
PAL_API pal_status pal_dataset_resize(const pal_dataset* d, int size, pal_dataset** out);
PAL_API pal_status pal_dataset_split(const pal_dataset* d, double train_fraction, uint64_t seed,
                                     pal_dataset** train, pal_dataset** test);
PAL_API void pal_dataset_free(pal_dataset* d);

PAL_API size_t pal_dataset_size(const pal_dataset* d);
PAL_API int pal_dataset_image_size(const pal_dataset* d);
PAL_API size_t pal_dataset_num_classes(const pal_dataset* d);
PAL_API size_t pal_dataset_num_corrupted(const pal_dataset* d);
/* Writes the comma-joined class names. */
PAL_API pal_status pal_dataset_class_names(const pal_dataset* d, char** out);

/* ---- corruption -------------------------------------------------------- */

/* noise_spec_json: {"fraction", "radius_min", "radius_max", "op_policy",
 * "seed"}. *manifest_json receives the corruption manifest. */
PAL_API pal_status pal_dataset_corrupt(const pal_dataset* d, const char* noise_spec_json,
                                       pal_dataset** out, char** manifest_json);
/* Writes a manifest produced by pal_dataset_corrupt to path. */
PAL_API pal_status pal_manifest_write(const char* path, const char* manifest_json);

/* Binary masks are row-major bytes (nonzero = foreground). */
PAL_API pal_status pal_dilate(const uint8_t* mask, int height, int width, int radius,
                              uint8_t* out);
PAL_API pal_status pal_erode(const uint8_t* mask, int height, int width, int radius,
                             uint8_t* out);

/* ---- re-weighting ------------------------------------------------------ */

PAL_API pal_status pal_compute_weights(pal_strategy strategy, double lambda, const double* scores,
                                       size_t n, double* weights);
PAL_API pal_status pal_combine_loss(const double* weights, const double* losses, size_t n,
                                    double* out);
/* d(sum_i w_i L_i)/d t_j for the given strategy. */
PAL_API pal_status pal_score_gradient(pal_strategy strategy, double lambda, const double* scores,
                                      const double* losses, size_t n, double* grad);

/* ---- evaluation -------------------------------------------------------- */

PAL_API pal_status pal_dice(const uint8_t* pred, const uint8_t* gt, int height, int width,
                            double* out);
/* *report_json receives {"per_class": {...}, "average": x}. */
PAL_API pal_status pal_evaluate_checkpoint(const char* checkpoint_dir, const pal_dataset* d,
                                           char** report_json);

/* ---- training and reporting -------------------------------------------- */

/* Parses and validates a run config without side effects; *normalized_json
 * (optional) receives it with defaults filled in. */
PAL_API pal_status pal_run_config_check(const char* run_config_json, char** normalized_json);
/* Trains one run. *summary_json (optional) receives best Dice, best epoch
 * and epoch count. */
PAL_API pal_status pal_train(const char* run_config_json, pal_log_fn log, void* user,
                             char** summary_json);
/* Results table and plots for n run directories into out_dir. *summary_json
 * (optional) receives row count, plot paths and notes. */
PAL_API pal_status pal_report(const char* const* run_dirs, size_t n, const char* out_dir,
                              char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* PAL_PAL_H_ */

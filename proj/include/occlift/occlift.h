// Copyright 2026 The occlift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to occlift. Every call returns an occlift_status; on failure
 * occlift_last_error() describes the problem for the calling thread. Handles
 * are opaque and released with the matching *_free function (NULL is fine). */
#ifndef OCCLIFT_OCCLIFT_H_
#define OCCLIFT_OCCLIFT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef OCCLIFT_BUILDING_LIBRARY
#    define OCCLIFT_API __declspec(dllexport)
#  else
#    define OCCLIFT_API __declspec(dllimport)
#  endif
#else
#  define OCCLIFT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum occlift_status {
  OCCLIFT_OK = 0,
  OCCLIFT_ERR_INVALID_ARGUMENT = 1,
  OCCLIFT_ERR_UNKNOWN_TOPOLOGY = 2,
  OCCLIFT_ERR_UNKNOWN_PART = 3,
  OCCLIFT_ERR_PARSE = 4,
  OCCLIFT_ERR_SHAPE_MISMATCH = 5,
  OCCLIFT_ERR_NON_FINITE = 6,
  OCCLIFT_ERR_IO = 7,
  OCCLIFT_ERR_VERSION = 8,
  OCCLIFT_ERR_NUMERIC = 9,
  OCCLIFT_ERR_INTERNAL = 99
} occlift_status;

OCCLIFT_API const char* occlift_version(void);
/* Message of the last failed call on this thread; "" when none. */
OCCLIFT_API const char* occlift_last_error(void);
/* Machine-readable category, e.g. "shape_mismatch". */
OCCLIFT_API const char* occlift_status_name(occlift_status status);
/* Releases strings returned through char** out-parameters. */
OCCLIFT_API void occlift_string_free(char* s);

typedef struct occlift_dataset occlift_dataset;
typedef struct occlift_model occlift_model;
typedef struct occlift_mask occlift_mask;
typedef struct occlift_report occlift_report;
typedef struct occlift_classifier occlift_classifier;

/* Split selectors. */
#define OCCLIFT_SPLIT_ALL (-1)
#define OCCLIFT_SPLIT_TRAIN 0
#define OCCLIFT_SPLIT_TEST 1

/* ---- synthetic data ---------------------------------------------------- */

typedef struct occlift_synth_options {
  const char* topology; /* "h36m17" */
  int actions;
  int per_action;
  int frames;
  double fps;
  int subjects;
  uint64_t seed;
} occlift_synth_options;

OCCLIFT_API void occlift_synth_options_default(occlift_synth_options* opts);
OCCLIFT_API occlift_status occlift_dataset_synthesize(
    const occlift_synth_options* opts, occlift_dataset** out);
OCCLIFT_API occlift_status occlift_dataset_load(const char* dir,
                                                occlift_dataset** out);
OCCLIFT_API occlift_status occlift_dataset_save(const occlift_dataset* ds,
                                                const char* dir);
OCCLIFT_API occlift_status occlift_dataset_count(const occlift_dataset* ds,
                                                 int split, size_t* out);
OCCLIFT_API occlift_status occlift_dataset_n_classes(const occlift_dataset* ds,
                                                     int* out);
/* Topology name; valid while the dataset lives. */
OCCLIFT_API const char* occlift_dataset_topology(const occlift_dataset* ds);
OCCLIFT_API void occlift_dataset_free(occlift_dataset* ds);

/* ---- occlusion masks --------------------------------------------------- */

/* scheme: "none", "random_k:<k>", "body_part:<name>", "blackout:<t>[@start]". */
OCCLIFT_API occlift_status occlift_mask_create(const char* scheme,
                                               const char* topology, int frames,
                                               uint64_t seed, occlift_mask** out);
OCCLIFT_API occlift_status occlift_mask_missing(const occlift_mask* mask,
                                                int frame, int* out);
OCCLIFT_API occlift_status occlift_mask_format(const occlift_mask* mask,
                                               char** out);
OCCLIFT_API occlift_status occlift_mask_save(const occlift_mask* mask,
                                             const char* path);
OCCLIFT_API void occlift_mask_free(occlift_mask* mask);

/* ---- lifter model ------------------------------------------------------ */

typedef struct occlift_model_config {
  const char* topology;
  int guided; /* 1: coordinates + indicators, 0: coordinates only */
  int channels;
  int blocks;
  int kernel;
  int dilation_base;
  double dropout_rate;
  int precision; /* 32 or 64 */
} occlift_model_config;

OCCLIFT_API void occlift_model_config_default(occlift_model_config* cfg);
OCCLIFT_API occlift_status occlift_model_create(const occlift_model_config* cfg,
                                                uint64_t seed,
                                                occlift_model** out);
OCCLIFT_API occlift_status occlift_model_load(const char* path,
                                              occlift_model** out);
OCCLIFT_API occlift_status occlift_model_save(const occlift_model* model,
                                              const char* path);
OCCLIFT_API occlift_status occlift_model_receptive_field(
    const occlift_model* model, int* out);
OCCLIFT_API occlift_status occlift_model_parameter_count(
    const occlift_model* model, int64_t* out);
/* FNV-1a over all parameter and running-statistic bytes. */
OCCLIFT_API occlift_status occlift_model_digest(const occlift_model* model,
                                                uint64_t* out);
/* Config as a JSON object. */
OCCLIFT_API occlift_status occlift_model_config_json(const occlift_model* model,
                                                     char** out);
OCCLIFT_API void occlift_model_free(occlift_model* model);

/* ---- training ---------------------------------------------------------- */

typedef struct occlift_train_options {
  double learning_rate;
  double lr_decay_per_epoch;
  int batch_size;
  int window_frames;
  int epochs;
  uint64_t seed;
  int augment; /* 0: none, 1: random k with p_apply, k_max */
  double p_apply;
  int k_max; /* -1: n_joints - 1 */
  int validate; /* 1: score the test split after every epoch */
} occlift_train_options;

/* Receives one JSON epoch record per call. */
typedef void (*occlift_epoch_callback)(const char* record_json, void* user);

OCCLIFT_API void occlift_train_options_default(occlift_train_options* opts);
/* Trains on the train split in place. */
OCCLIFT_API occlift_status occlift_model_train(occlift_model* model,
                                               const occlift_dataset* ds,
                                               const occlift_train_options* opts,
                                               occlift_epoch_callback cb,
                                               void* user);

/* ---- evaluation -------------------------------------------------------- */

/* Sequence i of the split is masked with seed derived from (seed, i). */
OCCLIFT_API occlift_status occlift_evaluate(occlift_model* model,
                                            const occlift_dataset* ds, int split,
                                            int protocol, const char* scheme,
                                            uint64_t seed, occlift_report** out);
OCCLIFT_API occlift_status occlift_report_overall(const occlift_report* report,
                                                  double* out_mm);
OCCLIFT_API occlift_status occlift_report_json(const occlift_report* report,
                                               char** out);
OCCLIFT_API void occlift_report_free(occlift_report* report);

/* ---- downstream quality ------------------------------------------------ */

typedef struct occlift_classifier_options {
  int size; /* encoded image side S */
  int hidden;
  int epochs;
  int batch_size;
  double learning_rate;
  uint64_t seed;
} occlift_classifier_options;

OCCLIFT_API void occlift_classifier_options_default(
    occlift_classifier_options* opts);
/* Trains on ground-truth 3D poses of the train split. */
OCCLIFT_API occlift_status occlift_classifier_train(
    const occlift_dataset* ds, const occlift_classifier_options* opts,
    occlift_classifier** out);
/* Accuracy on ground-truth 3D poses of a split. */
OCCLIFT_API occlift_status occlift_classifier_accuracy_gt(
    const occlift_classifier* clf, const occlift_dataset* ds, int split,
    double* out);
/* Accuracy on poses lifted by model under the scheme's masks (seeded as in
 * occlift_evaluate). */
OCCLIFT_API occlift_status occlift_classifier_accuracy_predicted(
    const occlift_classifier* clf, occlift_model* model,
    const occlift_dataset* ds, int split, const char* scheme, uint64_t seed,
    double* out);
OCCLIFT_API occlift_status occlift_classifier_digest(
    const occlift_classifier* clf, uint64_t* out);
OCCLIFT_API void occlift_classifier_free(occlift_classifier* clf);

#ifdef __cplusplus
}
#endif

#endif /* OCCLIFT_OCCLIFT_H_ */

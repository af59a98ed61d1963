// Copyright 2026 The PulseGuard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to PulseGuard. Every function returns a pg_status; on failure
 * pg_last_error() describes the problem for the calling thread. */

#ifndef PULSEGUARD_PULSEGUARD_H_
#define PULSEGUARD_PULSEGUARD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PULSEGUARD_BUILDING_LIBRARY)
#define PG_API __declspec(dllexport)
#else
#define PG_API __declspec(dllimport)
#endif
#else
#define PG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pg_status {
  PG_OK = 0,
  PG_INVALID_ARGUMENT = 1,
  PG_CONFIG = 2,
  PG_IO = 3,
  PG_DATA = 4,
  PG_MODEL_FORMAT = 5,
  PG_MODEL_VERSION = 6,
  PG_MODEL_DIMENSION = 7,
  PG_RECORD_FORMAT = 8,
  PG_INSUFFICIENT_DATA = 9,
  PG_NO_ELIGIBLE = 10,
  PG_NON_FINITE = 11,
  PG_INTERNAL = 12
} pg_status;

typedef struct pg_config pg_config;
typedef struct pg_model pg_model;

PG_API const char* pg_version(void);
PG_API const char* pg_status_name(pg_status status);
/* Message for the last failure on this thread; empty after success. */
PG_API const char* pg_last_error(void);

/* Receives progress lines. Pass NULL to silence. */
typedef void (*pg_log_fn)(const char* line, void* user);
PG_API void pg_set_log_callback(pg_log_fn fn, void* user);

PG_API pg_status pg_config_default(pg_config** out);
PG_API pg_status pg_config_load(const char* path, pg_config** out);
PG_API pg_status pg_config_parse(const char* json_text, pg_config** out);
PG_API void pg_config_free(pg_config* cfg);
PG_API pg_status pg_config_set_seed(pg_config* cfg, uint64_t seed);
PG_API pg_status pg_config_set_threshold(pg_config* cfg, double threshold);
/* Replaces the min_pvc sweep list. */
PG_API pg_status pg_config_set_min_pvc(pg_config* cfg, const int* values, size_t n);
/* Writes a NUL-terminated hex digest; buf must hold at least 17 bytes. */
PG_API pg_status pg_config_hash(const pg_config* cfg, char* buf, size_t buf_len);

PG_API pg_status pg_synth(const pg_config* cfg, const char* out_dir, size_t* n_records);
PG_API pg_status pg_build_corpus(const pg_config* cfg, const char* records_dir,
                                 const char* out_dir, size_t* n_train, size_t* n_val);
PG_API pg_status pg_train(const pg_config* cfg, const char* corpus_dir, const char* model_out,
                          const char* history_out, double* best_val_loss);

PG_API pg_status pg_model_load(const char* path, pg_model** out);
PG_API void pg_model_free(pg_model* model);
PG_API size_t pg_model_seq_len(const pg_model* model);
/* Reconstructs one normalized segment of pg_model_seq_len samples. */
PG_API pg_status pg_model_reconstruct(const pg_model* model, const double* samples, size_t n,
                                      double* out);

PG_API pg_status pg_detect(const pg_config* cfg, const pg_model* model, const char* records_dir,
                           const char* out_dir, int plot, size_t* n_regions);
PG_API pg_status pg_eval(const pg_config* cfg, const char* detections_dir, const char* gs_csv,
                         const char* out_dir);
/* dirs holds n evaluation directories. hash_conflict may be NULL. */
PG_API pg_status pg_report(const char* const* dirs, size_t n, const char* out_dir,
                           int* hash_conflict);

PG_API pg_status pg_pearson_r(const double* x, const double* y, size_t n, double* r);

#ifdef __cplusplus
}
#endif

#endif /* PULSEGUARD_PULSEGUARD_H_ */

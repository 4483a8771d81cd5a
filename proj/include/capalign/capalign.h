/*
 * Copyright 2026 The capalign Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to libcapalign.
 *
 * Every fallible call returns a capalign_status. On failure a message is kept
 * per thread and can be read with capalign_last_error() until the next call
 * on that thread. Strings returned through char** out-parameters are owned by
 * the caller and released with capalign_string_free(). Handles are released
 * with their matching *_free function; passing NULL to any *_free is a no-op.
 */

#ifndef CAPALIGN_CAPALIGN_H_
#define CAPALIGN_CAPALIGN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CAPALIGN_API __declspec(dllexport)
#else
#define CAPALIGN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum capalign_status {
  CAPALIGN_OK = 0,
  CAPALIGN_INVALID_ARGUMENT = 1,
  CAPALIGN_IO_FAILURE,
  CAPALIGN_RECORD_PARSE,
  CAPALIGN_FORMAT_MISMATCH,
  CAPALIGN_TRUNCATED,
  CAPALIGN_ZERO_NORM_ROW,
  CAPALIGN_DIM_MISMATCH,
  CAPALIGN_EMPTY_TOKEN_SET,
  CAPALIGN_MISSING_POOLED_TEXT,
  CAPALIGN_NON_FINITE_SCORE,
  CAPALIGN_UNKNOWN_STRATEGY,
  CAPALIGN_INSUFFICIENT_SAMPLES,
  CAPALIGN_DEGENERATE_VARIANCE,
  CAPALIGN_EMPTY_JOIN,
  CAPALIGN_EMPTY_GROUP,
  CAPALIGN_SEED_ARITY,
  CAPALIGN_NO_CAPTIONS_PARSED,
  CAPALIGN_ROUND_FAILED,
  CAPALIGN_SAMPLE_TOO_LARGE,
  CAPALIGN_UNKNOWN_RUBRIC,
  CAPALIGN_INVALID_SCORE,
  CAPALIGN_INCOMPLETE_RUBRIC,
  CAPALIGN_DUPLICATE_JUDGMENT,
  CAPALIGN_UNKNOWN_TASK,
  CAPALIGN_PROVIDER_FAILURE,
  CAPALIGN_INTERNAL = 100
} capalign_status;

CAPALIGN_API const char* capalign_version(void);
CAPALIGN_API const char* capalign_status_name(capalign_status status);
/* Message of the last failure on this thread, or "" after a success. */
CAPALIGN_API const char* capalign_last_error(void);
CAPALIGN_API void capalign_string_free(char* s);

/* ---- alignment primitives (row-major float matrices) ---- */

typedef enum capalign_image_text_mode {
  CAPALIGN_MODE_POOLED = 0,
  CAPALIGN_MODE_TOKEN_MAX = 1
} capalign_image_text_mode;

CAPALIGN_API capalign_status capalign_cosine(const float* u, const float* v,
                                             size_t dim, double* out);
CAPALIGN_API capalign_status capalign_text_text_align(const float* src,
                                                      size_t src_rows,
                                                      const float* tgt,
                                                      size_t tgt_rows, size_t dim,
                                                      double* out);
/* *defined is set to 0 (and *out to 0) when obj_rows is 0. */
CAPALIGN_API capalign_status capalign_object_text_align(
    const float* obj, size_t obj_rows, const float* tgt, size_t tgt_rows,
    size_t dim, double* out, int* defined);
/* pooled_text may be NULL in token-max mode. */
CAPALIGN_API capalign_status capalign_image_text_align(
    const float* img, const float* tgt, size_t tgt_rows, size_t dim,
    capalign_image_text_mode mode, const float* pooled_text, double* out);

CAPALIGN_API capalign_status capalign_pearson(const double* xs, const double* ys,
                                              size_t n, double* r);

/* ---- corpus: manifest joined with embedding files ---- */

typedef struct capalign_corpus capalign_corpus;

typedef struct capalign_corpus_options {
  const char* manifest;       /* required */
  const char* src_emb;        /* required, EMB1 keyed by record id */
  const char* tgt_emb;        /* required, EMB1 keyed by record id */
  const char* img_emb;        /* required, EMB1 keyed by record id, rows = 1 */
  const char* obj_emb;        /* optional, EMB1 keyed by object label */
  const char* pooled_emb;     /* optional, EMB1 keyed by record id, rows = 1 */
  const char* objects;        /* optional, detection lines */
  double threshold;           /* detections kept when score > threshold */
  int allow_missing_objects;  /* K = 0 instead of orphaning */
  int require_pooled_text;    /* orphan records without a pooled vector */
} capalign_corpus_options;

CAPALIGN_API void capalign_corpus_options_init(capalign_corpus_options* o);
CAPALIGN_API capalign_status capalign_corpus_load(
    const capalign_corpus_options* options, capalign_corpus** out);
CAPALIGN_API void capalign_corpus_free(capalign_corpus* c);
CAPALIGN_API size_t capalign_corpus_unit_count(const capalign_corpus* c);
CAPALIGN_API size_t capalign_corpus_orphan_count(const capalign_corpus* c);
CAPALIGN_API size_t capalign_corpus_parse_error_count(const capalign_corpus* c);
/* Writes one {"id","missing":[...]} line per orphan and one
 * {"line","error"} line per unparseable manifest line. */
CAPALIGN_API capalign_status capalign_corpus_write_report(const capalign_corpus* c,
                                                          const char* path);

typedef struct capalign_weights {
  double text_text;
  double image_text;
  double object_text;
} capalign_weights;

/* Writes the per-unit breakdown file in manifest order. */
CAPALIGN_API capalign_status capalign_corpus_score(
    const capalign_corpus* c, capalign_image_text_mode mode,
    const capalign_weights* weights, size_t workers, const char* out_path);

/* ---- ranking ---- */

typedef struct capalign_ranking capalign_ranking;

typedef struct capalign_rank_options {
  const char* strategy; /* ours | text-only | image-only | object-ablated | random */
  uint64_t seed;
  capalign_image_text_mode mode;
  int drop_undefined_objects;
  size_t k;
  size_t workers;
} capalign_rank_options;

CAPALIGN_API void capalign_rank_options_init(capalign_rank_options* o);
CAPALIGN_API capalign_status capalign_rank_corpus(const capalign_corpus* c,
                                                  const capalign_rank_options* o,
                                                  capalign_ranking** out);
/* Ranks a breakdown file written by capalign_corpus_score. */
CAPALIGN_API capalign_status capalign_rank_breakdowns(
    const char* breakdown_path, const capalign_rank_options* o,
    capalign_ranking** out);
CAPALIGN_API void capalign_ranking_free(capalign_ranking* r);
CAPALIGN_API size_t capalign_ranking_size(const capalign_ranking* r);
/* *id stays valid until the ranking is freed. */
CAPALIGN_API capalign_status capalign_ranking_entry(const capalign_ranking* r,
                                                    size_t i, const char** id,
                                                    double* score);
/* Copies the selected manifest lines in rank order to out_path. *summary_json
 * receives the summary record. */
CAPALIGN_API capalign_status capalign_ranking_emit(const capalign_ranking* r,
                                                   const char* manifest_path,
                                                   const char* out_path,
                                                   char** summary_json);

/* ---- benchmark prompts ---- */

typedef struct capalign_bench_options {
  const char* seeds_path;    /* optional; built-in seeds when NULL */
  const char* replay_path;   /* transcript to replay, or NULL */
  const char* provider_url;  /* live provider, used when replay_path is NULL */
  const char* record_path;   /* optional transcript output */
  const char* culture;       /* NULL for the default */
  size_t target;             /* pool size to reach */
  size_t round_limit;
  size_t max_attempts;
  uint32_t backoff_ms;
  uint64_t seed;
  size_t subsample;          /* 0 keeps the whole deduplicated pool */
  const char* out_path;      /* required */
} capalign_bench_options;

CAPALIGN_API void capalign_bench_options_init(capalign_bench_options* o);
CAPALIGN_API capalign_status capalign_bench_generate(const capalign_bench_options* o,
                                                     char** summary_json);
/* objects_path may be NULL; the noun-chunk heuristic is used then. */
CAPALIGN_API capalign_status capalign_bench_stats(const char* prompts_path,
                                                  const char* objects_path,
                                                  char** summary_json);
/* Renders the request sent to the provider for five seeds. */
CAPALIGN_API capalign_status capalign_bench_prompt(const char* const* seeds,
                                                   size_t n, const char* culture,
                                                   char** prompt);

/* ---- meta-evaluation ---- */

typedef struct capalign_metric_spec {
  const char* name;  /* row label */
  const char* path;  /* breakdown file */
  /* combined | a_st | a_it | a_ot | ours | text-only | image-only |
   * object-ablated */
  const char* field;
} capalign_metric_spec;

typedef struct capalign_correlate_options {
  const char* judgments_path;
  const char* rubric;    /* caption | image */
  const char* all_mode;  /* pooled | mean-of-r */
  const capalign_metric_spec* metrics;
  size_t metric_count;
} capalign_correlate_options;

/* *report receives the aligned table, *json_lines one record per metric. */
CAPALIGN_API capalign_status capalign_eval_correlate(
    const capalign_correlate_options* o, char** report, char** json_lines);
CAPALIGN_API capalign_status capalign_eval_aggregate(const char* judgments_path,
                                                     const char* rubric,
                                                     int with_histogram,
                                                     char** report,
                                                     char** json_lines);

/* ---- annotation service ---- */

typedef struct capalign_server capalign_server;

typedef struct capalign_server_options {
  const char* data_dir;     /* required */
  const char* host;         /* NULL for 127.0.0.1 */
  int port;                 /* 0 picks an ephemeral port */
  const char* static_dir;   /* optional */
  const char* rubrics_file; /* optional */
} capalign_server_options;

CAPALIGN_API capalign_status capalign_server_create(
    const capalign_server_options* o, capalign_server** out);
/* Recovery warnings from replaying the logs, newline separated. */
CAPALIGN_API capalign_status capalign_server_warnings(const capalign_server* s,
                                                      char** text);
CAPALIGN_API capalign_status capalign_server_bind(capalign_server* s, int* port);
/* Blocks until capalign_server_stop is called from another thread. */
CAPALIGN_API capalign_status capalign_server_listen(capalign_server* s);
CAPALIGN_API void capalign_server_stop(capalign_server* s);
CAPALIGN_API void capalign_server_free(capalign_server* s);

#ifdef __cplusplus
}
#endif

#endif /* CAPALIGN_CAPALIGN_H_ */

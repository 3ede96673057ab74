// Copyright 2026 The capadapt Authors.
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

#ifndef CAPADAPT_CAPADAPT_H_
#define CAPADAPT_CAPADAPT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CAP_API __declspec(dllexport)
#else
#define CAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cap_status {
  CAP_OK = 0,
  CAP_ERR_INVALID_ARGUMENT = 1,
  CAP_ERR_PARSE = 2,
  CAP_ERR_INTEGRITY = 3,
  CAP_ERR_IO = 4,
  CAP_ERR_CONFIG = 5,
  CAP_ERR_STATE = 6,
  CAP_ERR_NOT_FOUND = 7,
  CAP_ERR_BUSY = 8,
  CAP_ERR_INTERNAL = 9
} cap_status;

typedef struct cap_config cap_config;
typedef struct cap_corpus cap_corpus;
typedef struct cap_learner cap_learner;
typedef struct cap_memory cap_memory;
typedef struct cap_service cap_service;

/* Strings returned through char** out-parameters are owned by the caller
 * and must be released with cap_free_string. On failure the out-parameter
 * is left untouched and cap_last_error() describes the problem (per thread). */
CAP_API const char* cap_version(void);
CAP_API const char* cap_last_error(void);
CAP_API const char* cap_status_name(cap_status status);
CAP_API void cap_free_string(char* s);

/* Run configuration ("key = value" file). */
CAP_API cap_status cap_config_new(cap_config** out);
CAP_API cap_status cap_config_load(const char* path, cap_config** out);
CAP_API cap_status cap_config_set(cap_config* config, const char* key, const char* value);
CAP_API cap_status cap_config_get(const cap_config* config, const char* key, char** value);
CAP_API cap_status cap_config_serialize(const cap_config* config, char** text);
CAP_API cap_status cap_config_validate(const cap_config* config);
CAP_API void cap_config_free(cap_config* config);

/* Caption corpora. split: "train", "val" or "test" (a per-image "split"
 * field in the file takes precedence). */
CAP_API cap_status cap_corpus_load(const char* path, const char* split, cap_corpus** out);
/* val becomes test; a seeded holdout of train becomes val. */
CAP_API cap_status cap_corpus_remap(const cap_corpus* train, const cap_corpus* val, double holdout_fraction,
                                    uint64_t seed, cap_corpus** out);
/* marker may be NULL for the default. excluded_json may be NULL. */
CAP_API cap_status cap_corpus_filter(const cap_corpus* corpus, const char* marker, cap_corpus** out,
                                     char** excluded_json);
CAP_API cap_status cap_corpus_save(const cap_corpus* corpus, const char* path);
CAP_API cap_status cap_corpus_stats(const cap_corpus* corpus, char** stats_json);
/* Concatenation; image ids must stay unique. */
CAP_API cap_status cap_corpus_merge(const cap_corpus* a, const cap_corpus* b, cap_corpus** out);
/* Images of one split. */
CAP_API cap_status cap_corpus_select(const cap_corpus* corpus, const char* split, cap_corpus** out);
CAP_API size_t cap_corpus_size(const cap_corpus* corpus);
CAP_API void cap_corpus_free(cap_corpus* corpus);
/* Remapped and filtered target corpus as configured (target.* keys). */
CAP_API cap_status cap_prepare_target(const cap_config* config, const char* out_path, char** summary_json);

/* Keyword clustering of a prepared corpus file; writes the cluster file. */
CAP_API cap_status cap_cluster(const char* corpus_path, const char* lexicon_path, const char* embeddings_path,
                               int k, size_t min_freq, uint64_t seed, const char* out_path, char** table_json);

/* {"words": [...], "ids": [...], "pieces": [...]} */
CAP_API cap_status cap_tokenize(const char* vocab_path, const char* text, char** result_json);

/* Expands one (image, caption) sample; writes copy_<i>.png into out_dir
 * when out_dir is non-NULL. thesaurus_path may be NULL. */
CAP_API cap_status cap_augment_preview(const char* image_path, const char* caption, const char* mode, int factor,
                                       uint64_t seed, const char* thesaurus_path, const char* out_dir,
                                       char** result_json);

/* input: {"clusters": {"<id>": [{"image_id", "hypothesis", "references": [...]}]}}
 * micro: "pooled" or "weighted". Either output may be NULL. */
CAP_API cap_status cap_evaluate(const char* input_json, const char* micro, char** report_json, char** report_csv);

/* hyp: {"<image_id>": "<caption>"} or [{"image_id", "caption"}]; refs: an
 * annotation file; clusters_path may be NULL (one group over all hyps). */
CAP_API cap_status cap_evaluate_files(const char* hyp_path, const char* refs_path, const char* clusters_path,
                                      const char* micro, char** report_json, char** report_csv);

/* Learners. */
CAP_API cap_status cap_learner_new(const cap_config* config, cap_learner** out);
CAP_API cap_status cap_learner_load(const cap_config* config, const char* snapshot_path, cap_learner** out);
CAP_API cap_status cap_learner_observe(cap_learner* learner, const char* image_path, const char* caption);
CAP_API cap_status cap_learner_caption(const cap_learner* learner, const char* image_path, char** caption);
CAP_API cap_status cap_learner_save(const cap_learner* learner, const char* path);
CAP_API size_t cap_learner_size(const cap_learner* learner);
CAP_API void cap_learner_free(cap_learner* learner);

/* Episodic memory snapshots. */
CAP_API cap_status cap_memory_load(const char* path, cap_memory** out);
CAP_API cap_status cap_memory_stats(const cap_memory* memory, char** stats_json);
CAP_API void cap_memory_free(cap_memory* memory);

/* Workflows over config.output_dir; each returns a JSON summary. */
CAP_API cap_status cap_run_pretrain(const cap_config* config, char** summary_json);
CAP_API cap_status cap_run_adapt(const cap_config* config, char** summary_json);
/* which: "memory" or "fraction". */
CAP_API cap_status cap_run_ablate(const cap_config* config, const char* which, char** summary_json);
CAP_API cap_status cap_run_report(const char* run_dir, char** text);

/* Writes a synthetic dataset with a matching capadapt.conf into dir. */
CAP_API cap_status cap_synth(const char* dir, uint64_t seed, int groups, int train_per_group, int val_per_group,
                             char** summary_json);

/* Feedback service over a run directory. auto_flush 0 disables it. */
CAP_API cap_status cap_service_new(const cap_config* config, const char* run_dir, size_t auto_flush,
                                   cap_service** out);
/* port 0 picks a free port; the bound port is stored in *bound_port. */
CAP_API cap_status cap_service_bind(cap_service* service, const char* host, int port, int* bound_port);
/* Blocks until cap_service_stop. */
CAP_API cap_status cap_service_run(cap_service* service);
CAP_API cap_status cap_service_stop(cap_service* service);
CAP_API void cap_service_free(cap_service* service);

#ifdef __cplusplus
}
#endif

#endif  /* CAPADAPT_CAPADAPT_H_ */

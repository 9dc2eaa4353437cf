// Copyright (c) 2026 The SheetToken Authors. All Rights Reserved.
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
#ifndef SHEETTOKEN_SHEETTOKEN_H_
#define SHEETTOKEN_SHEETTOKEN_H_

/* C interface of the sheettoken shared library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an st_status; on failure the message is
 * available from st_last_error() on the same thread until the next call.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with st_string_free. Output pointers are left untouched on
 * failure. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SHEETTOKEN_API __declspec(dllexport)
#else
#define SHEETTOKEN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum st_status {
  ST_OK = 0,
  ST_ERR_INVALID_ARGUMENT = 1,
  ST_ERR_IO = 2,
  ST_ERR_PARSE = 3,
  ST_ERR_SCHEMA = 4,
  ST_ERR_FORMAT = 5,
  ST_ERR_NUMERIC = 6,
  ST_ERR_INTERNAL = 7
} st_status;

typedef enum st_mode { ST_MODE_ENHANCED = 0, ST_MODE_BASELINE = 1 } st_mode;

typedef struct st_corpus st_corpus;
typedef struct st_encoder st_encoder;
typedef struct st_tokens st_tokens;
typedef struct st_retriever st_retriever;

typedef struct st_hit {
  uint32_t sheet_id;
  double score;
  int selected;
} st_hit;

typedef void (*st_progress_fn)(const char* message, void* user);

SHEETTOKEN_API const char* st_version(void);
SHEETTOKEN_API const char* st_status_name(st_status status);
SHEETTOKEN_API const char* st_last_error(void);
SHEETTOKEN_API void st_string_free(char* s);

/* Configuration text is a JSON object with optional "fabricate", "encoder",
 * "retriever" and "flops" sections. NULL or "" selects the defaults. */
SHEETTOKEN_API st_status st_config_check(const char* config_json);

/* Fabrication. templates_dir may be NULL for the bundled generator;
 * num_templates = 0 keeps all templates. Writes sheets.json, train.json,
 * query.json, splits.json and stats.json into out_dir. */
SHEETTOKEN_API st_status st_fabricate(const char* templates_dir, const char* out_dir, uint64_t seed,
                                      size_t num_templates, const char* config_json, char** stats_json);

/* Corpus directory. */
SHEETTOKEN_API st_status st_corpus_load(const char* dir, st_corpus** out);
SHEETTOKEN_API void st_corpus_free(st_corpus* corpus);
SHEETTOKEN_API size_t st_corpus_num_sheets(const st_corpus* corpus);
SHEETTOKEN_API size_t st_corpus_num_pairs(const st_corpus* corpus);
SHEETTOKEN_API size_t st_corpus_num_queries(const st_corpus* corpus);

/* Stage 1 encoder. log_csv (optional) receives epoch,split,accuracy,entropy. */
SHEETTOKEN_API st_status st_encoder_train(const st_corpus* corpus, const char* config_json, uint64_t seed,
                                          st_encoder** out, char** log_csv);
SHEETTOKEN_API st_status st_encoder_save(const st_encoder* encoder, const char* path);
SHEETTOKEN_API st_status st_encoder_load(const char* path, st_encoder** out);
SHEETTOKEN_API void st_encoder_free(st_encoder* encoder);
SHEETTOKEN_API size_t st_encoder_dim(const st_encoder* encoder);
/* Unit-norm token of free text; out must hold st_encoder_dim values. */
SHEETTOKEN_API st_status st_encoder_embed_text(const st_encoder* encoder, const char* text, double* out,
                                               size_t len);

/* Token cache. */
SHEETTOKEN_API st_status st_tokens_encode(const st_encoder* encoder, const st_corpus* corpus, unsigned threads,
                                          st_tokens** out);
SHEETTOKEN_API st_status st_tokens_import(const char* csv_path, const st_corpus* corpus, st_tokens** out);
SHEETTOKEN_API st_status st_tokens_save(const st_tokens* tokens, const char* path);
SHEETTOKEN_API st_status st_tokens_load(const char* path, st_tokens** out);
SHEETTOKEN_API void st_tokens_free(st_tokens* tokens);
SHEETTOKEN_API size_t st_tokens_dim(const st_tokens* tokens);
SHEETTOKEN_API size_t st_tokens_count(const st_tokens* tokens);
SHEETTOKEN_API st_status st_tokens_get(const st_tokens* tokens, uint32_t sheet_id, float* out, size_t len);

/* Stage 2 retriever. */
SHEETTOKEN_API st_status st_retriever_train(const st_corpus* corpus, const st_tokens* tokens,
                                            const st_encoder* encoder, const char* config_json, st_mode mode,
                                            uint64_t seed, st_retriever** out, char** log_csv);
SHEETTOKEN_API st_status st_retriever_save(const st_retriever* retriever, const char* path);
SHEETTOKEN_API st_status st_retriever_load(const char* path, st_retriever** out);
SHEETTOKEN_API void st_retriever_free(st_retriever* retriever);

/* Ranks every catalog sheet for a query. With top_k > 0 the first top_k are
 * selected, otherwise those scoring at least threshold. hits are in rank
 * order and released with st_hits_free. */
SHEETTOKEN_API st_status st_query(const st_corpus* corpus, const st_tokens* tokens, const st_encoder* encoder,
                                  const st_retriever* retriever, const char* text, double threshold, size_t top_k,
                                  st_hit** hits, size_t* count);
SHEETTOKEN_API void st_hits_free(st_hit* hits);

/* Metric tables over the train and eval splits. */
SHEETTOKEN_API st_status st_eval_stage1(const st_corpus* corpus, const st_encoder* encoder, char** table);
SHEETTOKEN_API st_status st_eval_stage2(const st_corpus* corpus, const st_tokens* tokens, const st_encoder* encoder,
                                        const st_retriever* retriever, unsigned threads, char** table);

/* Three-variant ablation over the given seeds. passes is set to 1 when the
 * accuracy ordering holds, 0 otherwise. Any of csv, json and progress may be
 * NULL. */
SHEETTOKEN_API st_status st_ablate(const st_corpus* corpus, const uint64_t* seeds, size_t num_seeds,
                                   const char* config_json, st_progress_fn progress, void* user, char** csv,
                                   char** json, int* passes);

/* Encoder and retriever FLOPs. With a corpus and encoder config the mean
 * feature count is measured from the catalog. */
SHEETTOKEN_API st_status st_flops(const st_corpus* corpus, const char* config_json, char** table, char** json);

#ifdef __cplusplus
}
#endif

#endif /* SHEETTOKEN_SHEETTOKEN_H_ */

#ifndef HYBRIDIR_HYBRIDIR_H
#define HYBRIDIR_HYBRIDIR_H

/*
 * C interface to the hybrid sparse/dense retrieval workbench.
 *
 * Objects are opaque handles created by hir_*_new / hir_*_load / hir_*_build
 * and released with the matching hir_*_free (NULL is accepted). Every
 * fallible call returns an hir_status; on failure a message describing the
 * problem is available from hir_last_error() on the same thread until the
 * next failing call.
 *
 * Strings returned through `char**` are heap allocated and must be released
 * with hir_string_free. `const char*` results are owned by their handle.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(HIR_BUILDING_LIBRARY)
#define HIR_API __attribute__((visibility("default")))
#else
#define HIR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hir_status {
  HIR_OK = 0,
  HIR_ERR_INVALID_ARGUMENT = 1,
  HIR_ERR_IO = 2,
  HIR_ERR_PARSE = 3,
  HIR_ERR_DUPLICATE_ID = 4,
  HIR_ERR_MISSING_FIELD = 5,
  HIR_ERR_FORMAT = 6,
  HIR_ERR_DIMENSION_MISMATCH = 7,
  HIR_ERR_EMPTY_INPUT = 8,
  HIR_ERR_DATA = 9,
  HIR_ERR_INTERNAL = 10
} hir_status;

typedef enum hir_system {
  HIR_SYSTEM_SPARSE = 0,
  HIR_SYSTEM_DENSE = 1,
  HIR_SYSTEM_FUSION = 2,
  HIR_SYSTEM_HYBRID = 3,
  HIR_SYSTEM_CEILING = 4 /* evaluation only */
} hir_system;

typedef enum hir_route { HIR_ROUTE_NONE = -1, HIR_ROUTE_SPARSE = 0, HIR_ROUTE_DENSE = 1 } hir_route;

typedef struct hir_analyzer hir_analyzer;
typedef struct hir_corpus hir_corpus;
typedef struct hir_queries hir_queries;
typedef struct hir_index hir_index;
typedef struct hir_embeddings hir_embeddings;
typedef struct hir_workbench hir_workbench;
typedef struct hir_hits hir_hits;
typedef struct hir_records hir_records;
typedef struct hir_router hir_router;
typedef struct hir_timing hir_timing;
typedef struct hir_probe_data hir_probe_data;
typedef struct hir_probe_model hir_probe_model;

HIR_API const char* hir_version(void);
HIR_API const char* hir_last_error(void);
HIR_API const char* hir_status_name(hir_status status);
HIR_API void hir_string_free(char* s);

/* Analyzer: lowercasing, plural stemming and stopword removal. */
HIR_API hir_status hir_analyzer_new(hir_analyzer** out);
HIR_API hir_status hir_analyzer_set_lowercase(hir_analyzer* a, int enabled);
HIR_API hir_status hir_analyzer_set_stem(hir_analyzer* a, int enabled);
HIR_API hir_status hir_analyzer_set_min_count(hir_analyzer* a, size_t min_count);
/* Replaces the stopword list with the file's contents; NULL clears it. */
HIR_API hir_status hir_analyzer_load_stopwords(hir_analyzer* a, const char* path);
HIR_API const char* hir_analyzer_hash(const hir_analyzer* a);
/* Space-separated analyzed tokens. */
HIR_API hir_status hir_analyzer_tokenize(const hir_analyzer* a, const char* text, char** out);
HIR_API void hir_analyzer_free(hir_analyzer* a);

/* Corpus and query JSONL files. */
HIR_API hir_status hir_corpus_load(const char* path, hir_corpus** out);
HIR_API size_t hir_corpus_size(const hir_corpus* c);
HIR_API void hir_corpus_free(hir_corpus* c);

HIR_API hir_status hir_queries_load(const char* path, hir_queries** out);
HIR_API size_t hir_queries_size(const hir_queries* q);
HIR_API const char* hir_queries_qid(const hir_queries* q, size_t i);
/* HIR_ERR_DATA naming the first qid whose gold id is not in the corpus. */
HIR_API hir_status hir_queries_validate(const hir_queries* q, const hir_corpus* c);
HIR_API void hir_queries_free(hir_queries* q);

/* BM25 inverted index. analyzer may be NULL for defaults. */
HIR_API hir_status hir_index_build(const hir_corpus* c, const hir_analyzer* a, double k1, double b, hir_index** out);
HIR_API hir_status hir_index_load(const char* path, hir_index** out);
HIR_API hir_status hir_index_save(const hir_index* idx, const char* path);
HIR_API size_t hir_index_num_docs(const hir_index* idx);
HIR_API size_t hir_index_num_terms(const hir_index* idx);
HIR_API const char* hir_index_analyzer_hash(const hir_index* idx);
HIR_API hir_status hir_index_search(const hir_index* idx, const char* query, size_t k, hir_hits** out);
HIR_API void hir_index_free(hir_index* idx);

/* EMB1 vectors plus an ids sidecar. */
HIR_API hir_status hir_embeddings_load(const char* vec_path, const char* ids_path, hir_embeddings** out);
HIR_API hir_status hir_embeddings_new(size_t dim, size_t count, const char* const* ids, const float* values,
                                      hir_embeddings** out);
HIR_API hir_status hir_embeddings_save(const hir_embeddings* e, const char* vec_path, const char* ids_path);
HIR_API size_t hir_embeddings_dim(const hir_embeddings* e);
HIR_API size_t hir_embeddings_size(const hir_embeddings* e);
HIR_API void hir_embeddings_free(hir_embeddings* e);

/* Ranked result list. */
HIR_API size_t hir_hits_size(const hir_hits* h);
HIR_API const char* hir_hits_id(const hir_hits* h, size_t i);
HIR_API double hir_hits_score(const hir_hits* h, size_t i);
HIR_API hir_route hir_hits_route(const hir_hits* h);
HIR_API void hir_hits_free(hir_hits* h);

/*
 * A workbench runs every system over one index and embedding pair. It keeps
 * references to its arguments, which must outlive it. dense_delay_us is added
 * to each dense call.
 */
HIR_API hir_status hir_workbench_new(const hir_index* idx, const hir_embeddings* docs, const hir_embeddings* queries,
                                     size_t k, uint64_t dense_delay_us, hir_workbench** out);
/* router is required for HIR_SYSTEM_HYBRID and ignored otherwise. */
HIR_API hir_status hir_workbench_retrieve(const hir_workbench* wb, hir_system system, const hir_queries* q, size_t i,
                                          const hir_router* router, hir_hits** out);
HIR_API hir_status hir_workbench_evaluate(const hir_workbench* wb, const hir_queries* q, const hir_router* router,
                                          hir_records** out);
HIR_API hir_status hir_workbench_time(const hir_workbench* wb, hir_system system, const hir_queries* q, size_t warmup,
                                      const hir_router* router, hir_timing** out);
HIR_API void hir_workbench_free(hir_workbench* wb);

/* Per-query rank records (JSONL). */
HIR_API hir_status hir_records_load(const char* path, hir_records** out);
HIR_API hir_status hir_records_save(const hir_records* r, const char* path);
HIR_API size_t hir_records_size(const hir_records* r);
HIR_API hir_status hir_records_apply_router(hir_records* r, const hir_router* router);
HIR_API hir_status hir_records_mrr(const hir_records* r, hir_system system, double* out);
/* One-sided paired bootstrap: fraction of resamples where system a is not better than b. */
HIR_API hir_status hir_records_bootstrap(const hir_records* r, hir_system a, hir_system b, size_t iters, uint64_t seed,
                                         double* p_value);
/* as_text = 0 gives CSV. */
HIR_API hir_status hir_records_report(const hir_records* r, size_t bootstrap_iters, uint64_t seed, int as_text,
                                      char** out);
HIR_API hir_status hir_records_routing_stats(const hir_records* r, char** csv);
HIR_API hir_status hir_records_histogram(const hir_records* r, size_t bins, char** csv);
HIR_API void hir_records_free(hir_records* r);

/* Routers. source: sparse|dense|both, topk: full|1|4|16|64. */
HIR_API hir_status hir_router_fit_threshold(const hir_records* dev, hir_router** out);
HIR_API hir_status hir_router_fit_logreg(const hir_records* dev, const char* source, const char* topk,
                                         double learning_rate, size_t epochs, double l2, hir_router** out);
/* Stamps the index's analyzer fingerprint so mismatched pairings are rejected later. */
HIR_API hir_status hir_router_bind(hir_router* router, const hir_index* idx);
HIR_API hir_status hir_router_check(const hir_router* router, const hir_index* idx);
HIR_API hir_status hir_router_load(const char* path, hir_router** out);
HIR_API hir_status hir_router_save(const hir_router* router, const char* path);
HIR_API hir_status hir_router_to_json(const hir_router* router, char** out);
HIR_API void hir_router_free(hir_router* router);

/* Wall-clock timing of one system. */
HIR_API double hir_timing_total(const hir_timing* t);
HIR_API size_t hir_timing_count(const hir_timing* t);
HIR_API hir_status hir_timing_csv(const hir_timing* t, char** out);
HIR_API void hir_timing_free(hir_timing* t);

/*
 * Lexical probe. input_kind: tfidf|dense (dense needs query embeddings);
 * control: none|rand-embedding|rand-label.
 */
HIR_API hir_status hir_probe_build(const hir_corpus* c, const hir_queries* q, const hir_analyzer* a,
                                   const char* input_kind, const hir_embeddings* query_vectors, double dev_fraction,
                                   uint64_t seed, hir_probe_data** out, size_t* skipped);
HIR_API hir_status hir_probe_data_save(const hir_probe_data* d, const char* path);
HIR_API hir_status hir_probe_data_load(const char* path, const hir_embeddings* query_vectors, hir_probe_data** out);
HIR_API size_t hir_probe_data_train_size(const hir_probe_data* d);
HIR_API size_t hir_probe_data_dev_size(const hir_probe_data* d);
HIR_API void hir_probe_data_free(hir_probe_data* d);

/* Trains on the train split, keeps the best dev-loss epoch and writes one metrics CSV row. */
HIR_API hir_status hir_probe_train(const hir_probe_data* d, const char* control, size_t epochs, double learning_rate,
                                   uint64_t seed, hir_probe_model** model, char** metrics_row);
/* Dev-split metrics of a saved model; seed re-derives the control substitution. */
HIR_API hir_status hir_probe_evaluate(const hir_probe_model* m, const hir_probe_data* d, uint64_t seed,
                                      char** metrics_row);
HIR_API const char* hir_probe_metrics_header(void);
HIR_API hir_status hir_probe_model_save(const hir_probe_model* m, const char* path);
HIR_API hir_status hir_probe_model_load(const char* path, hir_probe_model** out);
HIR_API void hir_probe_model_free(hir_probe_model* m);

/* Writes the synthetic routing workload (corpus, queries and splits, embeddings) into dir. */
HIR_API hir_status hir_synth_write(const char* dir, size_t n_docs, size_t n_queries, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif

#include "hybridir/hybridir.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "dense_store.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "pipeline.hpp"
#include "probe.hpp"
#include "router.hpp"
#include "sparse_index.hpp"
#include "synth.hpp"
#include "text_analyzer.hpp"

using namespace hybridir;

struct hir_analyzer {
  AnalyzerConfig cfg = AnalyzerConfig::defaults();
  mutable std::string hash;
};
struct hir_corpus {
  Corpus corpus;
};
struct hir_queries {
  std::vector<Query> queries;
};
struct hir_index {
  InvertedIndex index;
  std::string hash;
};
struct hir_embeddings {
  EmbeddingStore store;
};
struct hir_workbench {
  Workbench wb;
};
struct hir_hits {
  ScoredList list;
  std::optional<Route> routed;
};
struct hir_records {
  std::vector<RankRecord> records;
};
struct hir_router {
  RouterModel model;
};
struct hir_timing {
  TimingReport report;
};
struct hir_probe_data {
  ProbeDataset data;
};
struct hir_probe_model {
  ProbeModel model;
};

namespace {

thread_local std::string g_last_error;

hir_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return HIR_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return HIR_ERR_IO;
    case ErrorCode::kParse: return HIR_ERR_PARSE;
    case ErrorCode::kDuplicateId: return HIR_ERR_DUPLICATE_ID;
    case ErrorCode::kMissingField: return HIR_ERR_MISSING_FIELD;
    case ErrorCode::kFormat: return HIR_ERR_FORMAT;
    case ErrorCode::kDimensionMismatch: return HIR_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kEmptyInput: return HIR_ERR_EMPTY_INPUT;
    case ErrorCode::kData: return HIR_ERR_DATA;
  }
  return HIR_ERR_INTERNAL;
}

hir_status fail(hir_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
hir_status guard(F&& body) {
  try {
    body();
    return HIR_OK;
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HIR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HIR_ERR_INTERNAL, e.what());
  }
}

#define HIR_REQUIRE(cond)                                                     \
  do {                                                                        \
    if (!(cond)) return fail(HIR_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

System to_system(hir_system s) {
  switch (s) {
    case HIR_SYSTEM_SPARSE: return System::kSparse;
    case HIR_SYSTEM_DENSE: return System::kDense;
    case HIR_SYSTEM_FUSION: return System::kFusion;
    case HIR_SYSTEM_HYBRID: return System::kHybrid;
    case HIR_SYSTEM_CEILING: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "system is not a retrieval system");
}

std::vector<Rank> ranks_of(const std::vector<RankRecord>& records, hir_system s) {
  std::vector<Rank> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    switch (s) {
      case HIR_SYSTEM_SPARSE: out.push_back(r.sparse_rank); break;
      case HIR_SYSTEM_DENSE: out.push_back(r.dense_rank); break;
      case HIR_SYSTEM_FUSION: out.push_back(r.fusion_rank); break;
      case HIR_SYSTEM_CEILING: out.push_back(r.ceiling()); break;
      case HIR_SYSTEM_HYBRID:
        if (!r.routed) throw Error(ErrorCode::kInvalidArgument, "record '" + r.qid + "' has no routing decision");
        out.push_back(r.routed_rank);
        break;
      default: throw Error(ErrorCode::kInvalidArgument, "unknown system");
    }
  }
  return out;
}

}  // namespace

extern "C" {

const char* hir_version(void) { return "0.1.0"; }

const char* hir_last_error(void) { return g_last_error.c_str(); }

const char* hir_status_name(hir_status status) {
  switch (status) {
    case HIR_OK: return "ok";
    case HIR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HIR_ERR_IO: return "i/o error";
    case HIR_ERR_PARSE: return "parse error";
    case HIR_ERR_DUPLICATE_ID: return "duplicate id";
    case HIR_ERR_MISSING_FIELD: return "missing field";
    case HIR_ERR_FORMAT: return "format error";
    case HIR_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case HIR_ERR_EMPTY_INPUT: return "empty input";
    case HIR_ERR_DATA: return "data error";
    case HIR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void hir_string_free(char* s) { std::free(s); }

// ---- analyzer

hir_status hir_analyzer_new(hir_analyzer** out) {
  HIR_REQUIRE(out);
  return guard([&] { *out = new hir_analyzer(); });
}

hir_status hir_analyzer_set_lowercase(hir_analyzer* a, int enabled) {
  HIR_REQUIRE(a);
  a->cfg.lowercase = enabled != 0;
  return HIR_OK;
}

hir_status hir_analyzer_set_stem(hir_analyzer* a, int enabled) {
  HIR_REQUIRE(a);
  a->cfg.stem = enabled != 0;
  return HIR_OK;
}

hir_status hir_analyzer_set_min_count(hir_analyzer* a, size_t min_count) {
  HIR_REQUIRE(a);
  if (min_count == 0) return fail(HIR_ERR_INVALID_ARGUMENT, "min_count must be at least 1");
  a->cfg.min_count = min_count;
  return HIR_OK;
}

hir_status hir_analyzer_load_stopwords(hir_analyzer* a, const char* path) {
  HIR_REQUIRE(a);
  return guard([&] { a->cfg.stopwords = path ? load_stopwords(path) : std::set<std::string>{}; });
}

const char* hir_analyzer_hash(const hir_analyzer* a) {
  if (!a) return "";
  a->hash = a->cfg.hash();
  return a->hash.c_str();
}

hir_status hir_analyzer_tokenize(const hir_analyzer* a, const char* text, char** out) {
  HIR_REQUIRE(a && text && out);
  return guard([&] {
    std::string joined;
    for (const auto& t : tokenize(text, a->cfg)) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    *out = dup_string(joined);
  });
}

void hir_analyzer_free(hir_analyzer* a) { delete a; }

// ---- corpus / queries

hir_status hir_corpus_load(const char* path, hir_corpus** out) {
  HIR_REQUIRE(path && out);
  return guard([&] { *out = new hir_corpus{load_corpus(path)}; });
}

size_t hir_corpus_size(const hir_corpus* c) { return c ? c->corpus.size() : 0; }

void hir_corpus_free(hir_corpus* c) { delete c; }

hir_status hir_queries_load(const char* path, hir_queries** out) {
  HIR_REQUIRE(path && out);
  return guard([&] { *out = new hir_queries{load_queries(path)}; });
}

size_t hir_queries_size(const hir_queries* q) { return q ? q->queries.size() : 0; }

const char* hir_queries_qid(const hir_queries* q, size_t i) {
  if (!q || i >= q->queries.size()) return nullptr;
  return q->queries[i].qid.c_str();
}

hir_status hir_queries_validate(const hir_queries* q, const hir_corpus* c) {
  HIR_REQUIRE(q && c);
  return guard([&] { validate_gold_ids(c->corpus, q->queries); });
}

void hir_queries_free(hir_queries* q) { delete q; }

// ---- index

hir_status hir_index_build(const hir_corpus* c, const hir_analyzer* a, double k1, double b, hir_index** out) {
  HIR_REQUIRE(c && out);
  return guard([&] {
    const AnalyzerConfig cfg = a ? a->cfg : AnalyzerConfig::defaults();
    auto idx = InvertedIndex::build(c->corpus, cfg, Bm25Params{k1, b});
    *out = new hir_index{std::move(idx), cfg.hash()};
  });
}

hir_status hir_index_load(const char* path, hir_index** out) {
  HIR_REQUIRE(path && out);
  return guard([&] {
    auto idx = InvertedIndex::load(path);
    auto hash = idx.analyzer().hash();
    *out = new hir_index{std::move(idx), std::move(hash)};
  });
}

hir_status hir_index_save(const hir_index* idx, const char* path) {
  HIR_REQUIRE(idx && path);
  return guard([&] { idx->index.save(path); });
}

size_t hir_index_num_docs(const hir_index* idx) { return idx ? idx->index.n_docs() : 0; }

size_t hir_index_num_terms(const hir_index* idx) { return idx ? idx->index.n_terms() : 0; }

const char* hir_index_analyzer_hash(const hir_index* idx) { return idx ? idx->hash.c_str() : ""; }

hir_status hir_index_search(const hir_index* idx, const char* query, size_t k, hir_hits** out) {
  HIR_REQUIRE(idx && query && out);
  return guard([&] { *out = new hir_hits{idx->index.bm25_topk(query, k), std::nullopt}; });
}

void hir_index_free(hir_index* idx) { delete idx; }

// ---- embeddings

hir_status hir_embeddings_load(const char* vec_path, const char* ids_path, hir_embeddings** out) {
  HIR_REQUIRE(vec_path && ids_path && out);
  return guard([&] { *out = new hir_embeddings{EmbeddingStore::load(vec_path, ids_path)}; });
}

hir_status hir_embeddings_new(size_t dim, size_t count, const char* const* ids, const float* values,
                              hir_embeddings** out) {
  HIR_REQUIRE(out && (count == 0 || (ids && values)));
  return guard([&] {
    std::vector<std::string> id_list;
    id_list.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      if (!ids[i]) throw Error(ErrorCode::kInvalidArgument, "null embedding id");
      id_list.emplace_back(ids[i]);
    }
    std::vector<float> v(values, values + count * dim);
    *out = new hir_embeddings{EmbeddingStore(dim, std::move(id_list), std::move(v))};
  });
}

hir_status hir_embeddings_save(const hir_embeddings* e, const char* vec_path, const char* ids_path) {
  HIR_REQUIRE(e && vec_path && ids_path);
  return guard([&] { e->store.save(vec_path, ids_path); });
}

size_t hir_embeddings_dim(const hir_embeddings* e) { return e ? e->store.dim() : 0; }

size_t hir_embeddings_size(const hir_embeddings* e) { return e ? e->store.size() : 0; }

void hir_embeddings_free(hir_embeddings* e) { delete e; }

// ---- hits

size_t hir_hits_size(const hir_hits* h) { return h ? h->list.size() : 0; }

const char* hir_hits_id(const hir_hits* h, size_t i) {
  if (!h || i >= h->list.size()) return nullptr;
  return h->list[i].id.c_str();
}

double hir_hits_score(const hir_hits* h, size_t i) {
  if (!h || i >= h->list.size()) return 0.0;
  return h->list[i].score;
}

hir_route hir_hits_route(const hir_hits* h) {
  if (!h || !h->routed) return HIR_ROUTE_NONE;
  return *h->routed == Route::kSparse ? HIR_ROUTE_SPARSE : HIR_ROUTE_DENSE;
}

void hir_hits_free(hir_hits* h) { delete h; }

// ---- workbench

hir_status hir_workbench_new(const hir_index* idx, const hir_embeddings* docs, const hir_embeddings* queries, size_t k,
                             uint64_t dense_delay_us, hir_workbench** out) {
  HIR_REQUIRE(idx && docs && queries && out);
  return guard([&] {
    PipelineConfig cfg;
    cfg.k = k;
    cfg.dense_delay = std::chrono::microseconds(static_cast<std::int64_t>(dense_delay_us));
    *out = new hir_workbench{Workbench(idx->index, docs->store, queries->store, cfg)};
  });
}

hir_status hir_workbench_retrieve(const hir_workbench* wb, hir_system system, const hir_queries* q, size_t i,
                                  const hir_router* router, hir_hits** out) {
  HIR_REQUIRE(wb && q && out);
  if (i >= q->queries.size()) return fail(HIR_ERR_INVALID_ARGUMENT, "query index out of range");
  return guard([&] {
    auto r = wb->wb.retrieve(to_system(system), q->queries[i], router ? &router->model : nullptr);
    *out = new hir_hits{std::move(r.list), r.routed};
  });
}

hir_status hir_workbench_evaluate(const hir_workbench* wb, const hir_queries* q, const hir_router* router,
                                  hir_records** out) {
  HIR_REQUIRE(wb && q && out);
  return guard([&] { *out = new hir_records{wb->wb.evaluate_all(q->queries, router ? &router->model : nullptr)}; });
}

hir_status hir_workbench_time(const hir_workbench* wb, hir_system system, const hir_queries* q, size_t warmup,
                              const hir_router* router, hir_timing** out) {
  HIR_REQUIRE(wb && q && out);
  return guard([&] {
    *out = new hir_timing{wb->wb.time(to_system(system), q->queries, warmup, router ? &router->model : nullptr)};
  });
}

void hir_workbench_free(hir_workbench* wb) { delete wb; }

// ---- records

hir_status hir_records_load(const char* path, hir_records** out) {
  HIR_REQUIRE(path && out);
  return guard([&] { *out = new hir_records{load_records(path)}; });
}

hir_status hir_records_save(const hir_records* r, const char* path) {
  HIR_REQUIRE(r && path);
  return guard([&] { save_records(r->records, path); });
}

size_t hir_records_size(const hir_records* r) { return r ? r->records.size() : 0; }

hir_status hir_records_apply_router(hir_records* r, const hir_router* router) {
  HIR_REQUIRE(r && router);
  return guard([&] { apply_router(r->records, router->model); });
}

hir_status hir_records_mrr(const hir_records* r, hir_system system, double* out) {
  HIR_REQUIRE(r && out);
  return guard([&] { *out = mrr(ranks_of(r->records, system)); });
}

hir_status hir_records_bootstrap(const hir_records* r, hir_system a, hir_system b, size_t iters, uint64_t seed,
                                 double* p_value) {
  HIR_REQUIRE(r && p_value);
  return guard([&] {
    const auto ra = reciprocal_ranks(ranks_of(r->records, a));
    const auto rb = reciprocal_ranks(ranks_of(r->records, b));
    *p_value = bootstrap_test(ra, rb, iters, seed);
  });
}

hir_status hir_records_report(const hir_records* r, size_t bootstrap_iters, uint64_t seed, int as_text, char** out) {
  HIR_REQUIRE(r && out);
  return guard([&] {
    const auto report = make_eval_report(r->records, bootstrap_iters, seed);
    *out = dup_string(as_text ? report.to_text() : report.to_csv());
  });
}

hir_status hir_records_routing_stats(const hir_records* r, char** csv) {
  HIR_REQUIRE(r && csv);
  return guard([&] { *csv = dup_string(routing_stats_csv(routing_report(r->records))); });
}

hir_status hir_records_histogram(const hir_records* r, size_t bins, char** csv) {
  HIR_REQUIRE(r && csv);
  return guard([&] { *csv = dup_string(histogram_report(r->records, bins).to_csv()); });
}

void hir_records_free(hir_records* r) { delete r; }

// ---- router

hir_status hir_router_fit_threshold(const hir_records* dev, hir_router** out) {
  HIR_REQUIRE(dev && out);
  return guard([&] {
    if (dev->records.empty()) throw Error(ErrorCode::kEmptyInput, "no dev records to fit on");
    *out = new hir_router{fit_router_threshold(dev->records)};
  });
}

hir_status hir_router_fit_logreg(const hir_records* dev, const char* source, const char* topk, double learning_rate,
                                 size_t epochs, double l2, hir_router** out) {
  HIR_REQUIRE(dev && source && topk && out);
  return guard([&] {
    if (dev->records.empty()) throw Error(ErrorCode::kEmptyInput, "no dev records to fit on");
    LogRegConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.epochs = epochs;
    cfg.l2 = l2;
    *out = new hir_router{fit_router_logreg(dev->records, FeatureSpec::parse(source, topk), cfg).model};
  });
}

hir_status hir_router_bind(hir_router* router, const hir_index* idx) {
  HIR_REQUIRE(router && idx);
  router->model.analyzer_hash = idx->hash;
  return HIR_OK;
}

hir_status hir_router_check(const hir_router* router, const hir_index* idx) {
  HIR_REQUIRE(router && idx);
  return guard([&] { check_router_compatible(router->model, idx->index); });
}

hir_status hir_router_load(const char* path, hir_router** out) {
  HIR_REQUIRE(path && out);
  return guard([&] { *out = new hir_router{RouterModel::load(path)}; });
}

hir_status hir_router_save(const hir_router* router, const char* path) {
  HIR_REQUIRE(router && path);
  return guard([&] { router->model.save(path); });
}

hir_status hir_router_to_json(const hir_router* router, char** out) {
  HIR_REQUIRE(router && out);
  return guard([&] { *out = dup_string(router->model.to_json()); });
}

void hir_router_free(hir_router* router) { delete router; }

// ---- timing

double hir_timing_total(const hir_timing* t) { return t ? t->report.total : 0.0; }

size_t hir_timing_count(const hir_timing* t) { return t ? t->report.durations.size() : 0; }

hir_status hir_timing_csv(const hir_timing* t, char** out) {
  HIR_REQUIRE(t && out);
  return guard([&] { *out = dup_string(t->report.to_csv()); });
}

void hir_timing_free(hir_timing* t) { delete t; }

// ---- probe

hir_status hir_probe_build(const hir_corpus* c, const hir_queries* q, const hir_analyzer* a, const char* input_kind,
                           const hir_embeddings* query_vectors, double dev_fraction, uint64_t seed,
                           hir_probe_data** out, size_t* skipped) {
  HIR_REQUIRE(c && q && input_kind && out);
  return guard([&] {
    const Dataset data{c->corpus, q->queries};
    const AnalyzerConfig cfg = a ? a->cfg : AnalyzerConfig::defaults();
    *out = new hir_probe_data{build_probe_dataset(data, cfg, parse_probe_input(input_kind),
                                                  query_vectors ? &query_vectors->store : nullptr, dev_fraction, seed,
                                                  skipped)};
  });
}

hir_status hir_probe_data_save(const hir_probe_data* d, const char* path) {
  HIR_REQUIRE(d && path);
  return guard([&] { save_probe_dataset(d->data, path); });
}

hir_status hir_probe_data_load(const char* path, const hir_embeddings* query_vectors, hir_probe_data** out) {
  HIR_REQUIRE(path && out);
  return guard([&] {
    *out = new hir_probe_data{load_probe_dataset(path, query_vectors ? &query_vectors->store : nullptr)};
  });
}

size_t hir_probe_data_train_size(const hir_probe_data* d) { return d ? d->data.train.size() : 0; }

size_t hir_probe_data_dev_size(const hir_probe_data* d) { return d ? d->data.dev.size() : 0; }

void hir_probe_data_free(hir_probe_data* d) { delete d; }

hir_status hir_probe_train(const hir_probe_data* d, const char* control, size_t epochs, double learning_rate,
                           uint64_t seed, hir_probe_model** model, char** metrics_row) {
  HIR_REQUIRE(d && control);
  return guard([&] {
    ProbeTrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = learning_rate;
    cfg.seed = seed;
    const auto ctl = parse_probe_control(control);
    auto run = train_probe(d->data.train, d->data.dev, d->data.n_vocab, d->data.input_dim, d->data.kind, ctl, cfg);
    if (metrics_row) *metrics_row = dup_string(probe_metrics_csv_row(d->data.kind, ctl, run.dev_metrics));
    if (model) *model = new hir_probe_model{std::move(run.model)};
  });
}

hir_status hir_probe_evaluate(const hir_probe_model* m, const hir_probe_data* d, uint64_t seed, char** metrics_row) {
  HIR_REQUIRE(m && d && metrics_row);
  return guard([&] {
    if (m->model.n_vocab() != d->data.n_vocab || m->model.input_dim() != d->data.input_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "probe model does not match the dataset's shape");
    }
    auto train = d->data.train;
    auto dev = d->data.dev;
    apply_probe_control(train, dev, m->model.control(), d->data.input_dim, seed);
    auto metrics = probe_metrics(m->model, dev);
    metrics.seed = seed;
    *metrics_row = dup_string(probe_metrics_csv_row(d->data.kind, m->model.control(), metrics));
  });
}

const char* hir_probe_metrics_header(void) {
  static const std::string header = probe_metrics_csv_header();
  return header.c_str();
}

hir_status hir_probe_model_save(const hir_probe_model* m, const char* path) {
  HIR_REQUIRE(m && path);
  return guard([&] { m->model.save(path); });
}

hir_status hir_probe_model_load(const char* path, hir_probe_model** out) {
  HIR_REQUIRE(path && out);
  return guard([&] { *out = new hir_probe_model{ProbeModel::load(path)}; });
}

void hir_probe_model_free(hir_probe_model* m) { delete m; }

// ---- synthetic workload

hir_status hir_synth_write(const char* dir, size_t n_docs, size_t n_queries, uint64_t seed) {
  HIR_REQUIRE(dir);
  return guard([&] {
    SynthConfig cfg;
    cfg.n_docs = n_docs;
    cfg.n_queries = n_queries;
    cfg.seed = seed;
    write_synthetic_workload(make_synthetic_workload(cfg), dir);
  });
}

}  // extern "C"

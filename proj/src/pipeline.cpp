#include "pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "error.hpp"

namespace hybridir {

const char* system_name(System s) {
  switch (s) {
    case System::kSparse: return "sparse";
    case System::kDense: return "dense";
    case System::kFusion: return "fusion";
    case System::kHybrid: return "hybrid";
  }
  return "sparse";
}

System parse_system(const std::string& name) {
  if (name == "sparse") return System::kSparse;
  if (name == "dense") return System::kDense;
  if (name == "fusion") return System::kFusion;
  if (name == "hybrid") return System::kHybrid;
  throw Error(ErrorCode::kInvalidArgument, "unknown system '" + name + "' (sparse|dense|fusion|hybrid)");
}

Workbench::Workbench(const InvertedIndex& index, const EmbeddingStore& doc_vectors, const EmbeddingStore& query_vectors,
                     PipelineConfig cfg)
    : index_(index), docs_(doc_vectors), queries_(query_vectors), cfg_(cfg) {
  if (cfg_.k == 0 || cfg_.feature_depth == 0) throw Error(ErrorCode::kInvalidArgument, "k and feature depth must be positive");
  if (docs_.size() > 0 && queries_.size() > 0 && docs_.dim() != queries_.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query and document embeddings differ in dimension");
  }
}

std::span<const float> Workbench::query_vector(const Query& q) const {
  const auto row = queries_.find(q.qid);
  if (!row) throw Error(ErrorCode::kData, "no query embedding for qid '" + q.qid + "'");
  return queries_.row(*row);
}

FeatureLadder Workbench::ladder(const ScoredList& list) const {
  std::vector<double> scores;
  const std::size_t n = std::min(list.size(), cfg_.feature_depth);
  scores.reserve(n);
  for (std::size_t i = 0; i < n; ++i) scores.push_back(list[i].score);
  return extract_features(softmax_normalize(scores, cfg_.feature_depth));
}

ScoredList Workbench::sparse(const Query& q) const {
  return index_.bm25_topk(q.text, std::max(cfg_.k, cfg_.feature_depth));
}

ScoredList Workbench::dense(const Query& q) const {
  if (cfg_.dense_delay.count() > 0) std::this_thread::sleep_for(cfg_.dense_delay);
  return dense_topk(docs_, query_vector(q), std::max(cfg_.k, cfg_.feature_depth));
}

ScoredList Workbench::fusion(const Query& q) const {
  auto s = sparse(q);
  auto d = dense(q);
  truncate_topk(s, cfg_.k);
  truncate_topk(d, cfg_.k);
  return sum_fusion(s, d, cfg_.k);
}

Retrieval Workbench::hybrid(const Query& q, const RouterModel& router) const {
  auto s = sparse(q);
  std::optional<ScoredList> d;
  FeatureLadder dense_ladder{};
  if (router.feature_spec.source != FeatureSource::kSparse) {
    d = dense(q);
    dense_ladder = ladder(*d);
  }
  const auto features = feature_variants(ladder(s), dense_ladder, router.feature_spec);
  Retrieval out;
  out.routed = route(router, features);
  if (*out.routed == Route::kSparse) {
    out.list = std::move(s);
  } else {
    out.list = d ? std::move(*d) : dense(q);
  }
  truncate_topk(out.list, cfg_.k);
  return out;
}

Retrieval Workbench::retrieve(System system, const Query& q, const RouterModel* router) const {
  Retrieval out;
  switch (system) {
    case System::kSparse: out.list = sparse(q); break;
    case System::kDense: out.list = dense(q); break;
    case System::kFusion: return Retrieval{fusion(q), std::nullopt};
    case System::kHybrid:
      if (!router) throw Error(ErrorCode::kInvalidArgument, "hybrid retrieval needs a router model");
      return hybrid(q, *router);
  }
  truncate_topk(out.list, cfg_.k);
  return out;
}

RankRecord Workbench::evaluate(const Query& q, const RouterModel* router) const {
  auto s = sparse(q);
  auto d = dense(q);
  RankRecord rec;
  rec.qid = q.qid;
  rec.sparse_ladder = ladder(s);
  rec.dense_ladder = ladder(d);
  truncate_topk(s, cfg_.k);
  truncate_topk(d, cfg_.k);
  rec.sparse_rank = gold_rank(s, q.gold_id);
  rec.dense_rank = gold_rank(d, q.gold_id);
  rec.fusion_rank = gold_rank(sum_fusion(s, d, cfg_.k), q.gold_id);
  if (router) {
    rec.routed = route(*router, feature_variants(rec.sparse_ladder, rec.dense_ladder, router->feature_spec));
    rec.routed_rank = *rec.routed == Route::kSparse ? rec.sparse_rank : rec.dense_rank;
  }
  return rec;
}

std::vector<RankRecord> Workbench::evaluate_all(std::span<const Query> queries, const RouterModel* router) const {
  std::vector<RankRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(evaluate(q, router));
  return out;
}

TimingReport Workbench::time(System system, std::span<const Query> queries, std::size_t warmup,
                             const RouterModel* router) const {
  if (system == System::kHybrid && !router) throw Error(ErrorCode::kInvalidArgument, "hybrid timing needs a router model");
  std::vector<std::size_t> body(queries.size());
  std::iota(body.begin(), body.end(), std::size_t{0});
  std::size_t sink = 0;
  auto report = time_queries(system_name(system), body, warmup, body, [&](std::size_t i) {
    sink += retrieve(system, queries[i], router).list.size();
  });
  (void)sink;
  return report;
}

void check_router_compatible(const RouterModel& router, const InvertedIndex& index) {
  if (!router.analyzer_hash.empty() && router.analyzer_hash != index.analyzer().hash()) {
    throw Error(ErrorCode::kData, "router was fitted with analyzer " + router.analyzer_hash + " but the index uses " +
                                      index.analyzer().hash());
  }
}

void apply_router(std::vector<RankRecord>& records, const RouterModel& router) {
  for (auto& r : records) {
    r.routed = route(router, feature_variants(r.sparse_ladder, r.dense_ladder, router.feature_spec));
    r.routed_rank = *r.routed == Route::kSparse ? r.sparse_rank : r.dense_rank;
  }
}

RouterModel fit_router_threshold(std::span<const RankRecord> dev) {
  std::vector<double> f0;
  f0.reserve(dev.size());
  for (const auto& r : dev) f0.push_back(r.sparse_ladder[0]);
  return fit_threshold(f0, [&](std::span<const Route> routes) {
    double total = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      total += reciprocal_rank(routes[i] == Route::kSparse ? dev[i].sparse_rank : dev[i].dense_rank);
    }
    return total / static_cast<double>(dev.size());
  });
}

FeatureMatrix record_features(std::span<const RankRecord> records, const FeatureSpec& spec) {
  FeatureMatrix x;
  x.reserve(records.size());
  for (const auto& r : records) x.push_back(feature_variants(r.sparse_ladder, r.dense_ladder, spec));
  return x;
}

std::vector<int> record_labels(std::span<const RankRecord> records) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(static_cast<int>(r.label()));
  return y;
}

LogRegFit fit_router_logreg(std::span<const RankRecord> dev, const FeatureSpec& spec, const LogRegConfig& cfg) {
  auto fit = fit_logreg(record_features(dev, spec), record_labels(dev), cfg);
  fit.model.feature_spec = spec;
  return fit;
}

}  // namespace hybridir

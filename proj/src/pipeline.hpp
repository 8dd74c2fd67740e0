#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "dense_store.hpp"
#include "evaluation.hpp"
#include "router.hpp"
#include "sparse_index.hpp"

namespace hybridir {

enum class System { kSparse, kDense, kFusion, kHybrid };

const char* system_name(System s);
System parse_system(const std::string& name);

struct PipelineConfig {
  std::size_t k = 1000;                     // retrieval depth for ranking and MRR
  std::size_t feature_depth = kFeatureDepth;  // scores fed to the softmax ladder
  // Added to every dense call; stands in for query encoding cost.
  std::chrono::microseconds dense_delay{0};
};

struct Retrieval {
  ScoredList list;
  std::optional<Route> routed;
};

// Runs the sparse, dense, fusion and routed systems over one shared index and
// embedding pair. Query vectors are looked up by qid in the query store.
class Workbench {
 public:
  Workbench(const InvertedIndex& index, const EmbeddingStore& doc_vectors, const EmbeddingStore& query_vectors,
            PipelineConfig cfg = {});

  ScoredList sparse(const Query& q) const;
  ScoredList dense(const Query& q) const;
  ScoredList fusion(const Query& q) const;
  Retrieval hybrid(const Query& q, const RouterModel& router) const;
  Retrieval retrieve(System system, const Query& q, const RouterModel* router) const;

  // Ranks of every system for one query; routed fields are set when a router is given.
  RankRecord evaluate(const Query& q, const RouterModel* router) const;
  std::vector<RankRecord> evaluate_all(std::span<const Query> queries, const RouterModel* router) const;

  TimingReport time(System system, std::span<const Query> queries, std::size_t warmup,
                    const RouterModel* router) const;

  const PipelineConfig& config() const noexcept { return cfg_; }

 private:
  std::span<const float> query_vector(const Query& q) const;
  FeatureLadder ladder(const ScoredList& list) const;

  const InvertedIndex& index_;
  const EmbeddingStore& docs_;
  const EmbeddingStore& queries_;
  PipelineConfig cfg_;
};

// Rejects a router built against a different analyzer (kData).
void check_router_compatible(const RouterModel& router, const InvertedIndex& index);

// Fills routed / routed_rank of each record from its stored ranks and ladders.
void apply_router(std::vector<RankRecord>& records, const RouterModel& router);

// Threshold grid search using each record's top normalized BM25 score.
RouterModel fit_router_threshold(std::span<const RankRecord> dev);

// Logistic regression on oracle labels (make_label) over the chosen features.
LogRegFit fit_router_logreg(std::span<const RankRecord> dev, const FeatureSpec& spec, const LogRegConfig& cfg = {});

FeatureMatrix record_features(std::span<const RankRecord> records, const FeatureSpec& spec);
std::vector<int> record_labels(std::span<const RankRecord> records);

}  // namespace hybridir

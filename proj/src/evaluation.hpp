#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "router.hpp"
#include "scored_list.hpp"

namespace hybridir {

// 1-based position of gold_id in list, or nullopt.
Rank gold_rank(const ScoredList& list, const std::string& gold_id);

inline double reciprocal_rank(Rank r) { return r ? 1.0 / static_cast<double>(*r) : 0.0; }

std::vector<double> reciprocal_ranks(std::span<const Rank> ranks);

// Mean reciprocal rank; absent ranks contribute 0. Throws on empty input.
double mrr(std::span<const Rank> ranks);

// One-sided paired bootstrap. Resamples query indices with replacement `iters`
// times and returns the fraction of resamples where mean(a) - mean(b) <= 0.
double bootstrap_test(std::span<const double> rr_a, std::span<const double> rr_b, std::size_t iters = 10000,
                      std::uint64_t seed = 0);

// Per-query outcome of every system. Ladders are kept so routers can be fitted
// and histograms drawn from persisted records.
struct RankRecord {
  std::string qid;
  Rank sparse_rank;
  Rank dense_rank;
  Rank fusion_rank;
  std::optional<Route> routed;
  Rank routed_rank;
  FeatureLadder sparse_ladder{};
  FeatureLadder dense_ladder{};

  Rank ceiling() const { return ceiling_rank(sparse_rank, dense_rank); }
  Route label() const { return make_label(sparse_rank, dense_rank); }
};

void save_records(const std::vector<RankRecord>& records, const std::string& path);
std::vector<RankRecord> load_records(const std::string& path);

struct Comparison {
  std::size_t improved = 0;
  std::size_t worse = 0;
  std::size_t unchanged = 0;
};

// Routed system vs. a baseline; an absent rank is worse than any present one.
Comparison compare_ranks(std::span<const Rank> routed, std::span<const Rank> baseline);

struct RoutingStats {
  std::size_t n = 0;
  std::size_t routed_sparse = 0;
  std::size_t routed_dense = 0;
  Comparison vs_sparse;
  Comparison vs_dense;
};

// Records without a routing decision are rejected (kInvalidArgument).
RoutingStats routing_report(std::span<const RankRecord> records);

struct EvalReport {
  std::size_t n = 0;
  double mrr_sparse = 0.0;
  double mrr_dense = 0.0;
  double mrr_fusion = 0.0;
  double mrr_ceiling = 0.0;
  std::optional<double> mrr_hybrid;
  std::optional<RoutingStats> routing;
  std::optional<double> p_vs_sparse;  // hybrid better than sparse
  std::optional<double> p_vs_dense;   // hybrid better than dense
  std::size_t bootstrap_iters = 0;

  std::string to_csv() const;
  std::string to_text() const;
};

// Bootstrap p-values are computed when every record carries a routed rank.
EvalReport make_eval_report(std::span<const RankRecord> records, std::size_t bootstrap_iters, std::uint64_t seed);

std::string routing_stats_csv(const RoutingStats& s);

struct Histogram {
  std::vector<std::size_t> sparse_no_worse;
  std::vector<std::size_t> dense_better;

  std::size_t total() const;
  std::string to_csv() const;
};

// Buckets queries by their top normalized score into `bins` equal-width bins
// over [0, 1], the last bin closed on the right.
Histogram histogram_report(std::span<const RankRecord> records, std::span<const double> top_scores, std::size_t bins = 10);

// Convenience: top_scores taken from each record's sparse ladder rung 0.
Histogram histogram_report(std::span<const RankRecord> records, std::size_t bins = 10);

// `m` distinct indices from [0, n), sorted, chosen by a seeded shuffle.
std::vector<std::size_t> sample_dev(std::size_t n, std::size_t m, std::uint64_t seed);

// Fold id in [0, folds) for each of n items; sizes differ by at most one.
std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

struct TimingReport {
  std::string system;
  std::vector<double> durations;  // seconds, timed queries only
  double total = 0.0;
  std::size_t warmup = 0;
  double clock_resolution = 0.0;  // seconds per steady_clock tick

  std::string to_csv() const;
};

// Runs `warmup` untimed calls (cycling through warmup_pool), then times each
// body query end to end with the monotonic clock.
TimingReport time_queries(const std::string& system, std::span<const std::size_t> body, std::size_t warmup,
                          std::span<const std::size_t> warmup_pool, const std::function<void(std::size_t)>& run_query);

}  // namespace hybridir

#include "evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace hybridir {
namespace {

using nlohmann::json;

json rank_json(Rank r) { return r ? json(*r) : json(nullptr); }

Rank rank_from_json(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  const auto v = it->get<long long>();
  if (v < 1) throw Error(ErrorCode::kFormat, std::string("rank field '") + field + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

// Absent ranks compare as +infinity.
bool better(Rank a, Rank b) {
  if (!a) return false;
  if (!b) return true;
  return *a < *b;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_p(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

Rank gold_rank(const ScoredList& list, const std::string& gold_id) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].id == gold_id) return i + 1;
  }
  return std::nullopt;
}

std::vector<double> reciprocal_ranks(std::span<const Rank> ranks) {
  std::vector<double> out;
  out.reserve(ranks.size());
  for (const auto r : ranks) out.push_back(reciprocal_rank(r));
  return out;
}

double mrr(std::span<const Rank> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kEmptyInput, "MRR of an empty rank list is undefined");
  double total = 0.0;
  for (const auto r : ranks) total += reciprocal_rank(r);
  return total / static_cast<double>(ranks.size());
}

double bootstrap_test(std::span<const double> rr_a, std::span<const double> rr_b, std::size_t iters, std::uint64_t seed) {
  if (rr_a.size() != rr_b.size()) throw Error(ErrorCode::kDimensionMismatch, "bootstrap inputs must be paired");
  if (rr_a.empty()) throw Error(ErrorCode::kEmptyInput, "bootstrap needs at least one query");
  if (iters == 0) throw Error(ErrorCode::kInvalidArgument, "bootstrap needs at least one iteration");
  const std::size_t n = rr_a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = rr_a[i] - rr_b[i];

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t not_better = 0;
  for (std::size_t it = 0; it < iters; ++it) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diff[pick(rng)];
    if (s <= 0.0) ++not_better;
  }
  return static_cast<double>(not_better) / static_cast<double>(iters);
}

void save_records(const std::vector<RankRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["qid"] = r.qid;
    j["sparse_rank"] = rank_json(r.sparse_rank);
    j["dense_rank"] = rank_json(r.dense_rank);
    j["fusion_rank"] = rank_json(r.fusion_rank);
    j["routed"] = r.routed ? json(route_name(*r.routed)) : json(nullptr);
    j["routed_rank"] = rank_json(r.routed_rank);
    j["sparse_ladder"] = r.sparse_ladder;
    j["dense_ladder"] = r.dense_ladder;
    out << j.dump() << '\n';
  }
}

std::vector<RankRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<RankRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      RankRecord r;
      r.qid = j.at("qid").get<std::string>();
      r.sparse_rank = rank_from_json(j, "sparse_rank");
      r.dense_rank = rank_from_json(j, "dense_rank");
      r.fusion_rank = rank_from_json(j, "fusion_rank");
      r.routed_rank = rank_from_json(j, "routed_rank");
      if (const auto it = j.find("routed"); it != j.end() && !it->is_null()) {
        const auto s = it->get<std::string>();
        if (s != "sparse" && s != "dense") throw Error(ErrorCode::kFormat, "routed must be sparse|dense");
        r.routed = s == "dense" ? Route::kDense : Route::kSparse;
      }
      if (j.contains("sparse_ladder")) r.sparse_ladder = j.at("sparse_ladder").get<FeatureLadder>();
      if (j.contains("dense_ladder")) r.dense_ladder = j.at("dense_ladder").get<FeatureLadder>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

Comparison compare_ranks(std::span<const Rank> routed, std::span<const Rank> baseline) {
  if (routed.size() != baseline.size()) throw Error(ErrorCode::kDimensionMismatch, "rank lists must be paired");
  Comparison c;
  for (std::size_t i = 0; i < routed.size(); ++i) {
    if (better(routed[i], baseline[i])) {
      ++c.improved;
    } else if (better(baseline[i], routed[i])) {
      ++c.worse;
    } else {
      ++c.unchanged;
    }
  }
  return c;
}

RoutingStats routing_report(std::span<const RankRecord> records) {
  RoutingStats s;
  s.n = records.size();
  std::vector<Rank> routed, sparse, dense;
  for (const auto& r : records) {
    if (!r.routed) throw Error(ErrorCode::kInvalidArgument, "record '" + r.qid + "' has no routing decision");
    (*r.routed == Route::kSparse ? s.routed_sparse : s.routed_dense)++;
    routed.push_back(r.routed_rank);
    sparse.push_back(r.sparse_rank);
    dense.push_back(r.dense_rank);
  }
  s.vs_sparse = compare_ranks(routed, sparse);
  s.vs_dense = compare_ranks(routed, dense);
  return s;
}

EvalReport make_eval_report(std::span<const RankRecord> records, std::size_t bootstrap_iters, std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "no records to evaluate");
  EvalReport rep;
  rep.n = records.size();
  std::vector<Rank> sparse, dense, fusion, ceiling, routed;
  bool all_routed = true;
  for (const auto& r : records) {
    sparse.push_back(r.sparse_rank);
    dense.push_back(r.dense_rank);
    fusion.push_back(r.fusion_rank);
    ceiling.push_back(r.ceiling());
    routed.push_back(r.routed_rank);
    all_routed = all_routed && r.routed.has_value();
  }
  rep.mrr_sparse = mrr(sparse);
  rep.mrr_dense = mrr(dense);
  rep.mrr_fusion = mrr(fusion);
  rep.mrr_ceiling = mrr(ceiling);
  if (all_routed) {
    rep.mrr_hybrid = mrr(routed);
    rep.routing = routing_report(records);
    if (bootstrap_iters > 0) {
      const auto rr_h = reciprocal_ranks(routed);
      rep.p_vs_sparse = bootstrap_test(rr_h, reciprocal_ranks(sparse), bootstrap_iters, seed);
      rep.p_vs_dense = bootstrap_test(rr_h, reciprocal_ranks(dense), bootstrap_iters, seed);
      rep.bootstrap_iters = bootstrap_iters;
    }
  }
  return rep;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "metric,value\n";
  os << "n," << n << "\n";
  os << "mrr_sparse," << fmt(mrr_sparse) << "\n";
  os << "mrr_dense," << fmt(mrr_dense) << "\n";
  os << "mrr_fusion," << fmt(mrr_fusion) << "\n";
  if (mrr_hybrid) os << "mrr_hybrid," << fmt(*mrr_hybrid) << "\n";
  os << "mrr_ceiling," << fmt(mrr_ceiling) << "\n";
  if (routing) {
    os << "routed_sparse," << routing->routed_sparse << "\n";
    os << "routed_dense," << routing->routed_dense << "\n";
  }
  if (p_vs_sparse) os << "p_hybrid_vs_sparse," << fmt_p(*p_vs_sparse) << "\n";
  if (p_vs_dense) os << "p_hybrid_vs_dense," << fmt_p(*p_vs_dense) << "\n";
  if (bootstrap_iters) os << "bootstrap_iters," << bootstrap_iters << "\n";
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "queries          " << n << "\n";
  os << "MRR sparse       " << fmt(mrr_sparse) << "\n";
  os << "MRR dense        " << fmt(mrr_dense) << "\n";
  os << "MRR sum-fusion   " << fmt(mrr_fusion) << "\n";
  if (mrr_hybrid) os << "MRR hybrid       " << fmt(*mrr_hybrid) << "\n";
  os << "MRR ceiling      " << fmt(mrr_ceiling) << "\n";
  if (routing) {
    os << "routed sparse    " << routing->routed_sparse << "\n";
    os << "routed dense     " << routing->routed_dense << "\n";
  }
  if (p_vs_sparse && p_vs_dense) {
    os << "bootstrap (" << bootstrap_iters << " iters) p vs sparse " << fmt_p(*p_vs_sparse) << ", p vs dense "
       << fmt_p(*p_vs_dense) << "\n";
  }
  return os.str();
}

std::string routing_stats_csv(const RoutingStats& s) {
  std::ostringstream os;
  os << "statistic,value\n";
  os << "n," << s.n << "\n";
  os << "routed_sparse," << s.routed_sparse << "\n";
  os << "routed_dense," << s.routed_dense << "\n";
  os << "improved_vs_sparse," << s.vs_sparse.improved << "\n";
  os << "worse_vs_sparse," << s.vs_sparse.worse << "\n";
  os << "unchanged_vs_sparse," << s.vs_sparse.unchanged << "\n";
  os << "improved_vs_dense," << s.vs_dense.improved << "\n";
  os << "worse_vs_dense," << s.vs_dense.worse << "\n";
  os << "unchanged_vs_dense," << s.vs_dense.unchanged << "\n";
  return os.str();
}

std::size_t Histogram::total() const {
  return std::accumulate(sparse_no_worse.begin(), sparse_no_worse.end(), std::size_t{0}) +
         std::accumulate(dense_better.begin(), dense_better.end(), std::size_t{0});
}

std::string Histogram::to_csv() const {
  std::ostringstream os;
  os << "bin_lo,bin_hi,sparse_no_worse,dense_better\n";
  const std::size_t bins = sparse_no_worse.size();
  for (std::size_t i = 0; i < bins; ++i) {
    char lo[32], hi[32];
    std::snprintf(lo, sizeof(lo), "%.2f", static_cast<double>(i) / static_cast<double>(bins));
    std::snprintf(hi, sizeof(hi), "%.2f", static_cast<double>(i + 1) / static_cast<double>(bins));
    os << lo << "," << hi << "," << sparse_no_worse[i] << "," << dense_better[i] << "\n";
  }
  return os.str();
}

Histogram histogram_report(std::span<const RankRecord> records, std::span<const double> top_scores, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  if (records.size() != top_scores.size()) throw Error(ErrorCode::kDimensionMismatch, "one top score per record required");
  Histogram h;
  h.sparse_no_worse.assign(bins, 0);
  h.dense_better.assign(bins, 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double f0 = std::clamp(top_scores[i], 0.0, 1.0);
    auto bin = static_cast<std::size_t>(f0 * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    (records[i].label() == Route::kSparse ? h.sparse_no_worse : h.dense_better)[bin]++;
  }
  return h;
}

Histogram histogram_report(std::span<const RankRecord> records, std::size_t bins) {
  std::vector<double> f0;
  f0.reserve(records.size());
  for (const auto& r : records) f0.push_back(r.sparse_ladder[0]);
  return histogram_report(records, f0, bins);
}

std::vector<std::size_t> sample_dev(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m > n) throw Error(ErrorCode::kInvalidArgument, "cannot sample more dev queries than exist");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates keeps the draw independent of the standard library's shuffle.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds == 0) throw Error(ErrorCode::kInvalidArgument, "fold count must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[perm[pos]] = pos % folds;
  return fold;
}

std::string TimingReport::to_csv() const {
  std::ostringstream os;
  char res[64];
  std::snprintf(res, sizeof(res), "%.3g", clock_resolution);
  os << "# clock=steady_clock resolution_s=" << res << " warmup=" << warmup << "\n";
  os << "system,query_index,seconds\n";
  for (std::size_t i = 0; i < durations.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9f", durations[i]);
    os << system << "," << i << "," << buf << "\n";
  }
  char tot[64];
  std::snprintf(tot, sizeof(tot), "%.9f", total);
  os << system << ",total," << tot << "\n";
  return os.str();
}

TimingReport time_queries(const std::string& system, std::span<const std::size_t> body, std::size_t warmup,
                          std::span<const std::size_t> warmup_pool, const std::function<void(std::size_t)>& run_query) {
  using clock = std::chrono::steady_clock;
  TimingReport rep;
  rep.system = system;
  rep.warmup = warmup;
  rep.clock_resolution =
      static_cast<double>(clock::period::num) / static_cast<double>(clock::period::den);
  if (warmup > 0 && warmup_pool.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "warm-up requested without any warm-up queries");
  }
  for (std::size_t i = 0; i < warmup; ++i) run_query(warmup_pool[i % warmup_pool.size()]);
  rep.durations.reserve(body.size());
  for (const auto q : body) {
    const auto t0 = clock::now();
    run_query(q);
    const auto t1 = clock::now();
    rep.durations.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  rep.total = std::accumulate(rep.durations.begin(), rep.durations.end(), 0.0);
  return rep;
}

}  // namespace hybridir

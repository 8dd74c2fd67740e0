#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "error.hpp"
#include "evaluation.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace hybridir;

namespace {

RankRecord rec(std::string qid, Rank s, Rank d, std::optional<Route> routed = std::nullopt) {
  RankRecord r;
  r.qid = std::move(qid);
  r.sparse_rank = s;
  r.dense_rank = d;
  r.fusion_rank = s;
  r.routed = routed;
  if (routed) r.routed_rank = *routed == Route::kSparse ? s : d;
  return r;
}

}  // namespace

TEST_CASE("gold_rank and MRR") {
  const ScoredList l{{"a", 3}, {"b", 2}, {"c", 1}};
  CHECK(gold_rank(l, "a") == 1u);
  CHECK(gold_rank(l, "c") == 3u);
  CHECK(gold_rank(l, "z") == std::nullopt);

  const std::vector<Rank> r{1, 2, 4};
  CHECK(mrr(r) == 7.0 / 12.0);
  const std::vector<Rank> absent{std::nullopt};
  CHECK(mrr(absent) == 0.0);
  const std::vector<Rank> mixed{1, std::nullopt};
  CHECK(mrr(mixed) == 0.5);
  CHECK_THROWS_AS(mrr(std::vector<Rank>{}), Error);
}

TEST_CASE("bootstrap examples") {
  const std::vector<double> x{0.5, 1.0, 0.25, 0.0, 1.0};
  CHECK(bootstrap_test(x, x, 1000, 3) == 1.0);
  const std::vector<double> one(50, 1.0), half(50, 0.5);
  CHECK(bootstrap_test(one, half, 1000, 3) == 0.0);
  CHECK(bootstrap_test(half, one, 1000, 3) == 1.0);
  const std::vector<double> y{0.25, 1.0, 0.5, 0.0, 0.5};
  CHECK(bootstrap_test(x, y, 500, 11) == bootstrap_test(x, y, 500, 11));
  CHECK_THROWS_AS(bootstrap_test(x, one, 100, 0), Error);
}

TEST_CASE("bootstrap detects a real 0.05 gap") {
  std::size_t significant = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    // Paired systems: a = b + 0.05 + per-query noise.
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> base(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.25);
    std::vector<double> ra(1000), rb(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      rb[i] = base(rng);
      ra[i] = rb[i] + 0.05 + noise(rng);
    }
    if (bootstrap_test(ra, rb, 2000, seed) < 0.05) ++significant;
  }
  CHECK(significant >= 95);
}

TEST_CASE("routing_report") {
  std::vector<RankRecord> all_sparse;
  for (int i = 0; i < 5; ++i) all_sparse.push_back(rec("q" + std::to_string(i), 1 + i, 2, Route::kSparse));
  const auto s = routing_report(all_sparse);
  CHECK(s.routed_sparse == 5);
  CHECK(s.routed_dense == 0);
  CHECK(s.vs_sparse.unchanged == 5);
  CHECK(s.vs_sparse.improved == 0);
  CHECK(s.vs_sparse.worse == 0);

  // q1 routed to better dense, q2 routed to worse dense, q3 sparse present vs dense absent, q4 tie.
  const std::vector<RankRecord> four{
      rec("q1", 5, 1, Route::kDense),
      rec("q2", 1, 3, Route::kDense),
      rec("q3", 2, std::nullopt, Route::kSparse),
      rec("q4", 2, 2, Route::kSparse),
  };
  const auto f = routing_report(four);
  CHECK(f.n == 4);
  CHECK(f.routed_sparse == 2);
  CHECK(f.routed_dense == 2);
  CHECK(f.vs_sparse.improved == 1);
  CHECK(f.vs_sparse.worse == 1);
  CHECK(f.vs_sparse.unchanged == 2);
  CHECK(f.vs_dense.improved == 1);
  CHECK(f.vs_dense.worse == 0);
  CHECK(f.vs_dense.unchanged == 3);

  std::vector<RankRecord> unrouted{rec("q1", 1, 1)};
  CHECK_THROWS_AS(routing_report(unrouted), Error);
}

TEST_CASE("routing_report counts are conserved on random records") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> rank(0, 12);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 50; ++t) {
    std::vector<RankRecord> rs;
    for (int i = 0; i < 40; ++i) {
      const int a = rank(rng), b = rank(rng);
      rs.push_back(rec("q" + std::to_string(i), a ? Rank(a) : std::nullopt, b ? Rank(b) : std::nullopt,
                       coin(rng) ? Route::kSparse : Route::kDense));
    }
    const auto s = routing_report(rs);
    CHECK(s.routed_sparse + s.routed_dense == s.n);
    CHECK(s.vs_sparse.improved + s.vs_sparse.worse + s.vs_sparse.unchanged == s.n);
    CHECK(s.vs_dense.improved + s.vs_dense.worse + s.vs_dense.unchanged == s.n);
  }
}

TEST_CASE("histogram") {
  std::vector<RankRecord> one{rec("q", 1, 2)};
  one[0].sparse_ladder[0] = 0.95;
  const auto h = histogram_report(one);
  REQUIRE(h.sparse_no_worse.size() == 10);
  CHECK(h.sparse_no_worse[9] == 1);
  CHECK(h.total() == 1);

  // 1.0 lands in the last bin; 0.0 in the first.
  std::vector<RankRecord> edges{rec("a", 3, 1), rec("b", 3, 1)};
  const std::vector<double> f0{0.0, 1.0};
  const auto e = histogram_report(edges, f0, 10);
  CHECK(e.dense_better[0] == 1);
  CHECK(e.dense_better[9] == 1);

  // Bimodal: sparse-better mass high, dense-better mass low.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> hi(0.8, 1.0), lo(0.0, 0.3);
  std::vector<RankRecord> rs;
  std::vector<double> scores;
  for (int i = 0; i < 200; ++i) {
    const bool sparse_wins = i % 2 == 0;
    rs.push_back(rec("q" + std::to_string(i), sparse_wins ? 1 : 9, sparse_wins ? 9 : 1));
    scores.push_back(sparse_wins ? hi(rng) : lo(rng));
  }
  const auto b = histogram_report(rs, scores, 10);
  CHECK(b.total() == 200);
  std::size_t s_hi = 0, d_lo = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    if (i >= 8) s_hi += b.sparse_no_worse[i];
    if (i <= 2) d_lo += b.dense_better[i];
  }
  CHECK(s_hi == 100);
  CHECK(d_lo == 100);
  CHECK_THROWS_AS(histogram_report(rs, scores, 0), Error);
}

TEST_CASE("sample_dev and kfold are deterministic partitions") {
  const auto a = sample_dev(100, 30, 5);
  CHECK(a == sample_dev(100, 30, 5));
  CHECK(a.size() == 30);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 30);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a.back() < 100);
  CHECK(a != sample_dev(100, 30, 6));
  CHECK_THROWS_AS(sample_dev(3, 4, 0), Error);

  const auto f = kfold_assignment(23, 5, 9);
  CHECK(f == kfold_assignment(23, 5, 9));
  std::vector<std::size_t> sizes(5, 0);
  for (auto x : f) sizes.at(x)++;
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
}

TEST_CASE("time_queries excludes warm-up calls") {
  const std::vector<std::size_t> pool{0, 1, 2};
  for (std::size_t w = 0; w <= 10; ++w) {
    std::size_t calls = 0;
    const auto rep = time_queries("x", {}, w, pool, [&](std::size_t) { ++calls; });
    CHECK(calls == w);
    CHECK(rep.durations.empty());
    CHECK(rep.total == 0.0);
  }
  const std::vector<std::size_t> body{0, 1, 2, 3};
  std::vector<std::size_t> seen;
  const auto rep = time_queries("x", body, 2, pool, [&](std::size_t q) { seen.push_back(q); });
  CHECK(seen == std::vector<std::size_t>{0, 1, 0, 1, 2, 3});
  CHECK(rep.durations.size() == 4);
  CHECK(rep.total == doctest::Approx(std::accumulate(rep.durations.begin(), rep.durations.end(), 0.0)));
  CHECK_THROWS_AS(time_queries("x", body, 1, {}, [](std::size_t) {}), Error);
}

TEST_CASE("records JSONL round trip") {
  std::vector<RankRecord> rs{rec("q1", 1, std::nullopt, Route::kSparse), rec("q2", std::nullopt, 4)};
  rs[0].sparse_ladder = {0.5, 0.25, 0.125, 0.1, 0.05, 0.01, 0.001};
  rs[1].dense_ladder[0] = 1.0 / 3.0;
  testing::TempDir dir;
  save_records(rs, dir.file("r.jsonl"));
  const auto back = load_records(dir.file("r.jsonl"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].qid == "q1");
  CHECK(back[0].sparse_rank == 1u);
  CHECK(back[0].dense_rank == std::nullopt);
  CHECK(back[0].routed == Route::kSparse);
  CHECK(back[0].routed_rank == 1u);
  CHECK(back[0].sparse_ladder == rs[0].sparse_ladder);
  CHECK(back[1].routed == std::nullopt);
  CHECK(back[1].dense_ladder[0] == 1.0 / 3.0);
  save_records(back, dir.file("r2.jsonl"));
  CHECK(testing::read_text(dir.file("r.jsonl")) == testing::read_text(dir.file("r2.jsonl")));
}

TEST_CASE("eval report on hand-built records") {
  const std::vector<RankRecord> rs{rec("q1", 1, 2, Route::kSparse), rec("q2", 4, 1, Route::kDense)};
  const auto rep = make_eval_report(rs, 200, 1);
  CHECK(rep.mrr_sparse == doctest::Approx((1.0 + 0.25) / 2));
  CHECK(rep.mrr_dense == doctest::Approx((0.5 + 1.0) / 2));
  CHECK(rep.mrr_ceiling == 1.0);
  REQUIRE(rep.mrr_hybrid.has_value());
  CHECK(*rep.mrr_hybrid == 1.0);
  CHECK(rep.p_vs_sparse.has_value());
  CHECK(rep.to_csv().find("ceiling") != std::string::npos);
}

TEST_CASE("workbench on a tiny collection") {
  const Corpus c({{"d1", "apple banana", std::nullopt},
                  {"d2", "cherry", std::nullopt},
                  {"d3", "banana cherry grape", std::nullopt}});
  const auto idx = InvertedIndex::build(c, AnalyzerConfig::defaults());
  const EmbeddingStore docs(3, {"d1", "d2", "d3"}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const EmbeddingStore qv(3, {"q1", "q2"}, {0, 1, 0, 0, 0, 1});
  PipelineConfig cfg;
  cfg.k = 10;
  const Workbench wb(idx, docs, qv, cfg);
  const Query q1{"q1", "apple", "d2"};
  CHECK(wb.sparse(q1).front().id == "d1");
  CHECK(wb.dense(q1).front().id == "d2");
  const auto r = wb.evaluate(q1, nullptr);
  CHECK(r.sparse_rank == std::nullopt);
  CHECK(r.dense_rank == 1u);
  CHECK(r.ceiling() == 1u);
  CHECK(r.label() == Route::kDense);
  CHECK(r.sparse_ladder[0] == 1.0);

  RouterModel to_dense;
  to_dense.kind = RouterKind::kLogReg;
  to_dense.feature_spec = FeatureSpec::parse("sparse", "1");
  to_dense.weights = {0.0};
  to_dense.bias = 1.0;
  const auto routed = wb.evaluate(q1, &to_dense);
  CHECK(routed.routed == Route::kDense);
  CHECK(routed.routed_rank == 1u);

  const Query missing{"q9", "apple", "d1"};
  CHECK_THROWS_AS(wb.dense(missing), Error);
}

TEST_CASE("a router sending most queries to sparse beats always-dense under a dense delay") {
  std::mt19937_64 rng(8);
  const auto rc = testing::random_corpus(rng, 50, 30, 8);
  const auto idx = InvertedIndex::build(rc.corpus, AnalyzerConfig::defaults());
  std::vector<float> dv(50 * 4), qv(20 * 4);
  std::normal_distribution<float> g;
  for (auto& x : dv) x = g(rng);
  for (auto& x : qv) x = g(rng);
  std::vector<std::string> dids, qids;
  for (int i = 0; i < 50; ++i) dids.push_back(rc.corpus[i].id);
  std::vector<Query> qs;
  for (int i = 0; i < 20; ++i) {
    qids.push_back("q" + std::to_string(i));
    qs.push_back({qids.back(), testing::random_query(rng, rc.words, 3), "doc0"});
  }
  const EmbeddingStore docs(4, dids, dv), queries(4, qids, qv);
  PipelineConfig cfg;
  cfg.k = 10;
  cfg.dense_delay = std::chrono::microseconds(2000);
  const Workbench wb(idx, docs, queries, cfg);
  RouterModel sparse_all;
  sparse_all.feature_spec = FeatureSpec::parse("sparse", "1");
  sparse_all.theta = 0.0;
  const auto hybrid = wb.time(System::kHybrid, qs, 2, &sparse_all);
  const auto dense = wb.time(System::kDense, qs, 2, nullptr);
  CHECK(dense.total >= 20 * 0.002);
  CHECK(hybrid.total < dense.total);
}

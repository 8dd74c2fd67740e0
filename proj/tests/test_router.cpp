#include <doctest.h>

#include <cmath>
#include <numeric>

#include "error.hpp"
#include "router.hpp"
#include "support.hpp"

using namespace hybridir;

namespace {

FeatureLadder ladder_of(std::vector<double> scores) { return extract_features(softmax_normalize(scores)); }

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(0.3);
  std::vector<double> v(n);
  for (auto& x : v) x = e(rng);
  std::sort(v.rbegin(), v.rend());
  return v;
}

}  // namespace

TEST_CASE("softmax_normalize examples") {
  const auto a = softmax_normalize(std::vector<double>{std::log(2.0), 0.0});
  REQUIRE(a.probs.size() == 2);
  CHECK(a.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(a.probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (double c : {-50.0, 0.0, 3.5, 1e6}) {
    const auto b = softmax_normalize(std::vector<double>{c, c, c, c});
    for (double p : b.probs) CHECK(p == 0.25);
  }
  CHECK(softmax_normalize(std::vector<double>{}).probs.empty());
  CHECK_THROWS_AS(softmax_normalize(std::vector<double>{1.0, NAN}), Error);
  CHECK_THROWS_AS(softmax_normalize(std::vector<double>{INFINITY}), Error);
  // only the first k entries take part
  std::mt19937_64 rng(1);
  CHECK(softmax_normalize(random_scores(rng, 100), 64).probs.size() == 64);
}

TEST_CASE("extract_features examples") {
  const auto f = extract_features(NormalizedTop{{0.4, 0.3, 0.2, 0.1}});
  const FeatureLadder want{0.4, 0.35, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  for (std::size_t i = 0; i < kLadderSize; ++i) CHECK(f[i] == doctest::Approx(want[i]).epsilon(1e-15));
  const auto g = extract_features(NormalizedTop{{1.0}});
  for (std::size_t i = 0; i < kLadderSize; ++i) CHECK(g[i] == doctest::Approx(1.0 / std::pow(2.0, i)).epsilon(1e-15));
  const auto z = extract_features(NormalizedTop{});
  for (double x : z) CHECK(x == 0.0);
}

TEST_CASE("softmax and ladder properties on random lists") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> len(1, 150);
  for (int i = 0; i < 300; ++i) {
    const auto s = random_scores(rng, len(rng));
    const auto p = softmax_normalize(s);
    CHECK(std::abs(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) - 1.0) <= 1e-9);
    auto shifted = s;
    for (auto& x : shifted) x += 10.0;
    const auto q = softmax_normalize(shifted);
    for (std::size_t j = 0; j < p.probs.size(); ++j) CHECK(std::abs(p.probs[j] - q.probs[j]) <= 1e-12);
    const auto f = extract_features(p);
    for (std::size_t j = 1; j < kLadderSize; ++j) CHECK(f[j] <= f[j - 1]);
    CHECK(f[6] >= 0.0);
    if (s.size() >= 64) CHECK(std::abs(f[6] - 1.0 / 64.0) <= 1e-12);
  }
}

TEST_CASE("labels and ceiling") {
  CHECK(make_label(1, 3) == Route::kSparse);
  CHECK(make_label(5, 1) == Route::kDense);
  CHECK(make_label(2, 2) == Route::kSparse);
  CHECK(make_label(std::nullopt, std::nullopt) == Route::kSparse);
  CHECK(make_label(std::nullopt, 9) == Route::kDense);
  CHECK(make_label(9, std::nullopt) == Route::kSparse);
  CHECK(ceiling_rank(1, 3) == 1u);
  CHECK(ceiling_rank(std::nullopt, 2) == 2u);
  CHECK(ceiling_rank(std::nullopt, std::nullopt) == std::nullopt);
}

TEST_CASE("feature variants") {
  const auto s = ladder_of({3.0, 2.0, 1.0, 0.5});
  const auto d = ladder_of({0.9, 0.8, 0.7, 0.1});
  const auto both = feature_variants(s, d, FeatureSpec::parse("both", "full"));
  REQUIRE(both.size() == 14);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(both[i] == s[i]);
    CHECK(both[7 + i] == d[i]);
  }
  const auto top1 = feature_variants(s, d, FeatureSpec::parse("sparse", "1"));
  REQUIRE(top1.size() == 1);
  CHECK(top1[0] == s[0]);
  const auto dense16 = feature_variants(s, d, FeatureSpec::parse("dense", "16"));
  REQUIRE(dense16.size() == 1);
  CHECK(dense16[0] == d[4]);
  const auto both64 = feature_variants(s, d, FeatureSpec::parse("both", "64"));
  REQUIRE(both64.size() == 2);
  CHECK(both64[0] == s[6]);
  CHECK(both64[1] == d[6]);
  CHECK(FeatureSpec::parse("dense", "full").width() == 7);
  CHECK_THROWS_AS(FeatureSpec::parse("tfidf", "full"), Error);
  CHECK_THROWS_AS(FeatureSpec::parse("sparse", "8"), Error);

  // NormalizedTop overload agrees with the ladder overload.
  const auto ps = softmax_normalize(std::vector<double>{3.0, 2.0, 1.0, 0.5});
  const auto pd = softmax_normalize(std::vector<double>{0.9, 0.8, 0.7, 0.1});
  CHECK(feature_variants(ps, pd, FeatureSpec::parse("both", "full")) == both);
}

TEST_CASE("route rules") {
  RouterModel t;
  t.kind = RouterKind::kThreshold;
  t.theta = 0.8;
  t.feature_spec = FeatureSpec::parse("sparse", "1");
  CHECK(route(t, std::vector<double>{0.9}) == Route::kSparse);
  CHECK(route(t, std::vector<double>{0.5}) == Route::kDense);
  CHECK(route(t, std::vector<double>{0.8}) == Route::kSparse);

  RouterModel lr;
  lr.kind = RouterKind::kLogReg;
  lr.weights.assign(7, 0.0);
  lr.bias = 0.0;
  CHECK(route(lr, std::vector<double>(7, 0.3)) == Route::kDense);
  CHECK_THROWS_AS(route(lr, std::vector<double>(3, 0.3)), Error);
  lr.bias = -1.0;
  CHECK(route(lr, std::vector<double>(7, 0.3)) == Route::kSparse);
}

TEST_CASE("route is invariant to shifting raw BM25 scores") {
  std::mt19937_64 rng(12);
  RouterModel lr;
  lr.kind = RouterKind::kLogReg;
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 7; ++i) lr.weights.push_back(g(rng));
  lr.bias = 0.3;
  RouterModel t;
  t.theta = 0.4;
  t.feature_spec = FeatureSpec::parse("sparse", "1");
  for (int i = 0; i < 200; ++i) {
    auto s = random_scores(rng, 1 + i % 90);
    const auto a = ladder_of(s);
    for (auto& x : s) x += 7.25;
    const auto b = ladder_of(s);
    const FeatureLadder zero{};
    CHECK(route(lr, feature_variants(a, zero, lr.feature_spec)) == route(lr, feature_variants(b, zero, lr.feature_spec)));
    CHECK(route(t, feature_variants(a, zero, t.feature_spec)) == route(t, feature_variants(b, zero, t.feature_spec)));
  }
}

TEST_CASE("fit_threshold") {
  std::vector<double> f0{0.95, 0.91, 0.3, 0.1, 0.15};
  // Sparse always better: every theta that routes everything sparse ties; 0.0 wins.
  auto all_sparse = [](std::span<const Route> r) {
    double s = 0;
    for (auto x : r) s += x == Route::kSparse ? 1.0 : 0.0;
    return s;
  };
  CHECK(fit_threshold(f0, all_sparse).theta == 0.0);

  // Dense always better: only theta = 1.0 sends all five (f0 < 1) to dense.
  auto all_dense = [](std::span<const Route> r) {
    double s = 0;
    for (auto x : r) s += x == Route::kDense ? 1.0 : 0.0;
    return s;
  };
  const auto m = fit_threshold(f0, all_dense);
  CHECK(m.theta == 1.0);
  for (double f : f0) CHECK(route(m, std::vector<double>{f}) == Route::kDense);

  // Bimodal: first two belong to sparse, the rest to dense.
  auto bimodal = [](std::span<const Route> r) {
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += (r[i] == Route::kSparse) == (i < 2) ? 1.0 : 0.0;
    return s;
  };
  const auto b = fit_threshold(f0, bimodal);
  CHECK(b.theta == doctest::Approx(0.4));  // smallest theta above 0.3
  CHECK(b.kind == RouterKind::kThreshold);
  CHECK_THROWS_AS(fit_threshold(std::vector<double>{}, bimodal), Error);
}

TEST_CASE("logistic regression: zero init, separable toy set, loss descent") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix x;
  std::vector<int> y;
  while (x.size() < 100) {
    const double f0 = u(rng);
    if (std::abs(f0 - 0.5) < 0.1) continue;  // margin 0.2 around the boundary
    std::vector<double> row{f0};
    for (int j = 1; j < 7; ++j) row.push_back(u(rng) * f0);
    y.push_back(f0 < 0.5 ? 1 : 0);
    x.push_back(std::move(row));
  }
  const std::vector<double> zero(7, 0.0);
  CHECK(logreg_probability(zero, 0.0, x[0]) == 0.5);

  LogRegConfig cfg;
  cfg.epochs = 20000;
  const auto fit = fit_logreg(x, y, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    correct += (route(fit.model, x[i]) == Route::kDense) == (y[i] == 1) ? 1 : 0;
  }
  CHECK(correct == x.size());
  REQUIRE(fit.loss_history.size() == cfg.epochs + 1);
  CHECK(fit.loss_history.front() == doctest::Approx(std::log(2.0)));
  for (std::size_t i = 1; i < fit.loss_history.size(); ++i) CHECK(fit.loss_history[i] <= fit.loss_history[i - 1] + 1e-15);

  // Deterministic given the configuration.
  const auto again = fit_logreg(x, y, cfg);
  CHECK(again.model.weights == fit.model.weights);
  CHECK(again.model.bias == fit.model.bias);
}

TEST_CASE("logistic regression: input validation and degenerate labels") {
  FeatureMatrix x{{0.1, 0.2}, {0.3, 0.4}};
  CHECK_THROWS_AS(fit_logreg(x, std::vector<int>{1}, {}), Error);
  CHECK_THROWS_AS(fit_logreg({{0.1}, {0.2, 0.3}}, std::vector<int>{0, 1}, {}), Error);
  CHECK_THROWS_AS(fit_logreg({{NAN}}, std::vector<int>{1}, {}), Error);
  CHECK_THROWS_AS(fit_logreg(x, std::vector<int>{0, 2}, {}), Error);
  LogRegConfig cfg;
  cfg.epochs = 200;
  const auto all_zero = fit_logreg(x, std::vector<int>{0, 0}, cfg);
  for (const auto& row : x) CHECK(route(all_zero.model, row) == Route::kSparse);
}

TEST_CASE("logistic regression gradient matches central differences") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const double eps = 1e-5;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 5 + inst, d = 1 + inst % 14;
    FeatureMatrix x(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = u(rng);
      y[i] = u(rng) < 0.5 ? 1 : 0;
    }
    std::vector<double> w(d);
    for (auto& v : w) v = g(rng);
    double b = g(rng);
    const double l2 = inst % 2 ? 0.05 : 0.0;
    std::vector<double> gw;
    double gb = 0;
    logreg_gradient(x, y, w, b, l2, gw, gb);
    for (std::size_t j = 0; j < d; ++j) {
      auto wp = w, wm = w;
      wp[j] += eps;
      wm[j] -= eps;
      const double num = (logreg_loss(x, y, wp, b, l2) - logreg_loss(x, y, wm, b, l2)) / (2 * eps);
      CHECK(testing::relative_error(gw[j], num) <= 1e-5);
    }
    const double num_b = (logreg_loss(x, y, w, b + eps, l2) - logreg_loss(x, y, w, b - eps, l2)) / (2 * eps);
    CHECK(testing::relative_error(gb, num_b) <= 1e-5);
  }
}

TEST_CASE("router model JSON round trip and validation") {
  RouterModel m;
  m.kind = RouterKind::kLogReg;
  m.weights = {0.5, -1.25, 2.0, 0.0, 0.1, 0.2, 0.3};
  m.bias = -0.75;
  m.feature_spec = FeatureSpec::parse("sparse", "full");
  m.analyzer_hash = "0123456789abcdef";
  const auto text = m.to_json();
  const auto back = RouterModel::from_json(text);
  CHECK(back.kind == m.kind);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_spec == m.feature_spec);
  CHECK(back.analyzer_hash == m.analyzer_hash);
  CHECK(back.to_json() == text);

  testing::TempDir dir;
  m.save(dir.file("r.json"));
  CHECK(RouterModel::load(dir.file("r.json")).to_json() == text);

  CHECK_THROWS_AS(RouterModel::from_json("{"), Error);
  CHECK_THROWS_AS(RouterModel::from_json(R"({"kind":"threshold","theta":1.5,"feature_spec":{"source":"sparse","topk":"1"}})"),
                  Error);
  CHECK_THROWS_AS(
      RouterModel::from_json(R"({"kind":"logreg","weights":[1,2],"bias":0,"feature_spec":{"source":"sparse","topk":"full"}})"),
      Error);
  CHECK_THROWS_AS(RouterModel::from_json(R"({"kind":"forest"})"), Error);
}

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "binary_io.hpp"
#include "dense_store.hpp"
#include "error.hpp"
#include "router.hpp"
#include "support.hpp"

using namespace hybridir;

namespace {

std::string emb1_bytes(std::uint32_t count, std::uint32_t dim, const std::vector<float>& values) {
  binio::Writer w;
  w.bytes("EMB1");
  w.u32(count);
  w.u32(dim);
  for (float v : values) w.f32(v);
  return w.data();
}

EmbeddingStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n * dim);
  for (auto& x : v) x = g(rng);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("e" + std::to_string(i));
  return EmbeddingStore(dim, std::move(ids), std::move(v));
}

}  // namespace

TEST_CASE("EMB1 parse: header arithmetic and errors") {
  const auto bytes = emb1_bytes(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(bytes.size() == 12 + 24);
  const auto s = EmbeddingStore::parse(bytes, "a\nb\n");
  CHECK(s.size() == 2);
  CHECK(s.dim() == 3);
  CHECK(s.row(1)[2] == 6.0f);
  CHECK(s.find("b") == 1u);

  CHECK_THROWS_AS(EmbeddingStore::parse(bytes.substr(0, bytes.size() - 4), "a\nb\n"), Error);
  CHECK_THROWS_AS(EmbeddingStore::parse(bytes, "a\n"), Error);
  CHECK_THROWS_AS(EmbeddingStore::parse(bytes, "a\na\n"), Error);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(EmbeddingStore::parse(bad, "a\nb\n"), Error);
  const float nan = std::nanf("");
  CHECK_THROWS_AS(EmbeddingStore::parse(emb1_bytes(1, 1, {nan}), "a\n"), Error);
  CHECK_THROWS_AS(EmbeddingStore::parse(emb1_bytes(1, 1, {INFINITY}), "a\n"), Error);
}

TEST_CASE("EMB1 is little-endian on disk") {
  const EmbeddingStore s(1, {"x"}, {1.0f});
  const auto bytes = s.serialize_vectors();
  REQUIRE(bytes.size() == 16);
  CHECK(bytes.substr(0, 4) == "EMB1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);
  // 1.0f = 0x3f800000
  CHECK(static_cast<unsigned char>(bytes[12]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[15]) == 0x3f);
  CHECK(s.serialize_ids() == "x\n");
}

TEST_CASE("load -> save -> load is byte-identical") {
  std::mt19937_64 rng(1);
  const auto s = random_store(rng, 17, 5);
  testing::TempDir dir;
  s.save(dir.file("a.bin"), dir.file("a.ids"));
  const auto t = EmbeddingStore::load(dir.file("a.bin"), dir.file("a.ids"));
  t.save(dir.file("b.bin"), dir.file("b.ids"));
  CHECK(testing::read_text(dir.file("a.bin")) == testing::read_text(dir.file("b.bin")));
  CHECK(testing::read_text(dir.file("a.ids")) == testing::read_text(dir.file("b.ids")));
  CHECK_THROWS_AS(EmbeddingStore::load(dir.file("none.bin"), dir.file("a.ids")), Error);
}

TEST_CASE("dense_topk small examples") {
  const EmbeddingStore s(2, {"d1", "d2"}, {1, 0, 0, 1});
  const std::vector<float> q{1, 0};
  const auto hits = dense_topk(s, q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].id == "d1");
  CHECK(hits[0].score == 1.0);
  CHECK(hits[1].id == "d2");
  CHECK(hits[1].score == 0.0);

  const EmbeddingStore t(2, {"c", "a", "b"}, {1, 2, 3, 4, 5, 6});
  const std::vector<float> zero{0, 0};
  const auto z = dense_topk(t, zero, 3);
  REQUIRE(z.size() == 3);
  CHECK(z[0].id == "a");
  CHECK(z[1].id == "b");
  CHECK(z[2].id == "c");

  const std::vector<float> wrong{1, 0, 0};
  CHECK_THROWS_AS(dense_topk(s, wrong, 1), Error);
}

TEST_CASE("dense_topk equals a full argsort oracle") {
  std::mt19937_64 rng(2);
  const auto s = random_store(rng, 200, 16);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (int q = 0; q < 20; ++q) {
    std::vector<float> query(16);
    for (auto& x : query) x = g(rng);
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < s.size(); ++i) {
      double dot = 0.0;
      for (std::size_t d = 0; d < 16; ++d) dot += static_cast<double>(s.row(i)[d]) * query[d];
      all.emplace_back(dot, s.ids()[i]);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const auto got = dense_topk(s, query, 25);
    REQUIRE(got.size() == 25);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].id == all[i].second);
      CHECK(std::abs(got[i].score - all[i].first) <= 1e-9);
    }
  }
}

TEST_CASE("appending a low-scoring vector does not change the top k") {
  std::mt19937_64 rng(4);
  auto base = random_store(rng, 50, 8);
  std::vector<float> q(8, 0.5f);
  const auto before = dense_topk(base, q, 10);
  std::vector<float> vals;
  std::vector<std::string> ids = base.ids();
  for (std::size_t i = 0; i < base.size(); ++i) vals.insert(vals.end(), base.row(i).begin(), base.row(i).end());
  for (int d = 0; d < 8; ++d) vals.push_back(-100.0f);
  ids.push_back("aaa");
  const EmbeddingStore bigger(8, ids, vals);
  const auto after = dense_topk(bigger, q, 10);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].id == after[i].id);
}

TEST_CASE("unit-norm rows score within [-1, 1]") {
  std::mt19937_64 rng(6);
  auto s = random_store(rng, 40, 12);
  std::vector<float> vals;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = s.row(i);
    double n = 0;
    for (float x : r) n += static_cast<double>(x) * x;
    for (float x : r) vals.push_back(static_cast<float>(x / std::sqrt(n)));
  }
  const EmbeddingStore unit(12, s.ids(), vals);
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (const auto& h : dense_topk(unit, unit.row(i), unit.size())) {
      CHECK(h.score <= 1.0 + 1e-6);
      CHECK(h.score >= -1.0 - 1e-6);
    }
  }
}

TEST_CASE("sum_fusion") {
  const ScoredList dense{{"d1", 2.0}, {"d2", 1.0}};
  const auto only_dense = sum_fusion({}, dense, 10);
  const auto norm = softmax_normalize(std::vector<double>{2.0, 1.0}, 64);
  REQUIRE(only_dense.size() == 2);
  CHECK(only_dense[0].id == "d1");
  CHECK(only_dense[0].score == doctest::Approx(norm.probs[0]).epsilon(1e-15));
  CHECK(only_dense[1].score == doctest::Approx(norm.probs[1]).epsilon(1e-15));

  const auto single = sum_fusion({{"d1", 7.0}}, {{"d1", -3.0}}, 10);
  REQUIRE(single.size() == 1);
  CHECK(single[0].score == 2.0);

  // Three documents, partially overlapping; hand-computed union sum.
  const ScoredList s{{"a", std::log(2.0)}, {"b", 0.0}};
  const ScoredList d{{"b", std::log(3.0)}, {"c", 0.0}};
  const auto f = sum_fusion(s, d, 10);
  REQUIRE(f.size() == 3);
  // sparse softmax: a 2/3, b 1/3; dense softmax: b 3/4, c 1/4
  CHECK(f[0].id == "b");
  CHECK(f[0].score == doctest::Approx(1.0 / 3.0 + 3.0 / 4.0).epsilon(1e-14));
  CHECK(f[1].id == "a");
  CHECK(f[1].score == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(f[2].id == "c");
  CHECK(f[2].score == doctest::Approx(1.0 / 4.0).epsilon(1e-14));
  CHECK(sum_fusion(s, d, 1).size() == 1);
}

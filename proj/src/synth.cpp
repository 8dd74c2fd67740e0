#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "error.hpp"
#include "evaluation.hpp"
#include "text_analyzer.hpp"

namespace hybridir {
namespace {

constexpr std::size_t kOwnWords = 6;
constexpr std::size_t kPoolWordsPerDoc = 2;
constexpr std::size_t kPoolSize = 12;
constexpr std::size_t kOverlapTerms = 3;
constexpr std::size_t kParaphraseTerms = 3;

// Pronounceable consonant-vowel words. They end in a vowel, so the plural
// stemmer leaves them alone, and none of them is a stopword.
class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr char kCons[] = "bdfgklmnprtvz";
    static constexpr char kVow[] = "aeiou";
    std::uniform_int_distribution<int> c(0, 12), v(0, 4);
    for (;;) {
      std::string w;
      for (int s = 0; s < 3; ++s) {
        w.push_back(kCons[c(rng_)]);
        w.push_back(kVow[v(rng_)]);
      }
      if (default_stopwords().count(w)) continue;
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string pad_id(char prefix, std::size_t i, std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::string digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace

SynthWorkload make_synthetic_workload(const SynthConfig& cfg) {
  if (cfg.n_docs < 2 || cfg.n_queries < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic workload too small");
  std::mt19937_64 rng(cfg.seed);
  WordMaker words(rng);

  std::vector<std::string> pool(kPoolSize);
  for (auto& w : pool) w = words.fresh();

  std::vector<std::vector<std::string>> own(cfg.n_docs);
  std::vector<std::vector<std::size_t>> doc_pool(cfg.n_docs);
  std::vector<Document> docs;
  docs.reserve(cfg.n_docs);
  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    for (std::size_t i = 0; i < kOwnWords; ++i) own[d].push_back(words.fresh());
    std::vector<std::size_t> pick(kPoolSize);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::shuffle(pick.begin(), pick.end(), rng);
    doc_pool[d].assign(pick.begin(), pick.begin() + kPoolWordsPerDoc);
    std::vector<std::string> text = own[d];
    for (const auto p : doc_pool[d]) text.push_back(pool[p]);
    std::shuffle(text.begin(), text.end(), rng);
    docs.push_back({pad_id('d', d, cfg.n_docs), join(text), std::nullopt});
  }

  SynthWorkload w;
  w.overlap.assign(cfg.n_queries, false);
  std::fill(w.overlap.begin(), w.overlap.begin() + static_cast<std::ptrdiff_t>(cfg.n_queries / 2), true);
  std::shuffle(w.overlap.begin(), w.overlap.end(), rng);

  // Dense score profile shared by every query, strictly decreasing.
  std::vector<float> profile(cfg.n_docs);
  profile[0] = 0.9f;
  for (std::size_t r = 1; r < cfg.n_docs; ++r) {
    profile[r] = static_cast<float>(0.5 * (1.0 - static_cast<double>(r - 1) / static_cast<double>(cfg.n_docs)));
  }

  std::uniform_int_distribution<std::size_t> pick_doc(0, cfg.n_docs - 1);
  std::vector<float> query_values(cfg.n_queries * cfg.n_docs, 0.0f);
  std::vector<std::string> qids;
  for (std::size_t q = 0; q < cfg.n_queries; ++q) {
    const std::size_t gold = pick_doc(rng);
    std::vector<std::string> text;
    if (w.overlap[q]) {
      std::vector<std::string> mine = own[gold];
      std::shuffle(mine.begin(), mine.end(), rng);
      text.assign(mine.begin(), mine.begin() + kOverlapTerms);
      text.push_back(pool[std::uniform_int_distribution<std::size_t>(0, kPoolSize - 1)(rng)]);
    } else {
      std::vector<std::size_t> absent;
      for (std::size_t p = 0; p < kPoolSize; ++p) {
        if (std::find(doc_pool[gold].begin(), doc_pool[gold].end(), p) == doc_pool[gold].end()) absent.push_back(p);
      }
      std::shuffle(absent.begin(), absent.end(), rng);
      for (std::size_t i = 0; i < kParaphraseTerms; ++i) text.push_back(pool[absent[i]]);
    }
    text.push_back(words.fresh());  // query-only word, matches nothing
    std::shuffle(text.begin(), text.end(), rng);

    std::vector<std::size_t> perm(cfg.n_docs);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    if (!w.overlap[q]) std::swap(perm[0], *std::find(perm.begin(), perm.end(), gold));
    for (std::size_t r = 0; r < cfg.n_docs; ++r) query_values[q * cfg.n_docs + perm[r]] = profile[r];

    const auto qid = pad_id('q', q, cfg.n_queries);
    qids.push_back(qid);
    w.queries.push_back({qid, join(text), docs[gold].id});
  }

  std::vector<float> doc_values(cfg.n_docs * cfg.n_docs, 0.0f);
  std::vector<std::string> doc_ids;
  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    doc_values[d * cfg.n_docs + d] = 1.0f;
    doc_ids.push_back(docs[d].id);
  }
  w.corpus = Corpus(std::move(docs));
  w.doc_vectors = EmbeddingStore(cfg.n_docs, std::move(doc_ids), std::move(doc_values));
  w.query_vectors = EmbeddingStore(cfg.n_docs, std::move(qids), std::move(query_values));

  w.dev = sample_dev(cfg.n_queries, cfg.n_queries / 2, cfg.seed);
  std::vector<bool> in_dev(cfg.n_queries, false);
  for (const auto i : w.dev) in_dev[i] = true;
  for (std::size_t i = 0; i < cfg.n_queries; ++i) {
    if (!in_dev[i]) w.test.push_back(i);
  }
  return w;
}

std::vector<Query> select_queries(const std::vector<Query>& queries, const std::vector<std::size_t>& idx) {
  std::vector<Query> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(queries.at(i));
  return out;
}

void write_synthetic_workload(const SynthWorkload& w, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  const fs::path base(dir);
  save_corpus(w.corpus, (base / "corpus.jsonl").string());
  save_queries(w.queries, (base / "queries.jsonl").string());
  save_queries(select_queries(w.queries, w.dev), (base / "queries_dev.jsonl").string());
  save_queries(select_queries(w.queries, w.test), (base / "queries_test.jsonl").string());
  w.doc_vectors.save((base / "doc_emb.bin").string(), (base / "doc_emb.ids").string());
  w.query_vectors.save((base / "query_emb.bin").string(), (base / "query_emb.ids").string());
}

SynthProbeTask make_identity_probe_task(std::size_t n_terms, std::size_t n_train, std::size_t n_dev, std::uint64_t seed) {
  if (n_terms < 20) throw Error(ErrorCode::kInvalidArgument, "identity probe task needs at least 20 terms");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> n_query(3, 5), n_fact(1, 3);
  SynthProbeTask task;
  task.n_vocab = n_terms;
  for (std::size_t e = 0; e < n_train + n_dev; ++e) {
    std::vector<std::size_t> perm(n_terms);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t nq = n_query(rng);
    const std::size_t nf = n_fact(rng);
    ProbeExample ex;
    ex.qid = pad_id('p', e, n_train + n_dev);
    ex.query_terms.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nq));
    ex.fact_terms.assign(perm.begin() + static_cast<std::ptrdiff_t>(nq),
                         perm.begin() + static_cast<std::ptrdiff_t>(nq + nf));
    ex.positive.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nq + nf));
    ex.negative.assign(perm.begin() + static_cast<std::ptrdiff_t>(nq + nf),
                       perm.begin() + static_cast<std::ptrdiff_t>(2 * (nq + nf)));
    std::sort(ex.query_terms.begin(), ex.query_terms.end());
    std::sort(ex.fact_terms.begin(), ex.fact_terms.end());
    std::sort(ex.positive.begin(), ex.positive.end());
    std::sort(ex.negative.begin(), ex.negative.end());
    const double v = 1.0 / std::sqrt(static_cast<double>(nq));
    for (const auto t : ex.query_terms) ex.input.entries.emplace_back(t, v);
    (e < n_train ? task.train : task.dev).push_back(std::move(ex));
  }
  return task;
}

double chance_average_precision(std::size_t n, std::size_t r) {
  if (n == 0 || r == 0) return 0.0;
  double harmonic = 0.0;
  for (std::size_t i = 1; i <= n; ++i) harmonic += 1.0 / static_cast<double>(i);
  const double nd = static_cast<double>(n);
  const double spread = n > 1 ? static_cast<double>(r - 1) / (nd - 1.0) * (nd - harmonic) : 0.0;
  return (harmonic + spread) / nd;
}

}  // namespace hybridir

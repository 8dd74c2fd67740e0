#pragma once

// Test-side helpers and oracles. The oracles recompute quantities from first
// principles (full count matrices, dense vectors, sorting everything) so they
// share no code path with the implementation beyond the analyzer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "scored_list.hpp"
#include "text_analyzer.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hybridir_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Words of the form CVCV over consonants and vowels that never end in 's', so
// the analyzer leaves them untouched.
inline std::vector<std::string> word_pool(std::size_t n, std::mt19937_64& rng) {
  static const std::string cons = "bdfgklmnprtv";
  static const std::string vow = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::uniform_int_distribution<std::size_t> c(0, cons.size() - 1), v(0, vow.size() - 1);
  while (out.size() < n) {
    std::string w{cons[c(rng)], vow[v(rng)], cons[c(rng)], vow[v(rng)]};
    if (hybridir::default_stopwords().count(w)) continue;
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

struct RandomCorpus {
  hybridir::Corpus corpus;
  std::vector<std::string> words;
};

inline RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t n_docs, std::size_t vocab, std::size_t max_len,
                                  bool with_context = false) {
  RandomCorpus rc;
  rc.words = word_pool(vocab, rng);
  // Skewed term distribution so document frequencies vary.
  std::vector<double> weights(vocab);
  for (std::size_t i = 0; i < vocab; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::bernoulli_distribution ctx(0.5);
  std::vector<hybridir::Document> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    auto sentence = [&] {
      std::string s;
      const std::size_t l = len(rng);
      for (std::size_t i = 0; i < l; ++i) s += (i ? " " : "") + rc.words[pick(rng)];
      return s;
    };
    hybridir::Document doc{"doc" + std::to_string(d), sentence(), std::nullopt};
    if (with_context && ctx(rng)) doc.context = sentence();
    docs.push_back(std::move(doc));
  }
  rc.corpus = hybridir::Corpus(std::move(docs));
  return rc;
}

inline std::string random_query(std::mt19937_64& rng, const std::vector<std::string>& words, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, words.size() - 1);
  std::string q;
  const std::size_t l = len(rng);
  for (std::size_t i = 0; i < l; ++i) q += (i ? " " : "") + words[pick(rng)];
  return q;
}

// Brute-force BM25: full doc x term count matrix, every document scored.
inline hybridir::ScoredList bm25_oracle(const hybridir::Corpus& corpus, const hybridir::AnalyzerConfig& cfg,
                                        const std::string& query, double k1, double b) {
  const std::size_t n = corpus.size();
  std::vector<std::map<std::string, double>> counts(n);
  double total_len = 0.0;
  std::vector<double> len(n);
  for (std::size_t d = 0; d < n; ++d) {
    const auto& doc = corpus[d];
    std::string text = doc.sentence;
    if (doc.context && !doc.context->empty()) text += " " + *doc.context;
    for (const auto& t : hybridir::tokenize(text, cfg)) counts[d][t] += 1.0;
    double l = 0.0;
    for (const auto& [t, c] : counts[d]) l += c;
    len[d] = l;
    total_len += l;
  }
  const double avg = total_len / static_cast<double>(n);
  const auto terms = hybridir::tokenize(query, cfg);
  const std::set<std::string> unique(terms.begin(), terms.end());
  hybridir::ScoredList out;
  for (std::size_t d = 0; d < n; ++d) {
    double score = 0.0;
    bool matched = false;
    for (const auto& t : unique) {
      const auto it = counts[d].find(t);
      if (it == counts[d].end()) continue;
      matched = true;
      double df = 0.0;
      for (std::size_t e = 0; e < n; ++e) df += counts[e].count(t) ? 1.0 : 0.0;
      const double idf = std::log(1.0 + (static_cast<double>(n) - df + 0.5) / (df + 0.5));
      const double tf = it->second;
      score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len[d] / avg));
    }
    if (matched) out.push_back({corpus[d].id, score});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.score != y.score ? x.score > y.score : x.id < y.id;
  });
  return out;
}

// Document-frequency table by direct set comprehension.
inline std::map<std::string, std::size_t> vocab_oracle(const hybridir::Corpus& corpus,
                                                       const hybridir::AnalyzerConfig& cfg) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus.docs()) {
    std::string text = doc.sentence;
    if (doc.context && !doc.context->empty()) text += " " + *doc.context;
    const auto toks = hybridir::tokenize(text, cfg);
    for (const auto& t : std::set<std::string>(toks.begin(), toks.end())) ++df[t];
  }
  std::map<std::string, std::size_t> out;
  for (const auto& [t, c] : df) {
    if (c >= cfg.min_count) out[t] = c;
  }
  return out;
}

// Dense smooth-idf tf-idf over the full vocabulary.
inline std::vector<double> tfidf_oracle(const std::vector<std::string>& terms, const std::vector<std::size_t>& df,
                                        std::size_t n_docs, const std::string& text,
                                        const hybridir::AnalyzerConfig& cfg) {
  std::vector<double> v(terms.size(), 0.0);
  for (const auto& t : hybridir::tokenize(text, cfg)) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i] == t) v[i] += 1.0;
    }
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] *= std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df[i]))) + 1.0;
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (auto& x : v) x /= norm;
  }
  return v;
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace testing

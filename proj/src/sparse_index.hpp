#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "scored_list.hpp"
#include "text_analyzer.hpp"

namespace hybridir {

struct Posting {
  std::uint32_t doc = 0;  // document ordinal
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 over an immutable inverted index.
//
//   score(q, d) = sum over unique t in q∩d of
//                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avg_len))
//   idf(t)      = ln(1 + (n_docs - df + 0.5) / (df + 0.5))
//
// Document text is indexed_text(doc); lengths are exact analyzed token counts.
class InvertedIndex {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;

  static InvertedIndex build(const Corpus& corpus, const AnalyzerConfig& cfg, Bm25Params params = {});
  static InvertedIndex load(const std::string& path);
  void save(const std::string& path) const;
  std::string serialize() const;
  static InvertedIndex deserialize(std::string_view bytes);

  // Up to k matching documents, best first; documents sharing no query term
  // are never returned.
  ScoredList bm25_topk(std::string_view query, std::size_t k) const;

  // Scores for already-analyzed query terms (duplicates are ignored).
  ScoredList bm25_topk_terms(std::span<const std::string> terms, std::size_t k) const;

  double idf(std::size_t df) const;

  std::size_t n_docs() const noexcept { return doc_ids_.size(); }
  std::size_t n_terms() const noexcept { return terms_.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }
  std::uint32_t doc_len(std::size_t doc) const { return doc_len_[doc]; }
  const std::string& doc_id(std::size_t doc) const { return doc_ids_[doc]; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::optional<std::size_t> term_ordinal(const std::string& term) const;
  std::span<const Posting> postings(std::size_t term_ordinal) const { return postings_[term_ordinal]; }
  const AnalyzerConfig& analyzer() const noexcept { return analyzer_; }
  const Bm25Params& params() const noexcept { return params_; }

 private:
  InvertedIndex() = default;
  void finalize();

  AnalyzerConfig analyzer_;
  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  double avg_doc_len_ = 0.0;
  std::vector<std::string> terms_;  // lexicographic
  std::vector<std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> term_index_;
};

// Sparse vector with strictly increasing ordinals.
struct SparseVector {
  std::vector<std::pair<std::size_t, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  double norm() const;
};

// Smooth-idf tf-idf, L2-normalized:
//   w(t) = tf(t, text) * (ln((1 + n_docs) / (1 + df(t))) + 1)
// Out-of-vocabulary terms are dropped.
SparseVector tfidf_vector(const Vocab& vocab, std::string_view text, const AnalyzerConfig& cfg);

}  // namespace hybridir

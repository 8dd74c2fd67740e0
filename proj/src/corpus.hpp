#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "text_analyzer.hpp"

namespace hybridir {

struct Document {
  std::string id;
  std::string sentence;
  std::optional<std::string> context;
};

struct Query {
  std::string qid;
  std::string text;
  std::string gold_id;
};

// Text that gets indexed for a document: the sentence, followed by the
// context paragraph when one exists. Contexts usually contain the sentence,
// so it is deliberately counted twice.
std::string indexed_text(const Document& doc);

class Corpus {
 public:
  Corpus() = default;
  // Throws kDuplicateId / kInvalidArgument on invariant violations.
  explicit Corpus(std::vector<Document> docs);

  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const std::vector<Document>& docs() const noexcept { return docs_; }
  const Document& operator[](std::size_t i) const { return docs_[i]; }

  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct Dataset {
  Corpus corpus;
  std::vector<Query> queries;
};

Corpus load_corpus(const std::string& path);
std::vector<Query> load_queries(const std::string& path);
Dataset load_dataset(const std::string& corpus_path, const std::string& queries_path);

void save_corpus(const Corpus& corpus, const std::string& path);
void save_queries(const std::vector<Query>& queries, const std::string& path);

// Throws kData naming the first query whose gold_id is not a corpus id.
void validate_gold_ids(const Corpus& corpus, const std::vector<Query>& queries);

class Vocab {
 public:
  Vocab() = default;
  // terms must be unique; doc_freq is aligned with terms.
  Vocab(std::vector<std::string> terms, std::vector<std::size_t> doc_freq, std::size_t n_docs);

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  std::size_t n_docs() const noexcept { return n_docs_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& term(std::size_t ordinal) const { return terms_[ordinal]; }
  std::size_t doc_freq(std::size_t ordinal) const { return doc_freq_[ordinal]; }
  std::optional<std::size_t> ordinal(const std::string& term) const;

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t n_docs_ = 0;
};

// Terms are ordered lexicographically. Only corpus text contributes; a term
// survives when its document frequency is at least cfg.min_count.
Vocab build_vocab(const Corpus& corpus, const AnalyzerConfig& cfg);

}  // namespace hybridir

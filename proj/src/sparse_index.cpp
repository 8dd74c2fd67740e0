#include "sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "binary_io.hpp"
#include "error.hpp"

namespace hybridir {
namespace {

constexpr std::string_view kMagic = "SIX1";

void write_analyzer(binio::Writer& w, const AnalyzerConfig& cfg) {
  w.u8(cfg.lowercase ? 1 : 0);
  w.u8(cfg.stem ? 1 : 0);
  w.varint(cfg.min_count);
  w.varint(cfg.stopwords.size());
  for (const auto& s : cfg.stopwords) w.str(s);
}

AnalyzerConfig read_analyzer(binio::Reader r) {
  AnalyzerConfig cfg;
  cfg.lowercase = r.u8() != 0;
  cfg.stem = r.u8() != 0;
  cfg.min_count = r.varint();
  const auto n = r.varint();
  for (std::uint64_t i = 0; i < n; ++i) cfg.stopwords.insert(r.str());
  return cfg;
}

}  // namespace

InvertedIndex InvertedIndex::build(const Corpus& corpus, const AnalyzerConfig& cfg, Bm25Params params) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyInput, "cannot index an empty corpus");
  if (!(params.k1 > 0.0) || !(params.b >= 0.0 && params.b <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "BM25 requires k1 > 0 and b in [0, 1]");
  }
  InvertedIndex index;
  index.analyzer_ = cfg;
  index.params_ = params;

  std::map<std::string, std::vector<Posting>> postings;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto tokens = tokenize(indexed_text(corpus[d]), cfg);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) postings[term].push_back({static_cast<std::uint32_t>(d), count});
    index.doc_ids_.push_back(corpus[d].id);
    index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
  }
  for (auto& [term, list] : postings) {
    index.terms_.push_back(term);
    index.postings_.push_back(std::move(list));
  }
  index.finalize();
  return index;
}

void InvertedIndex::finalize() {
  const double total = std::accumulate(doc_len_.begin(), doc_len_.end(), 0.0);
  avg_doc_len_ = doc_len_.empty() ? 0.0 : total / static_cast<double>(doc_len_.size());
  term_index_.clear();
  term_index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) term_index_.emplace(terms_[i], i);
}

std::optional<std::size_t> InvertedIndex::term_ordinal(const std::string& term) const {
  const auto it = term_index_.find(term);
  if (it == term_index_.end()) return std::nullopt;
  return it->second;
}

double InvertedIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(n_docs());
  const double dfd = static_cast<double>(df);
  return std::log(1.0 + (n - dfd + 0.5) / (dfd + 0.5));
}

ScoredList InvertedIndex::bm25_topk(std::string_view query, std::size_t k) const {
  const auto terms = tokenize(query, analyzer_);
  return bm25_topk_terms(terms, k);
}

ScoredList InvertedIndex::bm25_topk_terms(std::span<const std::string> terms, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  std::vector<std::size_t> ordinals;
  for (const auto& t : terms) {
    if (auto o = term_ordinal(t)) ordinals.push_back(*o);
  }
  std::sort(ordinals.begin(), ordinals.end());
  ordinals.erase(std::unique(ordinals.begin(), ordinals.end()), ordinals.end());

  std::vector<double> acc(n_docs(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<bool> seen(n_docs(), false);
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto o : ordinals) {
    const auto& list = postings_[o];
    const double w = idf(list.size());
    for (const auto& p : list) {
      const double tf = p.tf;
      const double norm = k1 * (1.0 - b + b * static_cast<double>(doc_len_[p.doc]) / avg_doc_len_);
      acc[p.doc] += w * tf * (k1 + 1.0) / (tf + norm);
      if (!seen[p.doc]) {
        seen[p.doc] = true;
        touched.push_back(p.doc);
      }
    }
  }
  ScoredList out;
  out.reserve(touched.size());
  for (const auto d : touched) out.push_back({doc_ids_[d], acc[d]});
  truncate_topk(out, k);
  return out;
}

std::string InvertedIndex::serialize() const {
  binio::Writer w;
  w.bytes(kMagic);
  w.u16(kFormatVersion);

  binio::Writer analyzer;
  write_analyzer(analyzer, analyzer_);
  w.section(analyzer);

  binio::Writer stats;
  stats.f64(params_.k1);
  stats.f64(params_.b);
  stats.u64(doc_ids_.size());
  stats.f64(avg_doc_len_);
  for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
    stats.str(doc_ids_[d]);
    stats.varint(doc_len_[d]);
  }
  w.section(stats);

  binio::Writer post;
  post.u64(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    post.str(terms_[t]);
    post.varint(postings_[t].size());
    std::uint32_t prev = 0;
    for (const auto& p : postings_[t]) {
      post.varint(p.doc - prev);  // gap-encoded, postings are sorted
      post.varint(p.tf);
      prev = p.doc;
    }
  }
  w.section(post);
  return w.data();
}

InvertedIndex InvertedIndex::deserialize(std::string_view bytes) {
  binio::Reader r(bytes);
  if (r.remaining() < 6 || r.bytes(4) != kMagic) throw Error(ErrorCode::kFormat, "not a SIX1 index file (bad magic)");
  const auto version = r.u16();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kFormat, "unsupported index version " + std::to_string(version));
  }
  InvertedIndex index;
  index.analyzer_ = read_analyzer(r.section());

  auto stats = r.section();
  index.params_.k1 = stats.f64();
  index.params_.b = stats.f64();
  const auto n_docs = stats.u64();
  const double stored_avg = stats.f64();
  for (std::uint64_t d = 0; d < n_docs; ++d) {
    index.doc_ids_.push_back(stats.str());
    index.doc_len_.push_back(static_cast<std::uint32_t>(stats.varint()));
  }

  auto post = r.section();
  const auto n_terms = post.u64();
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    index.terms_.push_back(post.str());
    const auto n = post.varint();
    std::vector<Posting> list;
    list.reserve(n);
    std::uint64_t doc = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      doc += post.varint();
      const auto tf = post.varint();
      if (doc >= n_docs) throw Error(ErrorCode::kFormat, "posting references document beyond n_docs");
      list.push_back({static_cast<std::uint32_t>(doc), static_cast<std::uint32_t>(tf)});
    }
    index.postings_.push_back(std::move(list));
  }
  if (!r.at_end()) throw Error(ErrorCode::kFormat, "trailing bytes after index payload");
  index.finalize();
  if (index.avg_doc_len_ != stored_avg) throw Error(ErrorCode::kFormat, "stored avg_doc_len disagrees with document lengths");
  return index;
}

void InvertedIndex::save(const std::string& path) const { binio::write_file(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::string& path) { return deserialize(binio::read_file(path)); }

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [_, w] : entries) s += w * w;
  return std::sqrt(s);
}

SparseVector tfidf_vector(const Vocab& vocab, std::string_view text, const AnalyzerConfig& cfg) {
  if (vocab.empty()) throw Error(ErrorCode::kInvalidArgument, "tf-idf needs a nonempty vocabulary");
  std::map<std::size_t, double> tf;
  for (const auto& t : tokenize(text, cfg)) {
    if (auto o = vocab.ordinal(t)) tf[*o] += 1.0;
  }
  SparseVector v;
  const double n = static_cast<double>(vocab.n_docs());
  for (const auto& [ord, count] : tf) {
    const double df = static_cast<double>(vocab.doc_freq(ord));
    v.entries.emplace_back(ord, count * (std::log((1.0 + n) / (1.0 + df)) + 1.0));
  }
  const double nrm = v.norm();
  if (nrm > 0.0) {
    for (auto& [_, w] : v.entries) w /= nrm;
  }
  return v;
}

}  // namespace hybridir

#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "error.hpp"

namespace hybridir {
namespace {

using nlohmann::json;

std::string location(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

std::string required_string(const json& obj, const char* field, const std::string& where) {
  const auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::kMissingField, where + ": missing field '" + field + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::kParse, where + ": field '" + field + "' must be a string");
  }
  return it->get<std::string>();
}

// Calls fn(object, line_no) for every non-blank line of a JSONL file.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, location(path, line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kParse, location(path, line_no) + ": expected a JSON object");
    }
    fn(obj, line_no);
  }
}

}  // namespace

std::string indexed_text(const Document& doc) {
  if (doc.context && !doc.context->empty()) return doc.sentence + " " + *doc.context;
  return doc.sentence;
}

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
  by_id_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (d.id.empty()) throw Error(ErrorCode::kInvalidArgument, "document " + std::to_string(i) + " has an empty id");
    if (d.sentence.empty()) throw Error(ErrorCode::kInvalidArgument, "document '" + d.id + "' has an empty sentence");
    if (!by_id_.emplace(d.id, i).second) throw Error(ErrorCode::kDuplicateId, "duplicate document id '" + d.id + "'");
  }
}

std::optional<std::size_t> Corpus::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

Corpus load_corpus(const std::string& path) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  for_each_record(path, [&](const json& obj, std::size_t line_no) {
    const auto where = location(path, line_no);
    Document doc;
    doc.id = required_string(obj, "id", where);
    doc.sentence = required_string(obj, "sentence", where);
    if (doc.id.empty()) throw Error(ErrorCode::kInvalidArgument, where + ": empty id");
    if (doc.sentence.empty()) throw Error(ErrorCode::kInvalidArgument, where + ": empty sentence");
    if (const auto it = obj.find("context"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw Error(ErrorCode::kParse, where + ": field 'context' must be a string or null");
      doc.context = it->get<std::string>();
    }
    if (!seen.insert(doc.id).second) {
      throw Error(ErrorCode::kDuplicateId, where + ": duplicate document id '" + doc.id + "'");
    }
    docs.push_back(std::move(doc));
  });
  return Corpus(std::move(docs));
}

std::vector<Query> load_queries(const std::string& path) {
  std::vector<Query> queries;
  std::set<std::string> seen;
  for_each_record(path, [&](const json& obj, std::size_t line_no) {
    const auto where = location(path, line_no);
    Query q;
    q.qid = required_string(obj, "qid", where);
    q.text = required_string(obj, "text", where);
    q.gold_id = required_string(obj, "gold_id", where);
    if (!seen.insert(q.qid).second) {
      throw Error(ErrorCode::kDuplicateId, where + ": duplicate query id '" + q.qid + "'");
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

Dataset load_dataset(const std::string& corpus_path, const std::string& queries_path) {
  return Dataset{load_corpus(corpus_path), load_queries(queries_path)};
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& d : corpus.docs()) {
    json obj = {{"id", d.id}, {"sentence", d.sentence}};
    obj["context"] = d.context ? json(*d.context) : json(nullptr);
    out << obj.dump() << '\n';
  }
}

void save_queries(const std::vector<Query>& queries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& q : queries) {
    out << json{{"qid", q.qid}, {"text", q.text}, {"gold_id", q.gold_id}}.dump() << '\n';
  }
}

void validate_gold_ids(const Corpus& corpus, const std::vector<Query>& queries) {
  for (const auto& q : queries) {
    if (!corpus.find(q.gold_id)) {
      throw Error(ErrorCode::kData, "query '" + q.qid + "' references unknown gold_id '" + q.gold_id + "'");
    }
  }
}

Vocab::Vocab(std::vector<std::string> terms, std::vector<std::size_t> doc_freq, std::size_t n_docs)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
  if (terms_.size() != doc_freq_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "vocab terms and doc_freq differ in length");
  }
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate vocab term '" + terms_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocab::ordinal(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocab build_vocab(const Corpus& corpus, const AnalyzerConfig& cfg) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyInput, "cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus.docs()) {
    auto tokens = tokenize(indexed_text(doc), cfg);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  for (auto& [term, count] : df) {
    if (count < cfg.min_count) continue;
    terms.push_back(term);
    freq.push_back(count);
  }
  if (terms.empty()) throw Error(ErrorCode::kEmptyInput, "vocabulary is empty after filtering");
  return Vocab(std::move(terms), std::move(freq), corpus.size());
}

}  // namespace hybridir

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scored_list.hpp"

namespace hybridir {

// Row-major matrix of f32 embeddings with one id per row.
//
// File layout ("EMB1"): magic, u32 count, u32 dim, count*dim f32, all
// little-endian. Ids live in a sidecar text file, one per LF-terminated line.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t dim, std::vector<std::string> ids, std::vector<float> values);

  static EmbeddingStore load(const std::string& vec_path, const std::string& ids_path);
  static EmbeddingStore parse(std::string_view vec_bytes, std::string_view ids_text);
  void save(const std::string& vec_path, const std::string& ids_path) const;
  std::string serialize_vectors() const;
  std::string serialize_ids() const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Exact inner-product search, accumulated in double. Ties resolve by id.
ScoredList dense_topk(const EmbeddingStore& store, std::span<const float> query, std::size_t k);

// Softmax-normalizes each list independently and sums per document (absent = 0).
ScoredList sum_fusion(const ScoredList& sparse, const ScoredList& dense, std::size_t k);

}  // namespace hybridir

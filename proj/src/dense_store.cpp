#include "dense_store.hpp"

#include <cmath>
#include <map>

#include "binary_io.hpp"
#include "error.hpp"
#include "router.hpp"

namespace hybridir {
namespace {

constexpr std::string_view kMagic = "EMB1";

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dim, std::vector<std::string> ids, std::vector<float> values)
    : dim_(dim), ids_(std::move(ids)), values_(std::move(values)) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dim must be positive");
  if (values_.size() != ids_.size() * dim_) {
    throw Error(ErrorCode::kFormat, "embedding payload holds " + std::to_string(values_.size()) + " values, expected " +
                                        std::to_string(ids_.size()) + " x " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kData, "non-finite embedding value in row " + std::to_string(i / dim_));
    }
  }
  by_id_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], i).second) throw Error(ErrorCode::kDuplicateId, "duplicate embedding id '" + ids_[i] + "'");
  }
}

EmbeddingStore EmbeddingStore::parse(std::string_view vec_bytes, std::string_view ids_text) {
  binio::Reader r(vec_bytes);
  if (r.remaining() < 12 || r.bytes(4) != kMagic) throw Error(ErrorCode::kFormat, "not an EMB1 file (bad magic)");
  const std::uint64_t count = r.u32();
  const std::uint64_t dim = r.u32();
  if (dim == 0) throw Error(ErrorCode::kFormat, "EMB1 header declares dim 0");
  if (r.remaining() != count * dim * 4) {
    throw Error(ErrorCode::kFormat, "EMB1 payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                                        std::to_string(count * dim * 4));
  }
  auto ids = split_lines(ids_text);
  if (ids.size() != count) {
    throw Error(ErrorCode::kFormat,
                "ids file has " + std::to_string(ids.size()) + " lines but EMB1 declares " + std::to_string(count) + " vectors");
  }
  std::vector<float> values(count * dim);
  for (auto& v : values) v = r.f32();
  return EmbeddingStore(dim, std::move(ids), std::move(values));
}

EmbeddingStore EmbeddingStore::load(const std::string& vec_path, const std::string& ids_path) {
  return parse(binio::read_file(vec_path), binio::read_file(ids_path));
}

std::string EmbeddingStore::serialize_vectors() const {
  binio::Writer w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(ids_.size()));
  w.u32(static_cast<std::uint32_t>(dim_));
  for (const float v : values_) w.f32(v);
  return w.data();
}

std::string EmbeddingStore::serialize_ids() const {
  std::string out;
  for (const auto& id : ids_) {
    out += id;
    out += '\n';
  }
  return out;
}

void EmbeddingStore::save(const std::string& vec_path, const std::string& ids_path) const {
  binio::write_file(vec_path, serialize_vectors());
  binio::write_file(ids_path, serialize_ids());
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ScoredList dense_topk(const EmbeddingStore& store, std::span<const float> query, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  if (query.size() != store.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query has dim " + std::to_string(query.size()) + ", store has dim " +
                                                   std::to_string(store.dim()));
  }
  ScoredList out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto row = store.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += static_cast<double>(row[j]) * static_cast<double>(query[j]);
    out.push_back({store.ids()[i], s});
  }
  truncate_topk(out, k);
  return out;
}

ScoredList sum_fusion(const ScoredList& sparse, const ScoredList& dense, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  std::map<std::string, double> fused;
  auto accumulate = [&](const ScoredList& list) {
    std::vector<double> scores;
    scores.reserve(list.size());
    for (const auto& e : list) scores.push_back(e.score);
    const auto probs = softmax_normalize(scores, list.size());
    for (std::size_t i = 0; i < list.size(); ++i) fused[list[i].id] += probs.probs[i];
  };
  if (!sparse.empty()) accumulate(sparse);
  if (!dense.empty()) accumulate(dense);
  ScoredList out;
  out.reserve(fused.size());
  for (const auto& [id, score] : fused) out.push_back({id, score});
  truncate_topk(out, k);
  return out;
}

}  // namespace hybridir

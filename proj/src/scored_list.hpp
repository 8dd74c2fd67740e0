#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hybridir {

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

// Ranked retrieval output: scores non-increasing, ids unique.
using ScoredList = std::vector<ScoredDoc>;

// Ordering shared by every retriever: score descending, then id ascending.
inline bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  return ranks_before(a.score, a.id, b.score, b.id);
}

// Keeps the best k entries of `list` in rank order.
inline void truncate_topk(ScoredList& list, std::size_t k) {
  const auto mid = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
  std::partial_sort(list.begin(), mid, list.end(),
                    [](const ScoredDoc& a, const ScoredDoc& b) { return ranks_before(a, b); });
  list.erase(mid, list.end());
}

}  // namespace hybridir

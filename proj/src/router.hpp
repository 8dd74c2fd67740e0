#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridir {

// 1-based rank of the gold document; nullopt when it was not retrieved.
using Rank = std::optional<std::size_t>;

enum class Route : int { kSparse = 0, kDense = 1 };

const char* route_name(Route r);

inline constexpr std::size_t kFeatureDepth = 64;
inline constexpr std::size_t kLadderSize = 7;

// Softmax over the leading scores of a ranked list; sums to 1 when nonempty.
struct NormalizedTop {
  std::vector<double> probs;
};

// f[i] = mean of the first 2^i normalized scores, zero-padded to 64 entries.
using FeatureLadder = std::array<double, kLadderSize>;

// Max-subtracted softmax over the first min(k, scores.size()) entries.
// Throws kData on non-finite input.
NormalizedTop softmax_normalize(std::span<const double> scores, std::size_t k = kFeatureDepth);

FeatureLadder extract_features(const NormalizedTop& top);

// Dense only when strictly better; ties and double absence go to Sparse.
Route make_label(Rank sparse_rank, Rank dense_rank);

// Better of the two ranks; absent only if both are absent.
Rank ceiling_rank(Rank sparse_rank, Rank dense_rank);

enum class FeatureSource { kSparse, kDense, kBoth };

// Which retrievers' ladders feed the router and how they are summarized:
// topk == 0 keeps the full 7-rung ladder, topk in {1, 4, 16, 64} keeps only
// the mean of the top k normalized scores.
struct FeatureSpec {
  FeatureSource source = FeatureSource::kSparse;
  std::size_t topk = 0;

  std::string source_name() const;
  std::string topk_name() const;
  std::size_t width() const;
  static FeatureSpec parse(const std::string& source, const std::string& topk);

  bool operator==(const FeatureSpec&) const = default;
};

std::vector<double> feature_variants(const FeatureLadder& sparse, const FeatureLadder& dense, const FeatureSpec& spec);
std::vector<double> feature_variants(const NormalizedTop& sparse, const NormalizedTop& dense, const FeatureSpec& spec);

enum class RouterKind { kThreshold, kLogReg };

struct RouterModel {
  RouterKind kind = RouterKind::kThreshold;
  double theta = 0.0;
  std::vector<double> weights;
  double bias = 0.0;
  FeatureSpec feature_spec;
  std::string analyzer_hash;

  std::string to_json() const;
  static RouterModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static RouterModel load(const std::string& path);
};

double sigmoid(double z);

// Probability of label 1 (Dense) under a logistic model.
double logreg_probability(std::span<const double> weights, double bias, std::span<const double> features);

// Threshold: Sparse iff features[0] >= theta. LogReg: Dense iff p >= 0.5.
Route route(const RouterModel& model, std::span<const double> features);

// Grid search over theta in {0.0, 0.1, ..., 1.0}. dev_mrr scores a full set of
// routing decisions; the smallest theta among the best scores wins.
using RoutingEvaluator = std::function<double(std::span<const Route>)>;
RouterModel fit_threshold(std::span<const double> top_scores, const RoutingEvaluator& dev_mrr);

struct LogRegConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 2000;
  double l2 = 0.0;
  // Zero init unless set; the seed only matters for random init.
  bool random_init = false;
  std::uint64_t seed = 0;
};

using FeatureMatrix = std::vector<std::vector<double>>;

// Mean binary cross-entropy plus (l2 / 2) * |w|^2.
double logreg_loss(const FeatureMatrix& x, std::span<const int> labels, std::span<const double> weights, double bias,
                   double l2);

// Gradient of logreg_loss; grad_w is resized to the feature width.
void logreg_gradient(const FeatureMatrix& x, std::span<const int> labels, std::span<const double> weights, double bias,
                     double l2, std::vector<double>& grad_w, double& grad_b);

struct LogRegFit {
  RouterModel model;
  std::vector<double> loss_history;  // loss before each epoch, then the final loss
};

// Full-batch gradient descent on logreg_loss.
LogRegFit fit_logreg(const FeatureMatrix& x, std::span<const int> labels, const LogRegConfig& cfg);

}  // namespace hybridir

#include "router.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "binary_io.hpp"
#include "error.hpp"

namespace hybridir {

const char* route_name(Route r) { return r == Route::kDense ? "dense" : "sparse"; }

NormalizedTop softmax_normalize(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "softmax depth k must be positive");
  const std::size_t n = std::min(k, scores.size());
  NormalizedTop out;
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::kData, "non-finite score at position " + std::to_string(i));
  }
  const double mx = *std::max_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(n));
  out.probs.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.probs[i] = std::exp(scores[i] - mx);
    z += out.probs[i];
  }
  for (auto& p : out.probs) p /= z;
  return out;
}

FeatureLadder extract_features(const NormalizedTop& top) {
  FeatureLadder f{};
  double prefix = 0.0;
  std::size_t consumed = 0;
  for (std::size_t i = 0; i < kLadderSize; ++i) {
    const std::size_t width = std::size_t{1} << i;
    for (; consumed < width && consumed < top.probs.size(); ++consumed) prefix += top.probs[consumed];
    f[i] = prefix / static_cast<double>(width);
  }
  return f;
}

Route make_label(Rank sparse_rank, Rank dense_rank) {
  if (!dense_rank) return Route::kSparse;
  if (!sparse_rank) return Route::kDense;
  return *dense_rank < *sparse_rank ? Route::kDense : Route::kSparse;
}

Rank ceiling_rank(Rank sparse_rank, Rank dense_rank) {
  if (!sparse_rank) return dense_rank;
  if (!dense_rank) return sparse_rank;
  return std::min(*sparse_rank, *dense_rank);
}

std::string FeatureSpec::source_name() const {
  switch (source) {
    case FeatureSource::kSparse: return "sparse";
    case FeatureSource::kDense: return "dense";
    case FeatureSource::kBoth: return "both";
  }
  return "sparse";
}

std::string FeatureSpec::topk_name() const { return topk == 0 ? "full" : std::to_string(topk); }

std::size_t FeatureSpec::width() const {
  const std::size_t per_source = topk == 0 ? kLadderSize : 1;
  return source == FeatureSource::kBoth ? 2 * per_source : per_source;
}

FeatureSpec FeatureSpec::parse(const std::string& source, const std::string& topk) {
  FeatureSpec spec;
  if (source == "sparse") {
    spec.source = FeatureSource::kSparse;
  } else if (source == "dense") {
    spec.source = FeatureSource::kDense;
  } else if (source == "both") {
    spec.source = FeatureSource::kBoth;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown feature source '" + source + "' (sparse|dense|both)");
  }
  if (topk == "full") {
    spec.topk = 0;
  } else if (topk == "1" || topk == "4" || topk == "16" || topk == "64") {
    spec.topk = std::stoul(topk);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown top-k spec '" + topk + "' (full|1|4|16|64)");
  }
  return spec;
}

std::vector<double> feature_variants(const FeatureLadder& sparse, const FeatureLadder& dense, const FeatureSpec& spec) {
  // mean of the top k for k = 2^i is exactly ladder rung i
  auto append = [&spec](std::vector<double>& out, const FeatureLadder& ladder) {
    if (spec.topk == 0) {
      out.insert(out.end(), ladder.begin(), ladder.end());
      return;
    }
    std::size_t rung = 0;
    while ((std::size_t{1} << rung) < spec.topk) ++rung;
    out.push_back(ladder[rung]);
  };
  std::vector<double> out;
  out.reserve(spec.width());
  if (spec.source != FeatureSource::kDense) append(out, sparse);
  if (spec.source != FeatureSource::kSparse) append(out, dense);
  return out;
}

std::vector<double> feature_variants(const NormalizedTop& sparse, const NormalizedTop& dense, const FeatureSpec& spec) {
  return feature_variants(extract_features(sparse), extract_features(dense), spec);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logreg_probability(std::span<const double> weights, double bias, std::span<const double> features) {
  if (weights.size() != features.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "router expects " + std::to_string(weights.size()) + " features, got " +
                                                   std::to_string(features.size()));
  }
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * features[i];
  return sigmoid(z);
}

Route route(const RouterModel& model, std::span<const double> features) {
  if (model.kind == RouterKind::kThreshold) {
    if (features.empty()) throw Error(ErrorCode::kDimensionMismatch, "threshold router needs at least one feature");
    return features[0] >= model.theta ? Route::kSparse : Route::kDense;
  }
  return logreg_probability(model.weights, model.bias, features) >= 0.5 ? Route::kDense : Route::kSparse;
}

RouterModel fit_threshold(std::span<const double> top_scores, const RoutingEvaluator& dev_mrr) {
  if (top_scores.empty()) throw Error(ErrorCode::kEmptyInput, "threshold fitting needs at least one dev query");
  RouterModel best;
  best.kind = RouterKind::kThreshold;
  best.feature_spec = FeatureSpec{FeatureSource::kSparse, 1};
  double best_mrr = -1.0;
  std::vector<Route> routes(top_scores.size());
  for (int step = 0; step <= 10; ++step) {
    const double theta = step / 10.0;
    for (std::size_t i = 0; i < top_scores.size(); ++i) {
      routes[i] = top_scores[i] >= theta ? Route::kSparse : Route::kDense;
    }
    const double m = dev_mrr(routes);
    if (m > best_mrr) {  // strict: ties keep the smaller theta
      best_mrr = m;
      best.theta = theta;
    }
  }
  return best;
}

namespace {

void check_training_data(const FeatureMatrix& x, std::span<const int> labels) {
  if (x.size() != labels.size()) throw Error(ErrorCode::kDimensionMismatch, "feature rows and labels differ in count");
  if (x.empty()) throw Error(ErrorCode::kEmptyInput, "logistic regression needs at least one example");
  const std::size_t width = x.front().size();
  for (const auto& row : x) {
    if (row.size() != width) throw Error(ErrorCode::kDimensionMismatch, "ragged feature matrix");
    for (const double v : row) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kData, "non-finite feature value");
    }
  }
  for (const int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double logreg_loss(const FeatureMatrix& x, std::span<const int> labels, std::span<const double> weights, double bias,
                   double l2) {
  double total = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[n][i];
    total += softplus(z) - labels[n] * z;
  }
  double reg = 0.0;
  for (const double w : weights) reg += w * w;
  return total / static_cast<double>(x.size()) + 0.5 * l2 * reg;
}

void logreg_gradient(const FeatureMatrix& x, std::span<const int> labels, std::span<const double> weights, double bias,
                     double l2, std::vector<double>& grad_w, double& grad_b) {
  grad_w.assign(weights.size(), 0.0);
  grad_b = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[n][i];
    const double err = sigmoid(z) - labels[n];
    for (std::size_t i = 0; i < weights.size(); ++i) grad_w[i] += err * x[n][i];
    grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < weights.size(); ++i) grad_w[i] = grad_w[i] * inv_n + l2 * weights[i];
  grad_b *= inv_n;
}

LogRegFit fit_logreg(const FeatureMatrix& x, std::span<const int> labels, const LogRegConfig& cfg) {
  check_training_data(x, labels);
  const std::size_t width = x.front().size();
  LogRegFit fit;
  auto& model = fit.model;
  model.kind = RouterKind::kLogReg;
  model.weights.assign(width, 0.0);
  model.bias = 0.0;
  if (cfg.random_init) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    for (auto& w : model.weights) w = normal(rng);
  }
  std::vector<double> grad_w;
  double grad_b = 0.0;
  fit.loss_history.reserve(cfg.epochs + 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    fit.loss_history.push_back(logreg_loss(x, labels, model.weights, model.bias, cfg.l2));
    logreg_gradient(x, labels, model.weights, model.bias, cfg.l2, grad_w, grad_b);
    for (std::size_t i = 0; i < width; ++i) model.weights[i] -= cfg.learning_rate * grad_w[i];
    model.bias -= cfg.learning_rate * grad_b;
  }
  fit.loss_history.push_back(logreg_loss(x, labels, model.weights, model.bias, cfg.l2));
  return fit;
}

std::string RouterModel::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind == RouterKind::kThreshold ? "threshold" : "logreg";
  if (kind == RouterKind::kThreshold) {
    j["theta"] = theta;
  } else {
    j["weights"] = weights;
    j["bias"] = bias;
  }
  j["feature_spec"] = {{"source", feature_spec.source_name()}, {"topk", feature_spec.topk_name()}};
  j["analyzer_hash"] = analyzer_hash;
  return j.dump(2) + "\n";
}

RouterModel RouterModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("router model: ") + e.what());
  }
  try {
    RouterModel m;
    const auto kind = j.at("kind").get<std::string>();
    const auto& fs = j.at("feature_spec");
    m.feature_spec = FeatureSpec::parse(fs.at("source").get<std::string>(), fs.at("topk").get<std::string>());
    m.analyzer_hash = j.value("analyzer_hash", "");
    if (kind == "threshold") {
      m.kind = RouterKind::kThreshold;
      m.theta = j.at("theta").get<double>();
      if (j.contains("weights")) throw Error(ErrorCode::kFormat, "threshold router must not carry weights");
      if (!(m.theta >= 0.0 && m.theta <= 1.0)) throw Error(ErrorCode::kFormat, "theta outside [0, 1]");
    } else if (kind == "logreg") {
      m.kind = RouterKind::kLogReg;
      m.weights = j.at("weights").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      if (j.contains("theta")) throw Error(ErrorCode::kFormat, "logreg router must not carry theta");
      if (m.weights.size() != m.feature_spec.width()) {
        throw Error(ErrorCode::kFormat, "logreg weight count does not match feature_spec");
      }
    } else {
      throw Error(ErrorCode::kFormat, "unknown router kind '" + kind + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMissingField, std::string("router model: ") + e.what());
  }
}

void RouterModel::save(const std::string& path) const { binio::write_file(path, to_json()); }

RouterModel RouterModel::load(const std::string& path) { return from_json(binio::read_file(path)); }

}  // namespace hybridir

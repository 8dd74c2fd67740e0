#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "dense_store.hpp"
#include "sparse_index.hpp"

namespace hybridir {

enum class ProbeInputKind { kTfidf, kDense };
enum class ProbeControl { kNone, kRandEmbedding, kRandLabel };

const char* probe_input_name(ProbeInputKind k);
const char* probe_control_name(ProbeControl c);
ProbeInputKind parse_probe_input(const std::string& s);
ProbeControl parse_probe_control(const std::string& s);

// One probing target set. `input` holds the frozen query representation as
// (dimension, value) pairs; dense inputs list every dimension.
struct ProbeExample {
  std::string qid;
  SparseVector input;
  std::vector<std::size_t> positive;     // P: query ∪ fact terms
  std::vector<std::size_t> negative;     // N: |N| = |P|, disjoint from P
  std::vector<std::size_t> query_terms;  // relevant set for query MAP / PPL
  std::vector<std::size_t> fact_terms;   // fact terms not in the query
};

// Builds P, N and the metric relevant sets. Returns nullopt when P is empty
// (nothing to probe). Negatives are drawn uniformly without replacement from
// vocab \ P with a generator keyed on (qid, seed). Throws kData when the
// vocabulary is too small to supply |P| negatives.
std::optional<ProbeExample> build_probe_targets(const Query& query, const Document& fact, const Vocab& vocab,
                                                const AnalyzerConfig& cfg, std::uint64_t seed);

SparseVector dense_input(std::span<const float> v);

class ProbeModel {
 public:
  ProbeModel() = default;
  ProbeModel(std::size_t n_vocab, std::size_t input_dim, ProbeInputKind kind, ProbeControl control);

  // PyTorch-style U(-1/sqrt(d), 1/sqrt(d)) init for weights and bias.
  void init_uniform(std::uint64_t seed);

  std::size_t n_vocab() const noexcept { return n_vocab_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  ProbeInputKind input_kind() const noexcept { return kind_; }
  ProbeControl control() const noexcept { return control_; }

  double* row(std::size_t term) { return weights_.data() + term * input_dim_; }
  const double* row(std::size_t term) const { return weights_.data() + term * input_dim_; }
  double& bias(std::size_t term) { return bias_[term]; }
  double bias(std::size_t term) const { return bias_[term]; }
  std::vector<double>& weights() noexcept { return weights_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  // Raw output W_j·x + b_j for a single term.
  double logit(std::size_t term, const SparseVector& x) const;

  void save(const std::string& path) const;
  static ProbeModel load(const std::string& path);

 private:
  std::size_t n_vocab_ = 0;
  std::size_t input_dim_ = 0;
  ProbeInputKind kind_ = ProbeInputKind::kTfidf;
  ProbeControl control_ = ProbeControl::kNone;
  std::vector<double> weights_;  // n_vocab x input_dim, row-major
  std::vector<double> bias_;
};

// sigmoid(W_j·x + b_j) for j in terms, in the order given.
std::vector<double> probe_forward(const ProbeModel& model, const SparseVector& x, std::span<const std::size_t> terms);

inline constexpr double kProbeClamp = 1e-7;

// Summed binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double probe_loss(std::span<const double> probs, std::span<const int> labels);

// Loss of one example over P ∪ N (positives labelled 1).
double probe_example_loss(const ProbeModel& model, const ProbeExample& ex);

// dL/dz_j = p_j - y_j for each term of P ∪ N, in P-then-N order.
std::vector<double> probe_logit_gradient(const ProbeModel& model, const ProbeExample& ex);

struct ProbeTrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

struct ProbeMetrics {
  double query_map = 0.0;
  double query_ppl = 0.0;
  double fact_map = 0.0;
  double fact_ppl = 0.0;
  std::size_t n_query = 0;  // examples contributing to query metrics
  std::size_t n_fact = 0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;  // 1-based epoch whose snapshot was kept
};

struct ProbeRun {
  ProbeModel model;
  ProbeMetrics dev_metrics;
  std::vector<double> train_loss;  // per epoch, summed over examples
  std::vector<double> dev_loss;    // per epoch, summed over examples
  std::size_t best_epoch = 0;      // 1-based
};

// Rewrites inputs (rand-embedding) or targets (rand-label) of both splits for a
// control task. Applied consistently: each qid keeps one substitute.
void apply_probe_control(std::vector<ProbeExample>& train, std::vector<ProbeExample>& dev, ProbeControl control,
                         std::size_t input_dim, std::uint64_t seed);

// Per-example Adam over the P ∪ N rows of each example; the snapshot with the
// lowest summed dev loss is returned. Controls are applied internally.
ProbeRun train_probe(std::vector<ProbeExample> train, std::vector<ProbeExample> dev, std::size_t n_vocab,
                     std::size_t input_dim, ProbeInputKind kind, ProbeControl control, const ProbeTrainConfig& cfg);

// Average precision of `relevant` under a full ranking by score (ties by ordinal).
double average_precision(std::span<const double> scores, std::span<const std::size_t> relevant);

// Full-vocabulary MAP and perplexity on query terms and on fact-only terms.
ProbeMetrics probe_metrics(const ProbeModel& model, std::span<const ProbeExample> examples);

// JSONL: one example per line with its split. Dense inputs are stored by
// reference (qid) and resolved against `vectors` when loading.
struct ProbeDataset {
  ProbeInputKind kind = ProbeInputKind::kTfidf;
  std::size_t input_dim = 0;
  std::size_t n_vocab = 0;
  std::vector<ProbeExample> train;
  std::vector<ProbeExample> dev;
};

// Builds one example per query whose gold document is the fact, skipping
// queries with nothing to probe, then splits off a seeded dev sample.
ProbeDataset build_probe_dataset(const Dataset& data, const AnalyzerConfig& cfg, ProbeInputKind kind,
                                 const EmbeddingStore* query_vectors, double dev_fraction, std::uint64_t seed,
                                 std::size_t* skipped = nullptr);

void save_probe_dataset(const ProbeDataset& ds, const std::string& path);
ProbeDataset load_probe_dataset(const std::string& path, const EmbeddingStore* vectors);

std::string probe_metrics_csv_header();
std::string probe_metrics_csv_row(ProbeInputKind kind, ProbeControl control, const ProbeMetrics& m);

}  // namespace hybridir

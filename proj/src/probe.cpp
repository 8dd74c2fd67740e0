#include "probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "binary_io.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "text_analyzer.hpp"

namespace hybridir {
namespace {

constexpr std::string_view kModelMagic = "PRB1";
constexpr std::uint16_t kModelVersion = 1;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Generator keyed on a qid and a run seed.
std::mt19937_64 keyed_rng(std::string_view qid, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(fnv1a(qid)), static_cast<std::uint32_t>(fnv1a(qid) >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> vocab_terms(std::string_view text, const Vocab& vocab, const AnalyzerConfig& cfg) {
  std::set<std::size_t> out;
  for (const auto& t : tokenize(text, cfg)) {
    if (auto o = vocab.ordinal(t)) out.insert(*o);
  }
  return {out.begin(), out.end()};
}

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::size_t> targets_of(const ProbeExample& ex) {
  std::vector<std::size_t> t(ex.positive);
  t.insert(t.end(), ex.negative.begin(), ex.negative.end());
  return t;
}

std::vector<int> labels_of(const ProbeExample& ex) {
  std::vector<int> y(ex.positive.size(), 1);
  y.resize(ex.positive.size() + ex.negative.size(), 0);
  return y;
}

void check_input(const ProbeModel& model, const SparseVector& x) {
  if (!x.entries.empty() && x.entries.back().first >= model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe input has dimension " + std::to_string(x.entries.back().first) +
                                                   " beyond model input size " + std::to_string(model.input_dim()));
  }
}

}  // namespace

const char* probe_input_name(ProbeInputKind k) { return k == ProbeInputKind::kDense ? "dense" : "tfidf"; }

const char* probe_control_name(ProbeControl c) {
  switch (c) {
    case ProbeControl::kNone: return "none";
    case ProbeControl::kRandEmbedding: return "rand-embedding";
    case ProbeControl::kRandLabel: return "rand-label";
  }
  return "none";
}

ProbeInputKind parse_probe_input(const std::string& s) {
  if (s == "tfidf") return ProbeInputKind::kTfidf;
  if (s == "dense") return ProbeInputKind::kDense;
  throw Error(ErrorCode::kInvalidArgument, "unknown probe input '" + s + "' (tfidf|dense)");
}

ProbeControl parse_probe_control(const std::string& s) {
  if (s == "none") return ProbeControl::kNone;
  if (s == "rand-embedding") return ProbeControl::kRandEmbedding;
  if (s == "rand-label") return ProbeControl::kRandLabel;
  throw Error(ErrorCode::kInvalidArgument, "unknown probe control '" + s + "' (none|rand-embedding|rand-label)");
}

std::optional<ProbeExample> build_probe_targets(const Query& query, const Document& fact, const Vocab& vocab,
                                                const AnalyzerConfig& cfg, std::uint64_t seed) {
  ProbeExample ex;
  ex.qid = query.qid;
  ex.query_terms = vocab_terms(query.text, vocab, cfg);
  const auto fact_all = vocab_terms(fact.sentence, vocab, cfg);
  std::set_difference(fact_all.begin(), fact_all.end(), ex.query_terms.begin(), ex.query_terms.end(),
                      std::back_inserter(ex.fact_terms));
  std::set_union(ex.query_terms.begin(), ex.query_terms.end(), fact_all.begin(), fact_all.end(),
                 std::back_inserter(ex.positive));
  if (ex.positive.empty()) return std::nullopt;

  const std::size_t need = ex.positive.size();
  const std::size_t available = vocab.size() - need;
  if (available < need) {
    throw Error(ErrorCode::kData, "query '" + query.qid + "': vocabulary too small to sample " + std::to_string(need) +
                                      " negative terms");
  }
  auto rng = keyed_rng(query.qid, seed, 1);
  if (available >= 4 * need) {
    std::unordered_set<std::size_t> taken(ex.positive.begin(), ex.positive.end());
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    while (ex.negative.size() < need) {
      const auto o = pick(rng);
      if (taken.insert(o).second) ex.negative.push_back(o);
    }
  } else {
    std::vector<std::size_t> pool;
    pool.reserve(available);
    std::size_t p = 0;
    for (std::size_t o = 0; o < vocab.size(); ++o) {
      while (p < ex.positive.size() && ex.positive[p] < o) ++p;
      if (p < ex.positive.size() && ex.positive[p] == o) continue;
      pool.push_back(o);
    }
    for (std::size_t i = 0; i < need; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    ex.negative.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
  }
  std::sort(ex.negative.begin(), ex.negative.end());
  return ex;
}

SparseVector dense_input(std::span<const float> v) {
  SparseVector x;
  x.entries.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x.entries.emplace_back(i, static_cast<double>(v[i]));
  return x;
}

ProbeModel::ProbeModel(std::size_t n_vocab, std::size_t input_dim, ProbeInputKind kind, ProbeControl control)
    : n_vocab_(n_vocab), input_dim_(input_dim), kind_(kind), control_(control),
      weights_(n_vocab * input_dim, 0.0), bias_(n_vocab, 0.0) {
  if (n_vocab == 0 || input_dim == 0) throw Error(ErrorCode::kInvalidArgument, "probe needs nonzero vocab and input size");
}

void ProbeModel::init_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim_));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& w : weights_) w = u(rng);
  for (auto& b : bias_) b = u(rng);
}

double ProbeModel::logit(std::size_t term, const SparseVector& x) const {
  const double* w = row(term);
  double z = bias_[term];
  for (const auto& [d, v] : x.entries) z += w[d] * v;
  return z;
}

void ProbeModel::save(const std::string& path) const {
  binio::Writer w;
  w.bytes(kModelMagic);
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(kind_));
  w.u8(static_cast<std::uint8_t>(control_));
  w.u64(n_vocab_);
  w.u64(input_dim_);
  for (const double v : weights_) w.f64(v);
  for (const double v : bias_) w.f64(v);
  binio::write_file(path, w.data());
}

ProbeModel ProbeModel::load(const std::string& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader r(bytes);
  if (r.remaining() < 6 || r.bytes(4) != kModelMagic) throw Error(ErrorCode::kFormat, "not a PRB1 probe model");
  if (r.u16() != kModelVersion) throw Error(ErrorCode::kFormat, "unsupported probe model version");
  const auto kind = r.u8();
  const auto control = r.u8();
  if (kind > 1 || control > 2) throw Error(ErrorCode::kFormat, "corrupt probe model header");
  const auto n_vocab = r.u64();
  const auto dim = r.u64();
  if (r.remaining() != (n_vocab * dim + n_vocab) * 8) throw Error(ErrorCode::kFormat, "probe model payload size mismatch");
  ProbeModel m(n_vocab, dim, static_cast<ProbeInputKind>(kind), static_cast<ProbeControl>(control));
  for (auto& v : m.weights_) v = r.f64();
  for (auto& v : m.bias_) v = r.f64();
  return m;
}

std::vector<double> probe_forward(const ProbeModel& model, const SparseVector& x, std::span<const std::size_t> terms) {
  check_input(model, x);
  std::vector<double> out;
  out.reserve(terms.size());
  for (const auto j : terms) {
    if (j >= model.n_vocab()) throw Error(ErrorCode::kDimensionMismatch, "term ordinal beyond probe vocabulary");
    out.push_back(stable_sigmoid(model.logit(j, x)));
  }
  return out;
}

double probe_loss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::kDimensionMismatch, "probe loss needs one label per probability");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbeClamp, 1.0 - kProbeClamp);
    loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

double probe_example_loss(const ProbeModel& model, const ProbeExample& ex) {
  const auto terms = targets_of(ex);
  return probe_loss(probe_forward(model, ex.input, terms), labels_of(ex));
}

std::vector<double> probe_logit_gradient(const ProbeModel& model, const ProbeExample& ex) {
  const auto terms = targets_of(ex);
  const auto probs = probe_forward(model, ex.input, terms);
  const auto y = labels_of(ex);
  std::vector<double> g(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) g[i] = probs[i] - y[i];
  return g;
}

void apply_probe_control(std::vector<ProbeExample>& train, std::vector<ProbeExample>& dev, ProbeControl control,
                         std::size_t input_dim, std::uint64_t seed) {
  if (control == ProbeControl::kNone) return;
  std::vector<ProbeExample*> pool;
  for (auto& e : train) pool.push_back(&e);
  for (auto& e : dev) pool.push_back(&e);

  if (control == ProbeControl::kRandEmbedding) {
    for (auto* e : pool) {
      auto rng = keyed_rng(e->qid, seed, 2);
      std::normal_distribution<double> normal(0.0, 1.0);
      e->input.entries.clear();
      for (std::size_t d = 0; d < input_dim; ++d) e->input.entries.emplace_back(d, normal(rng));
    }
    return;
  }

  if (pool.size() < 2) throw Error(ErrorCode::kInvalidArgument, "rand-label control needs at least two examples");
  std::vector<ProbeExample> original;
  original.reserve(pool.size());
  for (const auto* e : pool) original.push_back(*e);
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 2);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::size_t j = pick(rng);
    if (j >= i) ++j;
    const auto& src = original[j];
    pool[i]->positive = src.positive;
    pool[i]->negative = src.negative;
    pool[i]->query_terms = src.query_terms;
    pool[i]->fact_terms = src.fact_terms;
  }
}

ProbeRun train_probe(std::vector<ProbeExample> train, std::vector<ProbeExample> dev, std::size_t n_vocab,
                     std::size_t input_dim, ProbeInputKind kind, ProbeControl control, const ProbeTrainConfig& cfg) {
  if (train.empty() || dev.empty()) throw Error(ErrorCode::kEmptyInput, "probe training needs nonempty train and dev splits");
  apply_probe_control(train, dev, control, input_dim, cfg.seed);

  ProbeModel model(n_vocab, input_dim, kind, control);
  model.init_uniform(cfg.seed);

  // Adam state; only rows touched by an example are stepped.
  std::vector<double> m_w(model.weights().size(), 0.0), v_w(model.weights().size(), 0.0);
  std::vector<double> m_b(n_vocab, 0.0), v_b(n_vocab, 0.0);
  std::vector<double> grad_row(input_dim, 0.0);
  std::size_t step = 0;

  std::mt19937_64 rng(cfg.seed ^ 0xda942042e4dd58b5ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ProbeRun run;
  double best_dev = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    for (const auto idx : order) {
      const auto& ex = train[idx];
      const auto terms = targets_of(ex);
      const auto probs = probe_forward(model, ex.input, terms);
      const auto y = labels_of(ex);
      train_loss += probe_loss(probs, y);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto adam = [&](double& param, double& m, double& v, double g) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        param -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      };
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const std::size_t j = terms[t];
        const double dz = probs[t] - y[t];
        std::fill(grad_row.begin(), grad_row.end(), 0.0);
        for (const auto& [d, v] : ex.input.entries) grad_row[d] = dz * v;
        double* w = model.row(j);
        const std::size_t base = j * input_dim;
        for (std::size_t d = 0; d < input_dim; ++d) adam(w[d], m_w[base + d], v_w[base + d], grad_row[d]);
        adam(model.bias(j), m_b[j], v_b[j], dz);
      }
    }
    double dev_loss = 0.0;
    for (const auto& ex : dev) dev_loss += probe_example_loss(model, ex);
    run.train_loss.push_back(train_loss);
    run.dev_loss.push_back(dev_loss);
    if (dev_loss < best_dev) {
      best_dev = dev_loss;
      run.best_epoch = epoch;
      run.model = model;
    }
  }
  if (run.best_epoch == 0) run.model = model;  // zero epochs requested
  run.dev_metrics = probe_metrics(run.model, dev);
  run.dev_metrics.seed = cfg.seed;
  run.dev_metrics.epoch = run.best_epoch;
  return run;
}

double average_precision(std::span<const double> scores, std::span<const std::size_t> relevant) {
  if (relevant.empty()) return 0.0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<bool> is_rel(scores.size(), false);
  for (const auto r : relevant) is_rel.at(r) = true;
  double hits = 0.0, sum = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (is_rel[order[pos]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(pos + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

ProbeMetrics probe_metrics(const ProbeModel& model, std::span<const ProbeExample> examples) {
  ProbeMetrics m;
  double q_ap = 0.0, f_ap = 0.0, q_logp = 0.0, f_logp = 0.0;
  std::size_t q_terms = 0, f_terms = 0;
  std::vector<double> logits(model.n_vocab());
  for (const auto& ex : examples) {
    check_input(model, ex.input);
    for (std::size_t j = 0; j < model.n_vocab(); ++j) logits[j] = model.logit(j, ex.input);
    if (!ex.query_terms.empty()) {
      q_ap += average_precision(logits, ex.query_terms);
      ++m.n_query;
      for (const auto j : ex.query_terms) q_logp += log_sigmoid(logits[j]);
      q_terms += ex.query_terms.size();
    }
    if (!ex.fact_terms.empty()) {
      f_ap += average_precision(logits, ex.fact_terms);
      ++m.n_fact;
      for (const auto j : ex.fact_terms) f_logp += log_sigmoid(logits[j]);
      f_terms += ex.fact_terms.size();
    }
  }
  if (m.n_query) {
    m.query_map = q_ap / static_cast<double>(m.n_query);
    m.query_ppl = std::exp(-q_logp / static_cast<double>(q_terms));
  }
  if (m.n_fact) {
    m.fact_map = f_ap / static_cast<double>(m.n_fact);
    m.fact_ppl = std::exp(-f_logp / static_cast<double>(f_terms));
  }
  return m;
}

ProbeDataset build_probe_dataset(const Dataset& data, const AnalyzerConfig& cfg, ProbeInputKind kind,
                                 const EmbeddingStore* query_vectors, double dev_fraction, std::uint64_t seed,
                                 std::size_t* skipped) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dev fraction must be in (0, 1)");
  if (kind == ProbeInputKind::kDense && !query_vectors) {
    throw Error(ErrorCode::kInvalidArgument, "dense probe inputs need query embeddings");
  }
  validate_gold_ids(data.corpus, data.queries);
  const Vocab vocab = build_vocab(data.corpus, cfg);
  if (vocab.empty()) throw Error(ErrorCode::kEmptyInput, "probe vocabulary is empty");

  std::vector<ProbeExample> all;
  std::size_t n_skipped = 0;
  for (const auto& q : data.queries) {
    auto ex = build_probe_targets(q, data.corpus[*data.corpus.find(q.gold_id)], vocab, cfg, seed);
    if (!ex) {
      ++n_skipped;
      continue;
    }
    if (kind == ProbeInputKind::kDense) {
      const auto row = query_vectors->find(q.qid);
      if (!row) throw Error(ErrorCode::kData, "no query embedding for qid '" + q.qid + "'");
      ex->input = dense_input(query_vectors->row(*row));
    } else {
      ex->input = tfidf_vector(vocab, q.text, cfg);
    }
    all.push_back(std::move(*ex));
  }
  if (skipped) *skipped = n_skipped;
  if (all.size() < 2) throw Error(ErrorCode::kEmptyInput, "fewer than two probe examples");

  ProbeDataset ds;
  ds.kind = kind;
  ds.n_vocab = vocab.size();
  ds.input_dim = kind == ProbeInputKind::kDense ? query_vectors->dim() : vocab.size();
  const auto n_dev = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(all.size()))), 1, all.size() - 1);
  const auto dev_idx = sample_dev(all.size(), n_dev, seed);
  std::vector<bool> is_dev(all.size(), false);
  for (const auto i : dev_idx) is_dev[i] = true;
  for (std::size_t i = 0; i < all.size(); ++i) (is_dev[i] ? ds.dev : ds.train).push_back(std::move(all[i]));
  return ds;
}

void save_probe_dataset(const ProbeDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  nlohmann::ordered_json header;
  header["type"] = "header";
  header["input_kind"] = probe_input_name(ds.kind);
  header["input_dim"] = ds.input_dim;
  header["n_vocab"] = ds.n_vocab;
  out << header.dump() << '\n';
  auto emit = [&](const ProbeExample& e, const char* split) {
    nlohmann::ordered_json j;
    j["qid"] = e.qid;
    j["split"] = split;
    if (ds.kind == ProbeInputKind::kDense) {
      j["input"] = {{"ref", e.qid}};
    } else {
      auto entries = nlohmann::json::array();
      for (const auto& [d, v] : e.input.entries) entries.push_back({d, v});
      j["input"] = {{"entries", entries}};
    }
    j["positive"] = e.positive;
    j["negative"] = e.negative;
    j["query_terms"] = e.query_terms;
    j["fact_terms"] = e.fact_terms;
    out << j.dump() << '\n';
  };
  for (const auto& e : ds.train) emit(e, "train");
  for (const auto& e : ds.dev) emit(e, "dev");
}

ProbeDataset load_probe_dataset(const std::string& path, const EmbeddingStore* vectors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  ProbeDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("type", "") != "header") throw Error(ErrorCode::kFormat, where + ": missing probe dataset header");
        ds.kind = parse_probe_input(j.at("input_kind").get<std::string>());
        ds.input_dim = j.at("input_dim").get<std::size_t>();
        ds.n_vocab = j.at("n_vocab").get<std::size_t>();
        have_header = true;
        if (ds.kind == ProbeInputKind::kDense) {
          if (!vectors) throw Error(ErrorCode::kInvalidArgument, "dense probe dataset needs query embeddings");
          if (vectors->dim() != ds.input_dim) throw Error(ErrorCode::kDimensionMismatch, "query embeddings dim differs from probe dataset");
        }
        continue;
      }
      ProbeExample e;
      e.qid = j.at("qid").get<std::string>();
      const auto& input = j.at("input");
      if (ds.kind == ProbeInputKind::kDense) {
        const auto ref = input.at("ref").get<std::string>();
        const auto row = vectors->find(ref);
        if (!row) throw Error(ErrorCode::kData, where + ": no embedding for '" + ref + "'");
        e.input = dense_input(vectors->row(*row));
      } else {
        for (const auto& pair : input.at("entries")) {
          e.input.entries.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<double>());
        }
      }
      e.positive = j.at("positive").get<std::vector<std::size_t>>();
      e.negative = j.at("negative").get<std::vector<std::size_t>>();
      e.query_terms = j.at("query_terms").get<std::vector<std::size_t>>();
      e.fact_terms = j.at("fact_terms").get<std::vector<std::size_t>>();
      const auto split = j.at("split").get<std::string>();
      if (split == "train") {
        ds.train.push_back(std::move(e));
      } else if (split == "dev") {
        ds.dev.push_back(std::move(e));
      } else {
        throw Error(ErrorCode::kFormat, where + ": split must be train|dev");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParse, where + ": " + ex.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::kFormat, path + ": empty probe dataset");
  return ds;
}

std::string probe_metrics_csv_header() {
  return "input_kind,control,seed,epoch,query_map,query_ppl,fact_map,fact_ppl\n";
}

std::string probe_metrics_csv_row(ProbeInputKind kind, ProbeControl control, const ProbeMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%zu,%.6f,%.6f,%.6f,%.6f\n", probe_input_name(kind),
                probe_control_name(control), static_cast<unsigned long long>(m.seed), m.epoch, m.query_map,
                m.query_ppl, m.fact_map, m.fact_ppl);
  return buf;
}

}  // namespace hybridir

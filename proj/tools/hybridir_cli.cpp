// hybridir: command-line front end over the C API.
//
// stdout carries only the path of the final report; progress goes to stderr.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybridir/hybridir.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Failure {
  int exit_code;
  std::string message;
};

void check(hir_status s, const std::string& what) {
  if (s == HIR_OK) return;
  const int code = s == HIR_ERR_INVALID_ARGUMENT ? kExitUsage : kExitData;
  throw Failure{code, what + ": " + hir_last_error()};
}

void usage_error(const std::string& message) { throw Failure{kExitUsage, message}; }

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
template <typename T, void (*Free)(T*)>
using Handle = std::unique_ptr<T, Deleter<T, Free>>;

using Analyzer = Handle<hir_analyzer, hir_analyzer_free>;
using CorpusH = Handle<hir_corpus, hir_corpus_free>;
using QueriesH = Handle<hir_queries, hir_queries_free>;
using IndexH = Handle<hir_index, hir_index_free>;
using EmbH = Handle<hir_embeddings, hir_embeddings_free>;
using WorkbenchH = Handle<hir_workbench, hir_workbench_free>;
using HitsH = Handle<hir_hits, hir_hits_free>;
using RecordsH = Handle<hir_records, hir_records_free>;
using RouterH = Handle<hir_router, hir_router_free>;
using TimingH = Handle<hir_timing, hir_timing_free>;
using ProbeDataH = Handle<hir_probe_data, hir_probe_data_free>;
using ProbeModelH = Handle<hir_probe_model, hir_probe_model_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  hir_string_free(s);
  return out;
}

void progress(const std::string& line) { std::cerr << "[hybridir] " << line << '\n'; }

fs::path out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitData, "cannot create output directory " + dir + ": " + ec.message()};
  return fs::path(dir);
}

std::string write_report(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << body)) throw Failure{kExitData, "cannot write " + path.string()};
  return path.string();
}

std::string sidecar_for(const std::string& vec_path) { return fs::path(vec_path).replace_extension(".ids").string(); }

// ---- shared option groups

struct AnalyzerOpts {
  std::string stopwords;
  bool no_stopwords = false;
  bool no_stem = false;
  bool no_lowercase = false;
  std::size_t min_count = 1;

  void attach(CLI::App* app) {
    app->add_option("--stopwords", stopwords, "Stopword file, one per line")->check(CLI::ExistingFile);
    app->add_flag("--no-stopwords", no_stopwords, "Disable stopword removal");
    app->add_flag("--no-stem", no_stem, "Disable plural stemming");
    app->add_flag("--no-lowercase", no_lowercase, "Keep case");
    app->add_option("--min-count", min_count, "Minimum document frequency for probe vocabulary")
        ->check(CLI::PositiveNumber);
  }

  Analyzer make() const {
    hir_analyzer* a = nullptr;
    check(hir_analyzer_new(&a), "analyzer");
    Analyzer h(a);
    check(hir_analyzer_set_stem(a, no_stem ? 0 : 1), "analyzer");
    check(hir_analyzer_set_lowercase(a, no_lowercase ? 0 : 1), "analyzer");
    check(hir_analyzer_set_min_count(a, min_count), "analyzer");
    if (no_stopwords) check(hir_analyzer_load_stopwords(a, nullptr), "analyzer");
    if (!stopwords.empty()) check(hir_analyzer_load_stopwords(a, stopwords.c_str()), "stopwords");
    return h;
  }
};

struct EmbOpts {
  std::string doc_emb, doc_ids, query_emb, query_ids;

  void attach(CLI::App* app) {
    app->add_option("--doc-emb", doc_emb, "Document EMB1 vectors")->check(CLI::ExistingFile);
    app->add_option("--doc-ids", doc_ids, "Document ids sidecar (default: <doc-emb>.ids)")->check(CLI::ExistingFile);
    app->add_option("--query-emb", query_emb, "Query EMB1 vectors")->check(CLI::ExistingFile);
    app->add_option("--query-ids", query_ids, "Query ids sidecar (default: <query-emb>.ids)")->check(CLI::ExistingFile);
  }

  static EmbH load(const std::string& vec, std::string ids, const char* what) {
    hir_embeddings* e = nullptr;
    if (vec.empty()) {
      check(hir_embeddings_new(0, 0, nullptr, nullptr, &e), what);
      return EmbH(e);
    }
    if (ids.empty()) ids = sidecar_for(vec);
    if (!fs::exists(ids)) usage_error(std::string(what) + ": ids sidecar not found: " + ids);
    progress(std::string("loading ") + what + " " + vec);
    check(hir_embeddings_load(vec.c_str(), ids.c_str(), &e), what);
    return EmbH(e);
  }

  EmbH docs() const { return load(doc_emb, doc_ids, "document embeddings"); }
  EmbH queries() const { return load(query_emb, query_ids, "query embeddings"); }
};

QueriesH load_queries(const std::string& path) {
  hir_queries* q = nullptr;
  check(hir_queries_load(path.c_str(), &q), "queries");
  return QueriesH(q);
}

CorpusH load_corpus(const std::string& path) {
  hir_corpus* c = nullptr;
  check(hir_corpus_load(path.c_str(), &c), "corpus");
  return CorpusH(c);
}

IndexH load_index(const std::string& path) {
  hir_index* idx = nullptr;
  check(hir_index_load(path.c_str(), &idx), "index");
  return IndexH(idx);
}

RouterH load_router(const std::string& path) {
  hir_router* r = nullptr;
  check(hir_router_load(path.c_str(), &r), "router");
  return RouterH(r);
}

// Records either come from a saved JSONL file or are computed from scratch.
struct RecordOpts {
  std::string records, corpus, index, queries, router;
  std::size_t k = 1000;
  EmbOpts emb;

  void attach(CLI::App* app, bool with_router = true) {
    app->add_option("--records", records, "Saved rank records (JSONL) instead of recomputing")
        ->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Corpus JSONL (validates gold ids)")->check(CLI::ExistingFile);
    app->add_option("--index", index, "BM25 index file")->check(CLI::ExistingFile);
    app->add_option("--queries", queries, "Queries JSONL")->check(CLI::ExistingFile);
    if (with_router) app->add_option("--router", router, "Router model JSON")->check(CLI::ExistingFile);
    app->add_option("-k,--k", k, "Retrieval depth")->check(CLI::PositiveNumber);
    emb.attach(app);
  }

  RecordsH obtain(const fs::path* save_dir) const {
    RouterH rt;
    if (!router.empty()) rt = load_router(router);
    hir_records* recs = nullptr;
    if (!records.empty()) {
      progress("loading records " + records);
      check(hir_records_load(records.c_str(), &recs), "records");
      RecordsH h(recs);
      if (rt) check(hir_records_apply_router(recs, rt.get()), "router");
      return h;
    }
    if (corpus.empty() || index.empty() || queries.empty() || emb.doc_emb.empty() || emb.query_emb.empty()) {
      usage_error("need --records, or all of --corpus --index --queries --doc-emb --query-emb");
    }
    auto c = load_corpus(corpus);
    auto q = load_queries(queries);
    check(hir_queries_validate(q.get(), c.get()), "queries");
    auto idx = load_index(index);
    if (rt) check(hir_router_check(rt.get(), idx.get()), "router");
    auto d = emb.docs();
    auto qe = emb.queries();
    hir_workbench* wb = nullptr;
    check(hir_workbench_new(idx.get(), d.get(), qe.get(), k, 0, &wb), "workbench");
    WorkbenchH w(wb);
    progress("evaluating " + std::to_string(hir_queries_size(q.get())) + " queries");
    check(hir_workbench_evaluate(wb, q.get(), rt.get(), &recs), "evaluate");
    RecordsH h(recs);
    if (save_dir) {
      const auto path = (*save_dir / "records.jsonl").string();
      check(hir_records_save(recs, path.c_str()), "records");
      progress("records written to " + path);
    }
    return h;
  }
};

hir_system parse_system(const std::string& s) {
  if (s == "sparse") return HIR_SYSTEM_SPARSE;
  if (s == "dense") return HIR_SYSTEM_DENSE;
  if (s == "fusion") return HIR_SYSTEM_FUSION;
  if (s == "hybrid") return HIR_SYSTEM_HYBRID;
  if (s == "ceiling") return HIR_SYSTEM_CEILING;
  usage_error("unknown system '" + s + "'");
  return HIR_SYSTEM_SPARSE;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<double> csv_column(const std::string& row, std::size_t col) {
  std::vector<double> out;
  std::stringstream ss(row);
  std::string cell;
  for (std::size_t i = 0; std::getline(ss, cell, ','); ++i) {
    if (i == col) out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid sparse/dense retrieval and evaluation workbench"};
  app.set_version_flag("--version", std::string(hir_version()));
  app.require_subcommand(1);

  std::string report;  // final report path echoed on stdout
  std::function<void()> action;

  // index build
  auto* index_cmd = app.add_subcommand("index", "BM25 index operations")->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "Build a BM25 index from a corpus");
  std::string ib_corpus, ib_out;
  double ib_k1 = 1.2, ib_b = 0.75;
  AnalyzerOpts ib_an;
  index_build->add_option("--corpus", ib_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  index_build->add_option("--out", ib_out, "Index file to write")->required();
  index_build->add_option("--k1", ib_k1, "BM25 k1")->check(CLI::NonNegativeNumber);
  index_build->add_option("--b", ib_b, "BM25 b")->check(CLI::Range(0.0, 1.0));
  ib_an.attach(index_build);
  index_build->callback([&] {
    action = [&] {
      auto c = load_corpus(ib_corpus);
      auto an = ib_an.make();
      progress("indexing " + std::to_string(hir_corpus_size(c.get())) + " documents");
      hir_index* idx = nullptr;
      check(hir_index_build(c.get(), an.get(), ib_k1, ib_b, &idx), "index");
      IndexH h(idx);
      if (fs::path(ib_out).has_parent_path()) out_dir(fs::path(ib_out).parent_path().string());
      check(hir_index_save(idx, ib_out.c_str()), "index");
      progress(std::to_string(hir_index_num_terms(idx)) + " terms");
      report = ib_out;
    };
  });

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Run one system over a query set");
  std::string rt_system = "sparse", rt_index, rt_queries, rt_router, rt_out;
  std::size_t rt_k = 10;
  EmbOpts rt_emb;
  retrieve->add_option("--system", rt_system, "sparse|dense|fusion|hybrid")
      ->check(CLI::IsMember({"sparse", "dense", "fusion", "hybrid"}));
  retrieve->add_option("--index", rt_index, "BM25 index file")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--queries", rt_queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--router", rt_router, "Router model JSON (hybrid)")->check(CLI::ExistingFile);
  retrieve->add_option("-k,--k", rt_k, "Results per query")->check(CLI::PositiveNumber);
  retrieve->add_option("--out", rt_out, "Output directory")->required();
  rt_emb.attach(retrieve);
  retrieve->callback([&] {
    action = [&] {
      const auto system = parse_system(rt_system);
      if (system == HIR_SYSTEM_HYBRID && rt_router.empty()) usage_error("--system hybrid needs --router");
      if (system != HIR_SYSTEM_SPARSE && (rt_emb.doc_emb.empty() || rt_emb.query_emb.empty())) {
        usage_error("--system " + rt_system + " needs --doc-emb and --query-emb");
      }
      auto idx = load_index(rt_index);
      auto q = load_queries(rt_queries);
      RouterH router;
      if (system == HIR_SYSTEM_HYBRID) {
        router = load_router(rt_router);
        check(hir_router_check(router.get(), idx.get()), "router");
      }
      auto d = rt_emb.docs();
      auto qe = rt_emb.queries();
      hir_workbench* wb = nullptr;
      check(hir_workbench_new(idx.get(), d.get(), qe.get(), rt_k, 0, &wb), "workbench");
      WorkbenchH w(wb);
      std::string body = "qid\trank\tdoc_id\tscore\troute\n";
      const std::size_t n = hir_queries_size(q.get());
      for (std::size_t i = 0; i < n; ++i) {
        hir_hits* hits = nullptr;
        check(hir_workbench_retrieve(wb, system, q.get(), i, router.get(), &hits), "retrieve");
        HitsH h(hits);
        const auto route = hir_hits_route(hits);
        const char* route_name = route == HIR_ROUTE_SPARSE ? "sparse" : route == HIR_ROUTE_DENSE ? "dense" : "-";
        for (std::size_t r = 0; r < hir_hits_size(hits); ++r) {
          char score[64];
          std::snprintf(score, sizeof(score), "%.9g", hir_hits_score(hits, r));
          body += std::string(hir_queries_qid(q.get(), i)) + '\t' + std::to_string(r + 1) + '\t' +
                  hir_hits_id(hits, r) + '\t' + score + '\t' + route_name + '\n';
        }
      }
      const auto dir = out_dir(rt_out);
      report = write_report(dir / ("run_" + rt_system + ".tsv"), body);
    };
  });

  // router fit
  auto* router_cmd = app.add_subcommand("router", "Routing classifiers")->require_subcommand(1);
  auto* router_fit = router_cmd->add_subcommand("fit", "Fit a router on dev records");
  std::string rf_kind = "threshold", rf_features = "sparse", rf_topk = "full", rf_out;
  double rf_lr = 0.1, rf_l2 = 0.0;
  std::size_t rf_epochs = 2000;
  RecordOpts rf_rec;
  router_fit->add_option("--kind", rf_kind, "threshold|logreg")->check(CLI::IsMember({"threshold", "logreg"}));
  router_fit->add_option("--features", rf_features, "sparse|dense|both")
      ->check(CLI::IsMember({"sparse", "dense", "both"}));
  router_fit->add_option("--topk-spec", rf_topk, "full|1|4|16|64")->check(CLI::IsMember({"full", "1", "4", "16", "64"}));
  router_fit->add_option("--lr", rf_lr, "Learning rate (logreg)")->check(CLI::PositiveNumber);
  router_fit->add_option("--epochs", rf_epochs, "Gradient steps (logreg)");
  router_fit->add_option("--l2", rf_l2, "L2 penalty (logreg)")->check(CLI::NonNegativeNumber);
  router_fit->add_option("--out", rf_out, "Output directory")->required();
  rf_rec.attach(router_fit, false);
  router_fit->callback([&] {
    action = [&] {
      if (rf_kind == "threshold" && (rf_features != "sparse" || rf_topk != "full")) {
        usage_error("the threshold router uses the top normalized BM25 score; drop --features/--topk-spec");
      }
      const auto dir = out_dir(rf_out);
      auto recs = rf_rec.obtain(&dir);
      hir_router* r = nullptr;
      if (rf_kind == "threshold") {
        check(hir_router_fit_threshold(recs.get(), &r), "router fit");
      } else {
        progress("fitting logistic regression on " + std::to_string(hir_records_size(recs.get())) + " records");
        check(hir_router_fit_logreg(recs.get(), rf_features.c_str(), rf_topk.c_str(), rf_lr, rf_epochs, rf_l2, &r),
              "router fit");
      }
      RouterH h(r);
      if (!rf_rec.index.empty()) {
        auto idx = load_index(rf_rec.index);
        check(hir_router_bind(r, idx.get()), "router");
      }
      const auto path = (dir / "router.json").string();
      check(hir_router_save(r, path.c_str()), "router");
      report = path;
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation reports")->require_subcommand(1);
  std::uint64_t ev_seed = 0;
  std::string ev_out;

  auto* eval_mrr = eval_cmd->add_subcommand("mrr", "MRR of every system, ceiling and bootstrap p-values");
  RecordOpts em_rec;
  std::size_t em_iters = 10000;
  em_rec.attach(eval_mrr);
  eval_mrr->add_option("--iters", em_iters, "Bootstrap iterations")->check(CLI::PositiveNumber);
  eval_mrr->add_option("--seed", ev_seed, "Bootstrap seed");
  eval_mrr->add_option("--out", ev_out, "Output directory")->required();
  eval_mrr->callback([&] {
    action = [&] {
      const auto dir = out_dir(ev_out);
      auto recs = em_rec.obtain(&dir);
      report = write_report(dir / "eval.csv", take([&] {
                     char* s = nullptr;
                     check(hir_records_report(recs.get(), em_iters, ev_seed, 0, &s), "report");
                     return s;
                   }()));
      char* text = nullptr;
      check(hir_records_report(recs.get(), em_iters, ev_seed, 1, &text), "report");
      write_report(dir / "eval.txt", take(text));
    };
  });

  auto* eval_boot = eval_cmd->add_subcommand("bootstrap", "Paired bootstrap test between two systems");
  RecordOpts eb_rec;
  std::string eb_a = "hybrid", eb_b = "sparse";
  std::size_t eb_iters = 10000;
  eb_rec.attach(eval_boot);
  const auto systems = CLI::IsMember({"sparse", "dense", "fusion", "hybrid", "ceiling"});
  eval_boot->add_option("--system-a", eb_a, "System tested for superiority")->check(systems);
  eval_boot->add_option("--system-b", eb_b, "Baseline system")->check(systems);
  eval_boot->add_option("--iters", eb_iters, "Bootstrap iterations")->check(CLI::PositiveNumber);
  eval_boot->add_option("--seed", ev_seed, "Bootstrap seed");
  eval_boot->add_option("--out", ev_out, "Output directory")->required();
  eval_boot->callback([&] {
    action = [&] {
      const auto dir = out_dir(ev_out);
      auto recs = eb_rec.obtain(&dir);
      double ma = 0, mb = 0, p = 0;
      check(hir_records_mrr(recs.get(), parse_system(eb_a), &ma), "mrr");
      check(hir_records_mrr(recs.get(), parse_system(eb_b), &mb), "mrr");
      check(hir_records_bootstrap(recs.get(), parse_system(eb_a), parse_system(eb_b), eb_iters, ev_seed, &p),
            "bootstrap");
      const std::string body = "system_a,system_b,mrr_a,mrr_b,iters,seed,p_value\n" + eb_a + ',' + eb_b + ',' +
                               fmt(ma) + ',' + fmt(mb) + ',' + std::to_string(eb_iters) + ',' +
                               std::to_string(ev_seed) + ',' + fmt(p) + '\n';
      report = write_report(dir / "bootstrap.csv", body);
    };
  });

  auto* eval_rs = eval_cmd->add_subcommand("routing-stats", "Routing counts and per-query wins against each system");
  RecordOpts er_rec;
  er_rec.attach(eval_rs);
  eval_rs->add_option("--out", ev_out, "Output directory")->required();
  eval_rs->callback([&] {
    action = [&] {
      const auto dir = out_dir(ev_out);
      auto recs = er_rec.obtain(&dir);
      char* csv = nullptr;
      check(hir_records_routing_stats(recs.get(), &csv), "routing stats");
      report = write_report(dir / "routing_stats.csv", take(csv));
    };
  });

  auto* eval_hist = eval_cmd->add_subcommand("histogram", "Top normalized BM25 score histogram by oracle label");
  RecordOpts eh_rec;
  std::size_t eh_bins = 10;
  eh_rec.attach(eval_hist, false);
  eval_hist->add_option("--bins", eh_bins, "Number of bins over [0, 1]")->check(CLI::PositiveNumber);
  eval_hist->add_option("--out", ev_out, "Output directory")->required();
  eval_hist->callback([&] {
    action = [&] {
      const auto dir = out_dir(ev_out);
      auto recs = eh_rec.obtain(&dir);
      char* csv = nullptr;
      check(hir_records_histogram(recs.get(), eh_bins, &csv), "histogram");
      report = write_report(dir / "histogram.csv", take(csv));
    };
  });

  auto* eval_time = eval_cmd->add_subcommand("time", "Wall-clock timing of one system");
  std::string et_system = "sparse", et_index, et_queries, et_router;
  std::size_t et_warmup = 10, et_k = 1000;
  double et_delay_ms = 0.0;
  EmbOpts et_emb;
  eval_time->add_option("--system", et_system, "sparse|dense|fusion|hybrid")
      ->check(CLI::IsMember({"sparse", "dense", "fusion", "hybrid"}));
  eval_time->add_option("--index", et_index, "BM25 index file")->required()->check(CLI::ExistingFile);
  eval_time->add_option("--queries", et_queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  eval_time->add_option("--router", et_router, "Router model JSON (hybrid)")->check(CLI::ExistingFile);
  eval_time->add_option("--warmup", et_warmup, "Untimed warm-up queries");
  eval_time->add_option("-k,--k", et_k, "Retrieval depth")->check(CLI::PositiveNumber);
  eval_time->add_option("--dense-delay-ms", et_delay_ms, "Delay added to every dense call")
      ->check(CLI::NonNegativeNumber);
  eval_time->add_option("--out", ev_out, "Output directory")->required();
  et_emb.attach(eval_time);
  eval_time->callback([&] {
    action = [&] {
      const auto system = parse_system(et_system);
      if (system == HIR_SYSTEM_HYBRID && et_router.empty()) usage_error("--system hybrid needs --router");
      if (system != HIR_SYSTEM_SPARSE && (et_emb.doc_emb.empty() || et_emb.query_emb.empty())) {
        usage_error("--system " + et_system + " needs --doc-emb and --query-emb");
      }
      auto idx = load_index(et_index);
      auto q = load_queries(et_queries);
      RouterH router;
      if (system == HIR_SYSTEM_HYBRID) {
        router = load_router(et_router);
        check(hir_router_check(router.get(), idx.get()), "router");
      }
      auto d = et_emb.docs();
      auto qe = et_emb.queries();
      hir_workbench* wb = nullptr;
      const auto delay_us = static_cast<std::uint64_t>(std::llround(et_delay_ms * 1000.0));
      check(hir_workbench_new(idx.get(), d.get(), qe.get(), et_k, delay_us, &wb), "workbench");
      WorkbenchH w(wb);
      progress("timing " + et_system + " on " + std::to_string(hir_queries_size(q.get())) + " queries");
      hir_timing* t = nullptr;
      check(hir_workbench_time(wb, system, q.get(), et_warmup, router.get(), &t), "timing");
      TimingH th(t);
      char* csv = nullptr;
      check(hir_timing_csv(t, &csv), "timing");
      const auto dir = out_dir(ev_out);
      report = write_report(dir / ("timing_" + et_system + ".csv"), take(csv));
    };
  });

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Lexical probing")->require_subcommand(1);
  auto* probe_build = probe_cmd->add_subcommand("build", "Build probe targets and a train/dev split");
  std::string pb_corpus, pb_queries, pb_input = "tfidf", pb_out;
  double pb_dev = 0.2;
  std::uint64_t pb_seed = 0;
  AnalyzerOpts pb_an;
  EmbOpts pb_emb;
  probe_build->add_option("--corpus", pb_corpus, "Corpus JSONL (gold facts)")->required()->check(CLI::ExistingFile);
  probe_build->add_option("--queries", pb_queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  probe_build->add_option("--input", pb_input, "tfidf|dense")->check(CLI::IsMember({"tfidf", "dense"}));
  probe_build->add_option("--dev-fraction", pb_dev, "Share of examples held out")->check(CLI::Range(0.01, 0.99));
  probe_build->add_option("--seed", pb_seed, "Negative sampling and split seed");
  probe_build->add_option("--out", pb_out, "Output directory")->required();
  pb_an.attach(probe_build);
  pb_emb.attach(probe_build);
  probe_build->callback([&] {
    action = [&] {
      if (pb_input == "dense" && pb_emb.query_emb.empty()) usage_error("--input dense needs --query-emb");
      auto c = load_corpus(pb_corpus);
      auto q = load_queries(pb_queries);
      auto an = pb_an.make();
      EmbH qe;
      if (pb_input == "dense") qe = pb_emb.queries();
      hir_probe_data* d = nullptr;
      std::size_t skipped = 0;
      check(hir_probe_build(c.get(), q.get(), an.get(), pb_input.c_str(), qe.get(), pb_dev, pb_seed, &d, &skipped),
            "probe build");
      ProbeDataH h(d);
      progress(std::to_string(hir_probe_data_train_size(d)) + " train / " + std::to_string(hir_probe_data_dev_size(d)) +
               " dev examples, " + std::to_string(skipped) + " skipped");
      const auto path = (out_dir(pb_out) / "probe_data.jsonl").string();
      check(hir_probe_data_save(d, path.c_str()), "probe data");
      report = path;
    };
  });

  auto* probe_train = probe_cmd->add_subcommand("train", "Train probes over several seeds");
  std::string pt_data, pt_control = "none", pt_out;
  std::vector<std::uint64_t> pt_seeds{0, 1, 2, 3, 4};
  std::size_t pt_epochs = 50;
  double pt_lr = 0.001;
  EmbOpts pt_emb;
  probe_train->add_option("--data", pt_data, "Probe dataset JSONL")->required()->check(CLI::ExistingFile);
  probe_train->add_option("--control", pt_control, "none|rand-embedding|rand-label")
      ->check(CLI::IsMember({"none", "rand-embedding", "rand-label"}));
  probe_train->add_option("--seeds", pt_seeds, "Seeds, comma separated")->delimiter(',');
  probe_train->add_option("--epochs", pt_epochs, "Training epochs")->check(CLI::PositiveNumber);
  probe_train->add_option("--lr", pt_lr, "Adam learning rate")->check(CLI::PositiveNumber);
  probe_train->add_option("--out", pt_out, "Output directory")->required();
  pt_emb.attach(probe_train);
  probe_train->callback([&] {
    action = [&] {
      EmbH qe;
      if (!pt_emb.query_emb.empty()) qe = pt_emb.queries();
      hir_probe_data* d = nullptr;
      check(hir_probe_data_load(pt_data.c_str(), qe.get(), &d), "probe data");
      ProbeDataH dh(d);
      const auto dir = out_dir(pt_out);
      std::string csv = hir_probe_metrics_header();
      std::vector<std::string> rows;
      for (const auto seed : pt_seeds) {
        progress("training probe (control " + pt_control + ", seed " + std::to_string(seed) + ")");
        hir_probe_model* m = nullptr;
        char* row = nullptr;
        check(hir_probe_train(d, pt_control.c_str(), pt_epochs, pt_lr, seed, &m, &row), "probe train");
        ProbeModelH mh(m);
        rows.push_back(take(row));
        csv += rows.back();
        const auto model_path = (dir / ("probe_" + pt_control + "_seed" + std::to_string(seed) + ".bin")).string();
        check(hir_probe_model_save(m, model_path.c_str()), "probe model");
      }
      // mean and sample std of each metric column
      std::string summary = "metric,mean,std,n\n";
      const char* names[] = {"query_map", "query_ppl", "fact_map", "fact_ppl"};
      for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> v;
        for (const auto& r : rows) {
          for (double x : csv_column(r, 4 + c)) v.push_back(x);
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        summary += std::string(names[c]) + ',' + fmt(mean) + ',' + fmt(sd) + ',' + std::to_string(v.size()) + '\n';
      }
      write_report(dir / ("probe_summary_" + pt_control + ".csv"), summary);
      report = write_report(dir / ("probe_metrics_" + pt_control + ".csv"), csv);
    };
  });

  auto* probe_metrics = probe_cmd->add_subcommand("metrics", "Dev-split metrics of a saved probe");
  std::string pm_data, pm_model, pm_out;
  std::uint64_t pm_seed = 0;
  EmbOpts pm_emb;
  probe_metrics->add_option("--data", pm_data, "Probe dataset JSONL")->required()->check(CLI::ExistingFile);
  probe_metrics->add_option("--model", pm_model, "Probe model file")->required()->check(CLI::ExistingFile);
  probe_metrics->add_option("--seed", pm_seed, "Seed the probe was trained with (control substitution)");
  probe_metrics->add_option("--out", pm_out, "Output directory")->required();
  pm_emb.attach(probe_metrics);
  probe_metrics->callback([&] {
    action = [&] {
      EmbH qe;
      if (!pm_emb.query_emb.empty()) qe = pm_emb.queries();
      hir_probe_data* d = nullptr;
      check(hir_probe_data_load(pm_data.c_str(), qe.get(), &d), "probe data");
      ProbeDataH dh(d);
      hir_probe_model* m = nullptr;
      check(hir_probe_model_load(pm_model.c_str(), &m), "probe model");
      ProbeModelH mh(m);
      char* row = nullptr;
      check(hir_probe_evaluate(m, d, pm_seed, &row), "probe metrics");
      report = write_report(out_dir(pm_out) / "probe_eval.csv", hir_probe_metrics_header() + take(row));
    };
  });

  // dataset synth
  auto* dataset_cmd = app.add_subcommand("dataset", "Datasets")->require_subcommand(1);
  auto* synth = dataset_cmd->add_subcommand("synth", "Write the synthetic routing workload");
  std::string sy_out;
  std::size_t sy_docs = 200, sy_queries = 400;
  std::uint64_t sy_seed = 42;
  synth->add_option("--out", sy_out, "Output directory")->required();
  synth->add_option("--docs", sy_docs, "Number of documents")->check(CLI::Range(2, 1000000));
  synth->add_option("--queries", sy_queries, "Number of queries")->check(CLI::Range(2, 1000000));
  synth->add_option("--seed", sy_seed, "Generator seed");
  synth->callback([&] {
    action = [&] {
      progress("generating " + std::to_string(sy_docs) + " documents and " + std::to_string(sy_queries) + " queries");
      check(hir_synth_write(sy_out.c_str(), sy_docs, sy_queries, sy_seed), "dataset synth");
      report = sy_out;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (action) action();
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  if (!report.empty()) std::cout << report << '\n';
  return 0;
}

// Drives the hybridir executable as a subprocess.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Sandbox {
 public:
  Sandbox() {
    std::random_device rd;
    root_ = fs::temp_directory_path() / ("hybridir_cli_" + std::to_string(rd()));
    fs::create_directories(root_);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  std::string operator/(const std::string& name) const { return (root_ / name).string(); }

  Result run(const std::string& args) const {
    const auto out = root_ / "_stdout", err = root_ / "_stderr";
    const std::string cmd = std::string("cd '") + root_.string() + "' && '" + HYBRIDIR_CLI + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path root_;
};

std::map<std::string, double> read_metrics(const std::string& path) {
  std::map<std::string, double> m;
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    m[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return m;
}

const std::string kEmb = " --doc-emb d/doc_emb.bin --query-emb d/query_emb.bin";

}  // namespace

TEST_CASE("index build happy path") {
  Sandbox box;
  std::ofstream(box / "c.jsonl") << "{\"id\":\"d1\",\"sentence\":\"cats and dogs\"}\n"
                                    "{\"id\":\"d2\",\"sentence\":\"a bird\",\"context\":\"birds fly\"}\n";
  const auto r = box.run("index build --corpus c.jsonl --out idx.bin");
  CHECK(r.code == 0);
  CHECK(r.out == "idx.bin\n");
  CHECK(fs::file_size(box / "idx.bin") > 4);
  CHECK(slurp(box / "idx.bin").substr(0, 4) == "SIX1");
}

TEST_CASE("usage errors exit 1") {
  Sandbox box;
  CHECK(box.run("index build --corpus c.jsonl --out x --bogus").code == 1);
  CHECK(box.run("").code == 1);
  CHECK(box.run("index build --out x").code == 1);
  CHECK(box.run("index build --corpus missing.jsonl --out x").code == 1);
  CHECK(box.run("retrieve --system quantum --index i --queries q --out o").code == 1);
}

TEST_CASE("data errors exit 2 and name the culprit") {
  Sandbox box;
  REQUIRE(box.run("dataset synth --out d --docs 20 --queries 10 --seed 3").code == 0);
  std::ofstream(box / "q.jsonl") << "{\"qid\":\"q00\",\"text\":\"cats\",\"gold_id\":\"d00\"}\n"
                                    "{\"qid\":\"q07\",\"text\":\"dogs\",\"gold_id\":\"d404\"}\n";
  REQUIRE(box.run("index build --corpus d/corpus.jsonl --out idx.bin").code == 0);
  const auto r = box.run("eval mrr --corpus d/corpus.jsonl --index idx.bin --queries q.jsonl --out e" + kEmb);
  CHECK(r.code == 2);
  CHECK(r.err.find("q07") != std::string::npos);
  CHECK(r.out.empty());

  std::ofstream(box / "broken.jsonl") << "{\"id\":\"d1\",\"sentence\":\"x\"}\n{\n";
  const auto p = box.run("index build --corpus broken.jsonl --out i2.bin");
  CHECK(p.code == 2);
  CHECK(p.err.find(":2") != std::string::npos);
}

TEST_CASE("full pipeline on the synthetic workload") {
  Sandbox box;
  REQUIRE(box.run("dataset synth --out d --docs 200 --queries 400 --seed 42").code == 0);
  const auto before = slurp(box / "d/corpus.jsonl") + slurp(box / "d/queries.jsonl") + slurp(box / "d/query_emb.bin");
  REQUIRE(box.run("index build --corpus d/corpus.jsonl --out idx.bin").code == 0);
  REQUIRE(box.run("router fit --kind logreg --features sparse --topk-spec full --corpus d/corpus.jsonl --index idx.bin "
                  "--queries d/queries_dev.jsonl --out r" + kEmb)
              .code == 0);
  const auto eval = box.run("eval mrr --corpus d/corpus.jsonl --index idx.bin --queries d/queries_test.jsonl "
                            "--router r/router.json --iters 1000 --out e" + kEmb);
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("e/eval.csv\n") != std::string::npos);
  const auto m = read_metrics(box / "e/eval.csv");
  REQUIRE(m.count("mrr_hybrid"));
  CHECK(m.at("mrr_hybrid") >= std::max(m.at("mrr_sparse"), m.at("mrr_dense")) - 0.02);
  CHECK(m.at("mrr_hybrid") <= m.at("mrr_ceiling") + 1e-9);

  // Saved records feed the other reports without recomputation.
  CHECK(box.run("eval bootstrap --records e/records.jsonl --system-a hybrid --system-b sparse --iters 500 --out b").code ==
        0);
  CHECK(box.run("eval routing-stats --records e/records.jsonl --out s").code == 0);
  CHECK(box.run("eval histogram --records e/records.jsonl --out h").code == 0);
  CHECK(slurp(box / "s/routing_stats.csv").find("routed_sparse") != std::string::npos);

  REQUIRE(box.run("retrieve --system hybrid --index idx.bin --queries d/queries_test.jsonl --router r/router.json -k 5 "
                  "--out run" + kEmb)
              .code == 0);
  const auto run1 = slurp(box / "run/run_hybrid.tsv");
  CHECK(!run1.empty());

  // Reruns are byte-identical and inputs are left alone.
  REQUIRE(box.run("router fit --kind logreg --features sparse --topk-spec full --corpus d/corpus.jsonl --index idx.bin "
                  "--queries d/queries_dev.jsonl --out r2" + kEmb)
              .code == 0);
  CHECK(slurp(box / "r/router.json") == slurp(box / "r2/router.json"));
  REQUIRE(box.run("eval mrr --corpus d/corpus.jsonl --index idx.bin --queries d/queries_test.jsonl "
                  "--router r/router.json --iters 1000 --out e2" + kEmb)
              .code == 0);
  CHECK(slurp(box / "e/eval.csv") == slurp(box / "e2/eval.csv"));
  CHECK(slurp(box / "e/records.jsonl") == slurp(box / "e2/records.jsonl"));
  REQUIRE(box.run("retrieve --system hybrid --index idx.bin --queries d/queries_test.jsonl --router r/router.json -k 5 "
                  "--out run2" + kEmb)
              .code == 0);
  CHECK(slurp(box / "run2/run_hybrid.tsv") == run1);
  CHECK(slurp(box / "d/corpus.jsonl") + slurp(box / "d/queries.jsonl") + slurp(box / "d/query_emb.bin") == before);

  // A router fitted against another analyzer is refused.
  REQUIRE(box.run("index build --corpus d/corpus.jsonl --no-stem --out idx_nostem.bin").code == 0);
  const auto bad = box.run("eval mrr --corpus d/corpus.jsonl --index idx_nostem.bin --queries d/queries_test.jsonl "
                           "--router r/router.json --out e3" + kEmb);
  CHECK(bad.code == 2);
  CHECK(bad.err.find("analyzer") != std::string::npos);

  const auto t = box.run("eval time --system sparse --index idx.bin --queries d/queries_test.jsonl --warmup 3 --out t" +
                         kEmb);
  CHECK(t.code == 0);
  CHECK(slurp(box / "t/timing_sparse.csv").find("warmup=3") != std::string::npos);
}

TEST_CASE("probe subcommands") {
  Sandbox box;
  REQUIRE(box.run("dataset synth --out d --docs 30 --queries 40 --seed 1").code == 0);
  REQUIRE(box.run("probe build --corpus d/corpus.jsonl --queries d/queries.jsonl --input tfidf --out p").code == 0);
  REQUIRE(box.run("probe train --data p/probe_data.jsonl --control none --seeds 0,1 --epochs 3 --out t").code == 0);
  const auto metrics = slurp(box / "t/probe_metrics_none.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
  CHECK(fs::exists(box / "t/probe_none_seed1.bin"));
  CHECK(fs::exists(box / "t/probe_summary_none.csv"));
  CHECK(box.run("probe metrics --data p/probe_data.jsonl --model t/probe_none_seed0.bin --seed 0 --out m").code == 0);
  CHECK(box.run("probe train --data p/probe_data.jsonl --control sideways --out t").code == 1);
  REQUIRE(box.run("probe build --corpus d/corpus.jsonl --queries d/queries.jsonl --input dense --out pd" + kEmb).code ==
          0);
  CHECK(box.run("probe train --data pd/probe_data.jsonl --control rand-label --seeds 0 --epochs 2 --out td" + kEmb)
            .code == 0);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "dense_store.hpp"
#include "probe.hpp"

namespace hybridir {

// Synthetic routing workload.
//
// Every document has six words of its own plus two words from a small shared
// pool. Half of the queries are "overlap" queries (three of the gold
// document's own words, so BM25 finds it) and half are "paraphrase" queries
// (only shared-pool words the gold lacks, so BM25 cannot find it).
//
// Mock embeddings: documents are one-hot. Each query vector assigns a fixed,
// strictly decreasing score profile to a permutation of the documents.
// Paraphrase queries put the gold document first; overlap queries use a
// uniformly random permutation. Every query therefore has the same dense
// score distribution, so dense scores carry no routing signal.
struct SynthConfig {
  std::size_t n_docs = 200;
  std::size_t n_queries = 400;
  std::uint64_t seed = 42;
};

struct SynthWorkload {
  Corpus corpus;
  std::vector<Query> queries;
  std::vector<bool> overlap;  // per query
  EmbeddingStore doc_vectors;
  EmbeddingStore query_vectors;
  std::vector<std::size_t> dev;   // query indices used for fitting
  std::vector<std::size_t> test;  // held-out query indices
};

SynthWorkload make_synthetic_workload(const SynthConfig& cfg = {});

// Writes corpus.jsonl, queries.jsonl, queries_dev.jsonl, queries_test.jsonl,
// doc_emb.bin/.ids and query_emb.bin/.ids under dir (created if missing).
void write_synthetic_workload(const SynthWorkload& w, const std::string& dir);

std::vector<Query> select_queries(const std::vector<Query>& queries, const std::vector<std::size_t>& idx);

// Linear-probe sanity task where input dimension j encodes term j: each
// example's input is the normalized indicator of its query terms. Fact-only
// terms are drawn independently of the input.
struct SynthProbeTask {
  std::size_t n_vocab = 0;
  std::vector<ProbeExample> train;
  std::vector<ProbeExample> dev;
};

SynthProbeTask make_identity_probe_task(std::size_t n_terms = 40, std::size_t n_train = 1000, std::size_t n_dev = 100,
                                        std::uint64_t seed = 7);

// Expected average precision of a uniformly random ranking of n items with r relevant.
double chance_average_precision(std::size_t n, std::size_t r);

}  // namespace hybridir

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hybridir {

struct AnalyzerConfig {
  bool lowercase = true;
  bool stem = true;
  std::set<std::string> stopwords;
  // Minimum document frequency for a term to enter a Vocab.
  std::size_t min_count = 1;

  // Lowercasing, stemming and the built-in English stopword list.
  static AnalyzerConfig defaults();

  // Stable 16-hex-digit fingerprint of every field. Used to reject router
  // models and indexes produced with a different analysis chain.
  std::string hash() const;

  bool operator==(const AnalyzerConfig&) const = default;
};

const std::set<std::string>& default_stopwords();

// Reads one stopword per line; blank lines and lines starting with '#' are skipped.
std::set<std::string> load_stopwords(const std::string& path);

// Harman-style plural stripper:
//   "ies" -> "y"  unless preceded by 'e' or 'a'
//   "es"  -> "e"  unless preceded by 'a', 'e' or 'o'
//   "s"   -> ""   unless preceded by 'u' or 's'
// A rule never fires if the result would be shorter than two bytes.
std::string stem_plural(std::string_view token);

// Lowercase (optional), split on runs of non-alphanumeric code points, drop
// single-character tokens and stopwords, then stem (optional). Stems that land
// on a stopword are dropped as well so the analyzer is a fixed point on its
// own output.
std::vector<std::string> tokenize(std::string_view text, const AnalyzerConfig& cfg);

}  // namespace hybridir

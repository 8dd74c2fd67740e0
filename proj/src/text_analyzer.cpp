#include "text_analyzer.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace hybridir {
namespace {

constexpr const char* kStopwords[] = {
    "a",          "about",   "above",    "after",    "again",     "against", "all",     "am",
    "an",         "and",     "any",      "are",      "as",        "at",      "be",      "because",
    "been",       "before",  "being",    "below",    "between",   "both",    "but",     "by",
    "can",        "could",   "did",      "do",       "does",      "doing",   "down",    "during",
    "each",       "few",     "for",      "from",     "further",   "had",     "has",     "have",
    "having",     "he",      "her",      "here",     "hers",      "herself", "him",     "himself",
    "his",        "how",     "i",        "if",       "in",        "into",    "is",      "it",
    "its",        "itself",  "just",     "me",       "more",      "most",    "my",      "myself",
    "no",         "nor",     "not",      "now",      "of",        "off",     "on",      "once",
    "only",       "or",      "other",    "our",      "ours",      "ourselves", "out",   "over",
    "own",        "same",    "she",      "should",   "so",        "some",    "such",    "than",
    "that",       "the",     "their",    "theirs",   "them",      "themselves", "then", "there",
    "these",      "they",    "this",     "those",    "through",   "to",      "too",     "under",
    "until",      "up",      "very",     "was",      "we",        "were",    "what",    "when",
    "where",      "which",   "while",    "who",      "whom",      "why",     "will",    "with",
    "would",      "you",     "your",     "yours",    "yourself",  "yourselves", "also",  "may",
};

// Decodes one UTF-8 code point starting at text[pos]; advances pos. Malformed
// sequences decode to U+FFFD and consume a single byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + len > text.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto cont = static_cast<unsigned char>(text[pos + i]);
    if ((cont & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  pos += len;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Table-free approximation of the Unicode alphanumeric classes: ASCII exact,
// everything outside the common punctuation/symbol/space blocks counts as a
// word character.
bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows, math, box drawing
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xD800 && cp <= 0xF8FF) return false;  // surrogates, private use
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFE50 && cp <= 0xFE6F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp >= 0xFF3B && cp <= 0xFF40) return false;
  if (cp >= 0xFF5B && cp <= 0xFF65) return false;
  if (cp == 0xFFFD || cp == 0xFEFF) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  return cp;
}

std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (const char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Character immediately before a suffix of the given length, or '\0'.
char before_suffix(std::string_view s, std::size_t suffix_len) {
  return s.size() > suffix_len ? s[s.size() - suffix_len - 1] : '\0';
}

}  // namespace

AnalyzerConfig AnalyzerConfig::defaults() {
  AnalyzerConfig cfg;
  cfg.stopwords = default_stopwords();
  return cfg;
}

std::string AnalyzerConfig::hash() const {
  // FNV-1a 64 over a canonical serialization.
  std::ostringstream canon;
  canon << "lc=" << lowercase << ";stem=" << stem << ";min=" << min_count << ";sw=";
  for (const auto& w : stopwords) canon << w << '\x1f';
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : canon.str()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words(std::begin(kStopwords), std::end(kStopwords));
  return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open stopword file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    words.insert(line);
  }
  return words;
}

std::string stem_plural(std::string_view token) {
  std::string word(token);
  if (ends_with(word, "ies") && word.size() - 2 >= 2) {
    const char prev = before_suffix(word, 3);
    if (prev != 'e' && prev != 'a') {
      word.replace(word.size() - 3, 3, "y");
      return word;
    }
  }
  if (ends_with(word, "es") && word.size() - 1 >= 2) {
    const char prev = before_suffix(word, 2);
    if (prev != 'a' && prev != 'e' && prev != 'o') {
      word.pop_back();
      return word;
    }
  }
  if (ends_with(word, "s") && word.size() - 1 >= 2) {
    const char prev = before_suffix(word, 1);
    if (prev != 'u' && prev != 's') word.pop_back();
  }
  return word;
}

std::vector<std::string> tokenize(std::string_view text, const AnalyzerConfig& cfg) {
  std::vector<std::string> out;
  std::string current;

  auto flush = [&]() {
    if (current.empty()) return;
    std::string token = std::move(current);
    current.clear();
    if (codepoint_count(token) < 2 || cfg.stopwords.count(token)) return;
    if (cfg.stem) {
      token = stem_plural(token);
      if (codepoint_count(token) < 2 || cfg.stopwords.count(token)) return;
    }
    out.push_back(std::move(token));
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = decode_utf8(text, pos);
    if (!is_word_char(cp)) {
      flush();
      continue;
    }
    if (cfg.lowercase) cp = to_lower(cp);
    encode_utf8(cp, current);
  }
  flush();
  return out;
}

}  // namespace hybridir

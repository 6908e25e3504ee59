#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/error.hpp"

namespace hatebench {

using StopwordSet = std::set<std::string>;

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sorted, strictly increasing indices; no explicit zeros.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<SparseEntry> entries;

  double norm() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.value * e.value;
    return std::sqrt(s);
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

inline SparseVector scaled(SparseVector v, double factor) {
  for (auto& e : v.entries) e.value *= factor;
  return v;
}

enum class Analyzer { Word, Char };

struct VectorizerConfig {
  Analyzer analyzer = Analyzer::Word;
  int ngram_lo = 1;
  int ngram_hi = 1;
  std::size_t max_features = 20000;
  StopwordSet stopwords;

  void validate() const {
    if (ngram_lo < 1 || ngram_hi < ngram_lo) {
      throw Error(ErrorCode::BadConfig, "ngram range (" + std::to_string(ngram_lo) + "," +
                                            std::to_string(ngram_hi) + ")");
    }
    if (max_features < 1) throw Error(ErrorCode::BadConfig, "max_features must be >= 1");
  }
};

/// Word (1,3) n-grams capped at 20,000 terms.
inline VectorizerConfig default_word_config() {
  return VectorizerConfig{Analyzer::Word, 1, 3, 20000, {}};
}

/// Character (3,6) n-grams capped at 40,000 terms.
inline VectorizerConfig default_char_config() {
  return VectorizerConfig{Analyzer::Char, 3, 6, 40000, {}};
}

/// Stopwords are dropped before n-grams are formed, so n-grams span the gap.
inline std::vector<std::string> word_ngrams(std::span<const std::string> tokens, int lo, int hi,
                                            const StopwordSet& stopwords) {
  std::vector<const std::string*> kept;
  kept.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stopwords.contains(t)) kept.push_back(&t);
  }
  std::vector<std::string> out;
  for (int n = lo; n <= hi; ++n) {
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= kept.size(); ++i) {
      std::string term = *kept[i];
      for (std::size_t j = 1; j < un; ++j) {
        term.push_back(' ');
        term += *kept[i + j];
      }
      out.push_back(std::move(term));
    }
  }
  return out;
}

/// Sliding windows over code points (spaces included).
inline std::vector<std::string> char_ngrams(std::string_view text, int lo, int hi) {
  // byte offset of every code point start, plus the end
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  const std::size_t n_cp = starts.size();
  starts.push_back(text.size());
  std::vector<std::string> out;
  for (int n = lo; n <= hi; ++n) {
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= n_cp; ++i) {
      out.emplace_back(text.substr(starts[i], starts[i + un] - starts[i]));
    }
  }
  return out;
}

/// Text seen by the char analyzer: the cleaned text, or the tokens re-joined
/// with stopwords removed when a stopword list is configured.
inline std::string char_source(const Document& doc, const StopwordSet& stopwords) {
  if (stopwords.empty()) return doc.cleaned;
  std::string out;
  for (const auto& t : doc.tokens) {
    if (stopwords.contains(t)) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

inline std::vector<std::string> analyze(const VectorizerConfig& cfg, const Document& doc) {
  if (cfg.analyzer == Analyzer::Word) {
    return word_ngrams(doc.tokens, cfg.ngram_lo, cfg.ngram_hi, cfg.stopwords);
  }
  return char_ngrams(char_source(doc, cfg.stopwords), cfg.ngram_lo, cfg.ngram_hi);
}

struct TfidfModel {
  VectorizerConfig config;
  std::vector<std::string> terms;  // column -> term
  std::unordered_map<std::string, std::uint32_t> vocab;
  std::vector<double> idf;
  std::size_t n_docs = 0;

  std::size_t dim() const { return terms.size(); }

  void rebuild_index() {
    vocab.clear();
    vocab.reserve(terms.size());
    for (std::size_t j = 0; j < terms.size(); ++j) vocab.emplace(terms[j], static_cast<std::uint32_t>(j));
  }
};

inline double smoothed_idf(std::size_t n_docs, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

/// Keeps the `max_features` most frequent terms (total count, ties by term);
/// columns are assigned in lexicographic term order.
inline TfidfModel fit_tfidf(std::span<const Document> docs, const VectorizerConfig& config) {
  config.validate();
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot fit a vectorizer on zero documents");

  struct TermStats {
    std::size_t total = 0;
    std::size_t df = 0;
    std::size_t last_doc = SIZE_MAX;
  };
  std::unordered_map<std::string, TermStats> stats;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto& term : analyze(config, docs[d])) {
      auto& st = stats[std::move(term)];
      st.total += 1;
      if (st.last_doc != d) {
        st.df += 1;
        st.last_doc = d;
      }
    }
  }

  std::vector<std::pair<const std::string*, const TermStats*>> ranked;
  ranked.reserve(stats.size());
  for (const auto& [term, st] : stats) ranked.emplace_back(&term, &st);
  auto better = [](const auto& a, const auto& b) {
    if (a.second->total != b.second->total) return a.second->total > b.second->total;
    return *a.first < *b.first;
  };
  const std::size_t keep = std::min(config.max_features, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), better);
  ranked.resize(keep);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return *a.first < *b.first; });

  TfidfModel model;
  model.config = config;
  model.n_docs = docs.size();
  model.terms.reserve(keep);
  model.idf.reserve(keep);
  for (const auto& [term, st] : ranked) {
    model.terms.push_back(*term);
    model.idf.push_back(smoothed_idf(docs.size(), st->df));
  }
  model.rebuild_index();
  return model;
}

/// Raw counts times idf over in-vocabulary terms, L2-normalized.
inline SparseVector transform(const TfidfModel& model, const Document& doc) {
  std::vector<std::uint32_t> cols;
  for (const auto& term : analyze(model.config, doc)) {
    auto it = model.vocab.find(term);
    if (it != model.vocab.end()) cols.push_back(it->second);
  }
  std::sort(cols.begin(), cols.end());
  SparseVector v;
  v.dim = model.dim();
  for (std::size_t i = 0; i < cols.size();) {
    std::size_t j = i;
    while (j < cols.size() && cols[j] == cols[i]) ++j;
    v.entries.push_back({cols[i], static_cast<double>(j - i) * model.idf[cols[i]]});
    i = j;
  }
  const double n = v.norm();
  if (n > 0.0) {
    for (auto& e : v.entries) e.value /= n;
  }
  return v;
}

/// Concatenates index spaces; block i is offset by the dims of blocks 0..i-1.
inline SparseVector union_features(std::span<const SparseVector> parts) {
  SparseVector out;
  for (const auto& p : parts) {
    for (const auto& e : p.entries) {
      out.entries.push_back({static_cast<std::uint32_t>(e.index + out.dim), e.value});
    }
    out.dim += p.dim;
  }
  return out;
}

/// One token per line; blank lines and lines starting with '#' are skipped.
inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path);
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t");
    out.insert(line.substr(b, e - b + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature blocks used by the linear models

enum class FeatureBlocks { Word, Char, Union };

inline const char* feature_blocks_name(FeatureBlocks f) {
  switch (f) {
    case FeatureBlocks::Word: return "word";
    case FeatureBlocks::Char: return "char";
    case FeatureBlocks::Union: return "union";
  }
  return "?";
}

/// Fitted vectorizers whose outputs are unioned in order.
struct FeaturePipeline {
  std::vector<TfidfModel> blocks;

  std::size_t dim() const {
    std::size_t d = 0;
    for (const auto& b : blocks) d += b.dim();
    return d;
  }

  SparseVector transform(const Document& doc) const {
    std::vector<SparseVector> parts;
    parts.reserve(blocks.size());
    for (const auto& b : blocks) parts.push_back(hatebench::transform(b, doc));
    return union_features(parts);
  }
};

inline FeaturePipeline fit_features(std::span<const Document> docs, FeatureBlocks which,
                                    const StopwordSet& stopwords = {}) {
  FeaturePipeline p;
  if (which != FeatureBlocks::Char) {
    auto cfg = default_word_config();
    cfg.stopwords = stopwords;
    p.blocks.push_back(fit_tfidf(docs, cfg));
  }
  if (which != FeatureBlocks::Word) {
    auto cfg = default_char_config();
    cfg.stopwords = stopwords;
    p.blocks.push_back(fit_tfidf(docs, cfg));
  }
  return p;
}

}  // namespace hatebench

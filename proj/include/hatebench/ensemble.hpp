#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/error.hpp"
#include "hatebench/label.hpp"
#include "hatebench/linear.hpp"

namespace hatebench {

// ---------------------------------------------------------------------------
// Weighted soft vote

inline ClassScores combine_scores(std::span<const ClassScores> score_sets, std::span<const double> weights) {
  if (score_sets.size() < 2 || score_sets.size() != weights.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(score_sets.size()) + " score sets, " +
                                               std::to_string(weights.size()) + " weights (need >= 2, equal)");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::BadConfig, "ensemble weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroWeights, "ensemble weights sum to zero");
  ClassScores out{};
  for (std::size_t i = 0; i < score_sets.size(); ++i) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[i] * score_sets[i][c];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// Weighted mean of the members' class scores, then argmax (lowest index on ties).
inline Label soft_vote(std::span<const ClassScores> score_sets, std::span<const double> weights) {
  return predict_label(combine_scores(score_sets, weights));
}

// ---------------------------------------------------------------------------
// Lexicon

struct Lexicon {
  std::set<std::string> profanity;
  std::set<std::string> pronouns;
  std::string source;
};

inline std::string lowercase(std::string_view s) {
  std::u32string out;
  for (char32_t c : unicode::decode(s)) unicode::append_lower(out, c);
  return unicode::encode(out);
}

/// Small built-in lexicon of common profanity abbreviations and second/third-person pronouns.
inline Lexicon default_lexicon() {
  return Lexicon{{"vl", "vkl", "dcm"}, {"mày", "thằng", "con"}, "<builtin>"};
}

/// Lines "profanity<TAB>token" or "pronoun<TAB>token"; '#' comments and blank lines skipped.
inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path);
  Lexicon lex;
  lex.source = path;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::MalformedLine, path + ":" + std::to_string(n) + ": missing tab");
    const std::string kind = line.substr(0, tab);
    const std::string token = lowercase(line.substr(tab + 1));
    if (token.empty()) throw Error(ErrorCode::MalformedLine, path + ":" + std::to_string(n) + ": empty token");
    if (kind == "profanity") {
      lex.profanity.insert(token);
    } else if (kind == "pronoun") {
      lex.pronouns.insert(token);
    } else {
      throw Error(ErrorCode::MalformedLine, path + ":" + std::to_string(n) + ": unknown category '" + kind + "'");
    }
  }
  return lex;
}

struct LexiconHits {
  std::vector<std::string> profanity;
  std::vector<std::string> pronouns;
};

/// Exact token matches in document order; repeated tokens are reported each time.
inline LexiconHits flag_lexicon(const Document& doc, const Lexicon& lex) {
  LexiconHits hits;
  for (const auto& t : doc.tokens) {
    if (lex.profanity.contains(t)) hits.profanity.push_back(t);
    if (lex.pronouns.contains(t)) hits.pronouns.push_back(t);
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Error analysis

struct ErrorRecord {
  std::string id;
  Label gold = Label::Clean;
  Label predicted = Label::Clean;
  std::string text;
  std::vector<std::string> profanity_hits;
  std::vector<std::string> pronoun_hits;
};

struct ErrorSummary {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> errors{};         // [gold][pred]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> with_profanity{};
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> with_pronoun{};
  std::size_t total_errors = 0;
  double profanity_fraction = 0.0;  // errors with >= 1 profanity hit / all errors
  double pronoun_fraction = 0.0;

  /// Fraction of errors on gold class `g` that contain a pronoun.
  double pronoun_fraction_for_gold(Label g) const { return gold_fraction(with_pronoun, g); }
  double profanity_fraction_for_gold(Label g) const { return gold_fraction(with_profanity, g); }

 private:
  double gold_fraction(const std::array<std::array<std::size_t, kNumClasses>, kNumClasses>& hits, Label g) const {
    const auto gi = static_cast<std::size_t>(to_index(g));
    std::size_t n = 0, h = 0;
    for (std::size_t p = 0; p < errors[gi].size(); ++p) {
      n += errors[gi][p];
      h += hits[gi][p];
    }
    return n == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(n);
  }
};

struct ErrorReport {
  std::vector<ErrorRecord> records;
  ErrorSummary summary;
};

/// One record per document whose prediction differs from its gold label.
inline ErrorReport error_report(const Corpus& corpus, std::span<const Label> predicted, const Lexicon& lex) {
  if (predicted.size() != corpus.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                               std::to_string(corpus.size()) + " documents");
  }
  ErrorReport rep;
  std::size_t prof = 0, pron = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.documents[i];
    if (!d.label) throw Error(ErrorCode::UnlabeledDocument, d.id);
    if (*d.label == predicted[i]) continue;
    auto hits = flag_lexicon(d, lex);
    const auto g = static_cast<std::size_t>(to_index(*d.label));
    const auto p = static_cast<std::size_t>(to_index(predicted[i]));
    rep.summary.errors[g][p] += 1;
    if (!hits.profanity.empty()) {
      rep.summary.with_profanity[g][p] += 1;
      ++prof;
    }
    if (!hits.pronouns.empty()) {
      rep.summary.with_pronoun[g][p] += 1;
      ++pron;
    }
    rep.records.push_back({d.id, *d.label, predicted[i], d.raw, std::move(hits.profanity), std::move(hits.pronouns)});
  }
  rep.summary.total_errors = rep.records.size();
  if (!rep.records.empty()) {
    rep.summary.profanity_fraction = static_cast<double>(prof) / static_cast<double>(rep.records.size());
    rep.summary.pronoun_fraction = static_cast<double>(pron) / static_cast<double>(rep.records.size());
  }
  return rep;
}

namespace detail {

inline std::string tsv_safe(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace detail

/// Tab-separated: id, gold, pred, text, profanity_hits, pronoun_hits (hits space-joined).
inline void write_error_records(std::ostream& out, const ErrorReport& rep) {
  out << "id\tgold\tpred\ttext\tprofanity_hits\tpronoun_hits\n";
  for (const auto& r : rep.records) {
    out << detail::tsv_safe(r.id) << '\t' << to_index(r.gold) << '\t' << to_index(r.predicted) << '\t'
        << detail::tsv_safe(r.text) << '\t' << detail::join(r.profanity_hits, ' ') << '\t'
        << detail::join(r.pronoun_hits, ' ') << '\n';
  }
}

inline void write_error_summary(std::ostream& out, const ErrorReport& rep) {
  const auto& s = rep.summary;
  out << "misclassified documents: " << s.total_errors << "\n";
  out << "gold -> pred   errors  with_profanity  with_pronoun\n";
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      if (g == p) continue;
      out << "  " << g << " -> " << p << "      " << s.errors[g][p] << "  " << s.with_profanity[g][p] << "  "
          << s.with_pronoun[g][p] << "\n";
    }
  }
  out << "fraction with profanity: " << s.profanity_fraction << "\n";
  out << "fraction with pronoun: " << s.pronoun_fraction << "\n";
  out << "Note: " << kLabelLegend << "\n";
}

}  // namespace hatebench

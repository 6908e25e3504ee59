#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hatebench/error.hpp"
#include "hatebench/label.hpp"
#include "hatebench/rng.hpp"
#include "hatebench/unicode.hpp"

namespace hatebench {

struct Document {
  std::string id;
  std::string raw;
  std::string cleaned;
  std::vector<std::string> tokens;
  std::optional<Label> label;
};

struct Corpus {
  std::vector<Document> documents;
  std::string source;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
};

enum class CorpusFormat { Csv, Tsv };

namespace detail {

inline bool starts_with_ci(std::u32string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char32_t c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c += 32;
    if (c != static_cast<char32_t>(prefix[i])) return false;
  }
  return true;
}

inline bool is_kept_punct(char32_t c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'';
}

inline std::u32string clean_once(std::u32string_view in) {
  // (1) URLs: scheme or www. prefix up to the next whitespace
  std::u32string no_urls;
  no_urls.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (starts_with_ci(in, i, "http://") || starts_with_ci(in, i, "https://") ||
        starts_with_ci(in, i, "www.")) {
      while (i < in.size() && !unicode::is_space(in[i])) ++i;
      continue;
    }
    no_urls.push_back(in[i++]);
  }
  // (2) digits, (3) non-whitelisted characters, (4) lowercase
  std::u32string kept;
  kept.reserve(no_urls.size());
  for (char32_t c : no_urls) {
    if (c >= '0' && c <= '9') continue;
    if (unicode::is_space(c)) {
      kept.push_back(U' ');
    } else if (is_kept_punct(c) || unicode::is_combining_mark(c)) {
      kept.push_back(c);
    } else if (unicode::is_letter(c)) {
      unicode::append_lower(kept, c);
    }
  }
  // (5) collapse whitespace and trim
  std::u32string out;
  out.reserve(kept.size());
  for (char32_t c : kept) {
    if (c == U' ' && (out.empty() || out.back() == U' ')) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == U' ') out.pop_back();
  return out;
}

}  // namespace detail

/// Removes URLs, digits and symbols (emoji, '#', ...), lowercases, and normalizes
/// whitespace. Removals can splice a new "www." prefix together, so the rules are
/// reapplied until the text stops changing; the result is a fixpoint.
inline std::string clean_text(std::string_view raw) {
  std::u32string cur = detail::clean_once(unicode::decode(raw));
  for (;;) {
    std::u32string next = detail::clean_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return unicode::encode(cur);
}

/// Whitespace split, then leading/trailing `.,!?'` peeled off as one-character tokens.
inline std::vector<std::string> tokenize(std::string_view cleaned) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    std::string_view word = cleaned.substr(i, j - i);
    i = j;
    if (word.empty()) continue;
    std::size_t lo = 0;
    std::size_t hi = word.size();
    while (lo < hi && detail::is_kept_punct(static_cast<unsigned char>(word[lo]))) ++lo;
    while (hi > lo && detail::is_kept_punct(static_cast<unsigned char>(word[hi - 1]))) --hi;
    for (std::size_t p = 0; p < lo; ++p) tokens.emplace_back(1, word[p]);
    if (hi > lo) tokens.emplace_back(word.substr(lo, hi - lo));
    for (std::size_t p = hi; p < word.size(); ++p) tokens.emplace_back(1, word[p]);
  }
  return tokens;
}

inline void prepare(Document& doc) {
  doc.cleaned = clean_text(doc.raw);
  doc.tokens = tokenize(doc.cleaned);
}

inline void prepare(Corpus& corpus) {
  for (auto& d : corpus.documents) prepare(d);
}

namespace detail {

struct DelimitedRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// Splits delimited text into records. Quoted fields may contain the
/// delimiter, newlines and doubled quotes.
inline std::vector<DelimitedRecord> parse_delimited(std::string_view text, char delim) {
  std::vector<DelimitedRecord> records;
  std::size_t line = 1;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < text.size()) {
    DelimitedRecord rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool done = false;
    while (!done) {
      if (i >= text.size()) {
        if (in_quotes) throw Error(ErrorCode::MalformedRow, "unterminated quote starting at line " + std::to_string(rec.line));
        rec.fields.push_back(std::move(field));
        break;
      }
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty() && !field_was_quoted) {
        in_quotes = true;
        field_was_quoted = true;
        ++i;
      } else if (c == delim) {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        ++i;
      } else if (c == '\r' || c == '\n') {
        rec.fields.push_back(std::move(field));
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++i;
        ++line;
        done = true;
      } else if (field_was_quoted) {
        throw Error(ErrorCode::MalformedRow, "text after closing quote at line " + std::to_string(line));
      } else {
        field.push_back(c);
        ++i;
      }
    }
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) records.push_back(std::move(rec));
  }
  return records;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline Corpus parse_corpus(std::string_view text, CorpusFormat format, std::string source = {}) {
  const char delim = format == CorpusFormat::Csv ? ',' : '\t';
  const auto records = detail::parse_delimited(text, delim);
  Corpus corpus;
  corpus.source = std::move(source);
  if (records.empty()) throw Error(ErrorCode::MalformedRow, "missing header row (line 1)");

  int id_col = -1, text_col = -1, label_col = -1;
  const auto& header = records.front().fields;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") id_col = static_cast<int>(c);
    else if (header[c] == "text") text_col = static_cast<int>(c);
    else if (header[c] == "label") label_col = static_cast<int>(c);
  }
  if (id_col < 0 || text_col < 0) {
    throw Error(ErrorCode::MalformedRow, "header must name id and text columns (line " +
                                             std::to_string(records.front().line) + ")");
  }

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(rec.line) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(rec.fields.size()));
    }
    Document doc;
    doc.id = rec.fields[static_cast<std::size_t>(id_col)];
    doc.raw = rec.fields[static_cast<std::size_t>(text_col)];
    if (label_col >= 0) {
      const std::string& v = rec.fields[static_cast<std::size_t>(label_col)];
      if (!v.empty()) {
        auto l = parse_label(v);
        if (!l) throw Error(ErrorCode::UnknownLabel, "'" + v + "' at line " + std::to_string(rec.line));
        doc.label = *l;
      }
    }
    if (!seen.insert(doc.id).second) {
      throw Error(ErrorCode::DuplicateId, "'" + doc.id + "' at line " + std::to_string(rec.line));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format) {
  return parse_corpus(detail::read_file(path), format, path);
}

/// Picks TSV for `.tsv`/`.tab` files, CSV otherwise.
inline CorpusFormat guess_format(std::string_view path) {
  auto ends = [&](std::string_view suf) {
    return path.size() >= suf.size() && path.substr(path.size() - suf.size()) == suf;
  };
  return (ends(".tsv") || ends(".tab")) ? CorpusFormat::Tsv : CorpusFormat::Csv;
}

/// FNV-1a 64 over the bytes; identifies corpus content in model files.
inline std::uint64_t fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fingerprint(const Corpus& corpus) {
  std::string buf;
  for (const auto& d : corpus.documents) {
    buf += d.id;
    buf.push_back('\x1f');
    buf += d.raw;
    buf.push_back('\x1f');
    buf += d.label ? static_cast<char>('0' + to_index(*d.label)) : '-';
    buf.push_back('\x1e');
  }
  return fingerprint(buf);
}

// ---------------------------------------------------------------------------
// Statistics

struct StatsRow {
  std::size_t count = 0;
  std::size_t token_total = 0;
  double avg_len = 0.0;
};

/// Per-label document count, summed token count (reported as vocabulary size in
/// the original dataset description), and mean length.
struct CorpusStats {
  std::array<StatsRow, kNumClasses> per_label{};
  StatsRow overall;
};

inline CorpusStats compute_stats(const Corpus& corpus) {
  CorpusStats s;
  for (const auto& d : corpus.documents) {
    if (!d.label) throw Error(ErrorCode::UnlabeledDocument, d.id);
    auto& row = s.per_label[static_cast<std::size_t>(to_index(*d.label))];
    row.count += 1;
    row.token_total += d.tokens.size();
  }
  for (auto& row : s.per_label) {
    row.avg_len = row.count == 0 ? 0.0 : static_cast<double>(row.token_total) / static_cast<double>(row.count);
    s.overall.count += row.count;
    s.overall.token_total += row.token_total;
  }
  s.overall.avg_len = s.overall.count == 0
                          ? 0.0
                          : static_cast<double>(s.overall.token_total) / static_cast<double>(s.overall.count);
  return s;
}

// ---------------------------------------------------------------------------
// Stratified folds

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;    // fold index per document, corpus order
  std::vector<std::string> notes;  // e.g. classes with fewer than k members

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] != fold) out.push_back(i);
    }
    return out;
  }
};

/// Per class: shuffle with a class-specific stream of `seed`, then deal
/// round-robin. The dealing position carries over from one class to the next,
/// which keeps total fold sizes within one of each other as well.
inline FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::BadK, "k=" + std::to_string(k) + " (need k >= 2)");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), -1);
  std::size_t next_fold = 0;
  for (Label c : kAllLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (!members.empty() && members.size() < static_cast<std::size_t>(k)) {
      plan.notes.push_back(std::string("class ") + label_name(c) + " has " + std::to_string(members.size()) +
                           " documents, fewer than k=" + std::to_string(k));
    }
    Rng rng(derive_seed(seed, 0x666f6c64 /* "fold" */, static_cast<std::uint64_t>(to_index(c))));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      plan.assignments[idx] = static_cast<int>(next_fold);
      next_fold = (next_fold + 1) % static_cast<std::size_t>(k);
    }
  }
  return plan;
}

inline std::vector<Label> gold_labels(const Corpus& corpus) {
  std::vector<Label> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.documents) {
    if (!d.label) throw Error(ErrorCode::UnlabeledDocument, d.id);
    out.push_back(*d.label);
  }
  return out;
}

inline FoldPlan stratified_kfold(const Corpus& corpus, int k, std::uint64_t seed) {
  const auto labels = gold_labels(corpus);
  return stratified_kfold(std::span<const Label>(labels), k, seed);
}

}  // namespace hatebench

#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/rng.hpp"

// Synthetic comment corpora with labels fixed by keyword rules:
//   HATE      profanity word and a personal pronoun
//   OFFENSIVE profanity word, no pronoun
//   CLEAN     no profanity (pronouns allowed)

namespace hatebench::synthetic {

inline const std::vector<std::string>& neutral_words() {
  static const std::vector<std::string> words{
      "cho",  "xíu",   "nhạc", "đi",   "a",     "bạn",  "hay",   "quá",  "mình", "thích", "bài",  "này",
      "hôm",  "nay",   "trời", "đẹp",  "cảm",   "ơn",   "ad",    "video", "xem", "lại",   "nhé",  "rất",
      "vui",  "được",  "không", "có",  "người", "nói",  "gì",    "ai",   "biết", "đâu",   "làm",  "việc",
      "nhà",  "ăn",    "cơm",  "chưa", "mới",   "về",   "đến",   "thấy", "hát",  "giỏi",  "xinh", "quán",
      "phim", "trận",  "bóng", "đá",   "hôm",   "qua",  "sáng",  "tối",  "mai",  "học",   "thi",  "điểm",
      "cao",  "thấp",  "giá",  "rẻ",   "đắt",   "mua",  "bán",   "hàng", "ship", "nhanh", "chậm", "tốt"};
  return words;
}

inline const std::vector<std::string>& profanity_words() {
  static const std::vector<std::string> words{"vl", "vkl", "dcm", "vcl", "đm"};
  return words;
}

inline const std::vector<std::string>& pronoun_words() {
  static const std::vector<std::string> words{"mày", "thằng", "con"};
  return words;
}

struct KeywordCorpusConfig {
  std::size_t size = 2000;
  std::array<double, 3> proportions{0.90, 0.06, 0.04};
  double label_noise = 0.02;
  std::size_t min_words = 2;
  std::size_t max_words = 8;
  double clean_pronoun_rate = 0.0;
  std::size_t profanity_variants = 3;  // leading entries of profanity_words()
  std::size_t profanity_repeats = 2;
  std::size_t phrase_pool = 20;  // filler text is drawn from this many recurring phrases
  std::size_t phrase_min = 2;
  std::size_t phrase_max = 5;
  std::uint64_t seed = 20190101;
};

namespace detail {

inline const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

inline std::string decorate(std::vector<std::string> words, Rng& rng) {
  // raw-text noise the cleaner has to undo: capitals, punctuation, digits, urls, emoji, hashtags
  if (!words.empty() && rng.uniform() < 0.3) {
    auto& w = words.front();
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    if (rng.uniform() < 0.04) out += "#";
    out += words[i];
    const double r = rng.uniform();
    if (r < 0.04) out += ",";
    else if (r < 0.06) out += " 24h";
  }
  const double tail = rng.uniform();
  if (tail < 0.2) out += ".";
  else if (tail < 0.3) out += "!!";
  else if (tail < 0.35) out += " https://fb.com/p/123";
  else if (tail < 0.42) out += " \xF0\x9F\x98\x82";  // emoji
  return out;
}

using Phrase = std::vector<std::string>;

inline std::vector<Phrase> phrase_pool(const KeywordCorpusConfig& cfg, Rng& rng) {
  std::vector<Phrase> pool(cfg.phrase_pool);
  for (auto& p : pool) {
    const std::size_t len = cfg.phrase_min + static_cast<std::size_t>(rng.below(cfg.phrase_max - cfg.phrase_min + 1));
    for (std::size_t i = 0; i < len; ++i) p.push_back(pick(neutral_words(), rng));
  }
  return pool;
}

// Whole phrases until at least n words.
inline std::vector<Phrase> neutral_sequence(std::size_t n, const std::vector<Phrase>& pool, Rng& rng) {
  std::vector<Phrase> out;
  std::size_t words = 0;
  while (words < n) {
    out.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))]);
    words += out.back().size();
  }
  return out;
}

// Keywords go between phrases, never inside one.
inline void insert_at_random(std::vector<Phrase>& phrases, const std::string& w, Rng& rng) {
  const auto pos = static_cast<std::ptrdiff_t>(rng.below(phrases.size() + 1));
  phrases.insert(phrases.begin() + pos, Phrase{w});
}

inline std::vector<std::string> flatten(const std::vector<Phrase>& phrases) {
  std::vector<std::string> out;
  for (const auto& p : phrases) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace detail

/// Exact class counts from the proportions, then `label_noise` of the labels
/// replaced by a different class. Document order is shuffled.
inline Corpus keyword_corpus(const KeywordCorpusConfig& cfg) {
  if (cfg.min_words < 1 || cfg.min_words > cfg.max_words || cfg.phrase_min < 1 || cfg.phrase_min > cfg.phrase_max ||
      cfg.phrase_pool < 1 || cfg.profanity_variants < 1 || cfg.profanity_variants > profanity_words().size()) {
    throw Error(ErrorCode::BadConfig, "keyword corpus config");
  }
  Rng rng(derive_seed(cfg.seed, 0x73796e /* "syn" */));
  std::array<std::size_t, 3> counts{};
  counts[1] = static_cast<std::size_t>(static_cast<double>(cfg.size) * cfg.proportions[1] + 0.5);
  counts[2] = static_cast<std::size_t>(static_cast<double>(cfg.size) * cfg.proportions[2] + 0.5);
  counts[0] = cfg.size - counts[1] - counts[2];
  std::vector<int> classes;
  for (int c = 0; c < 3; ++c) classes.insert(classes.end(), counts[static_cast<std::size_t>(c)], c);
  rng.shuffle(std::span<int>(classes));

  const auto pool = detail::phrase_pool(cfg, rng);
  Corpus corpus;
  corpus.source = "synthetic:keyword";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::size_t span = cfg.max_words - cfg.min_words + 1;
    const std::size_t n = cfg.min_words + static_cast<std::size_t>(rng.below(span));
    auto words = detail::neutral_sequence(n, pool, rng);
    const int c = classes[i];
    if (c == 0) {
      if (rng.uniform() < cfg.clean_pronoun_rate) detail::insert_at_random(words, detail::pick(pronoun_words(), rng), rng);
    } else {
      const std::vector<std::string> variants(profanity_words().begin(),
                                              profanity_words().begin() + static_cast<std::ptrdiff_t>(cfg.profanity_variants));
      for (std::size_t r = 0; r < cfg.profanity_repeats; ++r) detail::insert_at_random(words, detail::pick(variants, rng), rng);
      if (c == 2) detail::insert_at_random(words, detail::pick(pronoun_words(), rng), rng);
    }
    int label = c;
    if (rng.uniform() < cfg.label_noise) label = (c + 1 + static_cast<int>(rng.below(2))) % 3;
    Document d;
    d.id = "s" + std::to_string(i + 1);
    d.raw = detail::decorate(detail::flatten(words), rng);
    d.label = label_from_index(label);
    corpus.documents.push_back(std::move(d));
  }
  return corpus;
}

/// 64 documents: 32 CLEAN, 16 OFFENSIVE containing "vl", 16 HATE containing
/// "mày"; no other document contains either keyword.
inline Corpus separable_fixture(std::uint64_t seed = 7) {
  Rng rng(derive_seed(seed, 0x736570 /* "sep" */));
  Corpus corpus;
  corpus.source = "synthetic:separable";
  for (std::size_t i = 0; i < 64; ++i) {
    const int c = i < 32 ? 0 : (i < 48 ? 1 : 2);
    std::vector<std::string> words;
    const std::size_t n = 4 + static_cast<std::size_t>(rng.below(8));
    for (std::size_t w = 0; w < n; ++w) words.push_back(detail::pick(neutral_words(), rng));
    const auto pos = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
    if (c == 1) words.insert(words.begin() + pos, "vl");
    if (c == 2) words.insert(words.begin() + pos, "mày");
    std::string text;
    for (std::size_t w = 0; w < words.size(); ++w) text += (w ? " " : "") + words[w];
    corpus.documents.push_back({"f" + std::to_string(i + 1), text, {}, {}, label_from_index(c)});
  }
  return corpus;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

inline void write_csv(std::ostream& out, const Corpus& corpus) {
  out << "id,text,label\n";
  for (const auto& d : corpus.documents) {
    out << csv_quote(d.id) << ',' << csv_quote(d.raw) << ',';
    if (d.label) out << to_index(*d.label);
    out << '\n';
  }
}

}  // namespace hatebench::synthetic

#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "hatebench/corpus.hpp"
#include "test_util.hpp"

using namespace hatebench;

TEST(Load, ParsesPlainRow) {
  auto c = parse_corpus("id,text,label\n1,\"Cho xíu nhạc đi a\",0\n", CorpusFormat::Csv);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.documents[0].id, "1");
  EXPECT_EQ(c.documents[0].raw, "Cho xíu nhạc đi a");
  EXPECT_EQ(c.documents[0].label, Label::Clean);
}

TEST(Load, HeaderOnlyIsEmpty) {
  EXPECT_EQ(parse_corpus("id,text,label\n", CorpusFormat::Csv).size(), 0u);
}

TEST(Load, LabelNamesCaseInsensitive) {
  auto c = parse_corpus("id,text,label\n1,x,HATE\n2,y,offensive\n3,z,Clean\n", CorpusFormat::Csv);
  EXPECT_EQ(c.documents[0].label, Label::Hate);
  EXPECT_EQ(c.documents[1].label, Label::Offensive);
  EXPECT_EQ(c.documents[2].label, Label::Clean);
}

TEST(Load, QuotesAndEmbeddedDelimiters) {
  auto c = parse_corpus("id,text,label\r\n7,\"a, \"\"b\"\"\nc\",2\r\n", CorpusFormat::Csv);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.documents[0].raw, "a, \"b\"\nc");
}

TEST(Load, LabelColumnOptional) {
  auto c = parse_corpus("id\ttext\nq\thello\n", CorpusFormat::Tsv);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_FALSE(c.documents[0].label.has_value());
}

TEST(Load, Errors) {
  try {
    parse_corpus("id,text,label\n1,x,3\n", CorpusFormat::Csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLabel);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(
      {
        try {
          parse_corpus("id,text,label\n1,x\n", CorpusFormat::Csv);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
          throw;
        }
      },
      Error);
  try {
    parse_corpus("id,text,label\n1,x,0\n1,y,0\n", CorpusFormat::Csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
  try {
    load_corpus("/nonexistent/corpus.csv", CorpusFormat::Csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFile);
  }
}

TEST(Load, OrderStableAcrossReloads) {
  const auto dir = hbtest::temp_dir("reload");
  const auto path = dir + "/c.csv";
  std::ofstream(path) << "id,text,label\nb,x,0\na,y,1\nc,z,2\n";
  auto c1 = load_corpus(path, CorpusFormat::Csv);
  auto c2 = load_corpus(path, CorpusFormat::Csv);
  ASSERT_EQ(c1.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(c1.documents[i].id, c2.documents[i].id);
  EXPECT_EQ(c1.documents[0].id, "b");
  EXPECT_EQ(fingerprint(c1), fingerprint(c2));
}

TEST(Clean, Examples) {
  EXPECT_EQ(clean_text("Xem tại https://example.com NGAY 24h #hot"), "xem tại ngay h hot");
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("Tao ghét vl."), "tao ghét vl.");
}

TEST(Clean, RemovesEmojiAndKeepsDiacritics) {
  EXPECT_EQ(clean_text("ĐẸP QUÁ \xF0\x9F\x98\x82!!"), "đẹp quá !!");
  EXPECT_EQ(clean_text("  a \t\n b  "), "a b");
  EXPECT_EQ(clean_text("www.abc.vn xin"), "xin");
  EXPECT_EQ(clean_text("HTTP://A1.COM ok"), "ok");
}

TEST(Clean, NoRemovalClassCharactersRemain) {
  Rng rng(3);
  const std::vector<std::string> pieces{"A", "1", "#", "@", " ", "http://x.y", "www.", "Ư", "\xF0\x9F\x98\x82", ".", "'",
                                        "w", "\t", "é", "-", "$"};
  for (int t = 0; t < 500; ++t) {
    std::string s;
    for (int i = 0; i < 12; ++i) s += pieces[static_cast<std::size_t>(rng.below(pieces.size()))];
    const auto out = clean_text(s);
    for (char32_t c : unicode::decode(out)) {
      const bool ok = unicode::is_letter(c) || unicode::is_combining_mark(c) || c == U' ' || c == U'.' ||
                      c == U',' || c == U'!' || c == U'?' || c == U'\'';
      EXPECT_TRUE(ok) << "input: " << s;
      EXPECT_FALSE(c >= U'0' && c <= U'9');
    }
    EXPECT_EQ(out.find("http://"), std::string::npos);
    EXPECT_EQ(out.find("www."), std::string::npos) << s;
  }
}

TEST(Clean, Idempotent) {
  Rng rng(11);
  const std::vector<std::string> pieces{"A", "1", "#", "ww", "w", ".", " ", "http", "://", "s", "Đ", "x",
                                        "\xF0\x9F\x98\x82", "!", "?", ",", "'", "ƯỚ", "3w."};
  for (int t = 0; t < 2000; ++t) {
    std::string s;
    const auto n = rng.below(15);
    for (std::uint64_t i = 0; i < n; ++i) s += pieces[static_cast<std::size_t>(rng.below(pieces.size()))];
    const auto once = clean_text(s);
    EXPECT_EQ(clean_text(once), once) << "input: " << s;
  }
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("tao ghét vl."), (std::vector<std::string>{"tao", "ghét", "vl", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("a b  c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(tokenize("'hi!! ok?"), (std::vector<std::string>{"'", "hi", "!", "!", "ok", "?"}));
}

TEST(Stats, SingleDocument) {
  Corpus c;
  c.documents.push_back(hbtest::doc("1", "a b c d e", Label::Offensive));
  const auto s = compute_stats(c);
  EXPECT_EQ(s.per_label[1].count, 1u);
  EXPECT_EQ(s.per_label[1].token_total, 5u);
  EXPECT_DOUBLE_EQ(s.per_label[1].avg_len, 5.0);
  EXPECT_EQ(s.per_label[0].count, 0u);
  EXPECT_DOUBLE_EQ(s.per_label[0].avg_len, 0.0);
}

TEST(Stats, LargeCountsRow) {
  Corpus c;
  const std::array<std::size_t, 3> counts{18614, 1022, 709};
  for (int l = 0; l < 3; ++l) {
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(l)]; ++i) {
      Document d;
      d.id = std::to_string(l) + "_" + std::to_string(i);
      d.tokens = {"x"};
      d.label = label_from_index(l);
      c.documents.push_back(std::move(d));
    }
  }
  const auto s = compute_stats(c);
  EXPECT_EQ(s.per_label[0].count, 18614u);
  EXPECT_EQ(s.per_label[1].count, 1022u);
  EXPECT_EQ(s.per_label[2].count, 709u);
  EXPECT_EQ(s.overall.count, 20345u);
}

TEST(Stats, SixDocFixtureMatchesTally) {
  Corpus c;
  c.documents = {hbtest::doc("1", "a b", Label::Clean),        hbtest::doc("2", "a b c d", Label::Clean),
                 hbtest::doc("3", "x.", Label::Offensive),     hbtest::doc("4", "một hai ba", Label::Offensive),
                 hbtest::doc("5", "vl vl vl vl", Label::Hate), hbtest::doc("6", "", Label::Clean)};
  const auto s = compute_stats(c);
  // tally: clean 2+4+0 over 3, offensive 2+3 over 2, hate 4 over 1
  EXPECT_EQ(s.per_label[0].token_total, 6u);
  EXPECT_DOUBLE_EQ(s.per_label[0].avg_len, 2.0);
  EXPECT_EQ(s.per_label[1].token_total, 5u);
  EXPECT_DOUBLE_EQ(s.per_label[1].avg_len, 2.5);
  EXPECT_EQ(s.per_label[2].token_total, 4u);
  EXPECT_EQ(s.overall.count, 6u);
  EXPECT_EQ(s.overall.token_total, 15u);
  EXPECT_DOUBLE_EQ(s.overall.avg_len, 2.5);
}

TEST(Stats, UnlabeledDocumentThrows) {
  Corpus c;
  c.documents.push_back(hbtest::doc("u", "x"));
  try {
    compute_stats(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnlabeledDocument);
  }
}

namespace {

std::vector<Label> make_labels(std::size_t n0, std::size_t n1, std::size_t n2) {
  std::vector<Label> y;
  y.insert(y.end(), n0, Label::Clean);
  y.insert(y.end(), n1, Label::Offensive);
  y.insert(y.end(), n2, Label::Hate);
  return y;
}

std::map<std::pair<int, int>, std::size_t> fold_class_counts(const FoldPlan& p, std::span<const Label> y) {
  std::map<std::pair<int, int>, std::size_t> m;
  for (std::size_t i = 0; i < y.size(); ++i) m[{p.assignments[i], to_index(y[i])}] += 1;
  return m;
}

}  // namespace

TEST(Folds, DivisibleCounts) {
  const auto y = make_labels(10, 5, 0);
  const auto p = stratified_kfold(std::span<const Label>(y), 5, 1);
  auto m = fold_class_counts(p, y);
  for (int f = 0; f < 5; ++f) {
    EXPECT_EQ((m[{f, 0}]), 2u);
    EXPECT_EQ((m[{f, 1}]), 1u);
  }
}

TEST(Folds, LargeCorpusClassZeroSizes) {
  const auto y = make_labels(18614, 1022, 709);
  const auto p = stratified_kfold(std::span<const Label>(y), 5, 42);
  auto m = fold_class_counts(p, y);
  for (int f = 0; f < 5; ++f) {
    EXPECT_TRUE((m[{f, 0}]) == 3722u || (m[{f, 0}]) == 3723u);
  }
}

TEST(Folds, Deterministic) {
  const auto y = make_labels(30, 7, 4);
  EXPECT_EQ(stratified_kfold(std::span<const Label>(y), 4, 9).assignments,
            stratified_kfold(std::span<const Label>(y), 4, 9).assignments);
  EXPECT_NE(stratified_kfold(std::span<const Label>(y), 4, 9).assignments,
            stratified_kfold(std::span<const Label>(y), 4, 10).assignments);
}

TEST(Folds, BadKAndSmallClassNote) {
  const auto y = make_labels(5, 1, 1);
  try {
    stratified_kfold(std::span<const Label>(y), 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadK);
  }
  const auto p = stratified_kfold(std::span<const Label>(y), 3, 0);
  EXPECT_EQ(p.notes.size(), 2u);
}

TEST(Folds, PropertyInvariants) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto y = make_labels(rng.below(60), rng.below(15), rng.below(10));
    const int k = 2 + static_cast<int>(rng.below(9));
    const auto p = stratified_kfold(std::span<const Label>(y), k, rng.next_u64());
    std::size_t total = 0;
    std::vector<int> seen(y.size(), 0);
    for (int f = 0; f < k; ++f) {
      const auto test = p.test_indices(f);
      total += test.size();
      for (auto i : test) seen[i] += 1;
      EXPECT_EQ(test.size() + p.train_indices(f).size(), y.size());
    }
    EXPECT_EQ(total, y.size());
    for (int s : seen) EXPECT_EQ(s, 1);
    auto m = fold_class_counts(p, y);
    for (int c = 0; c < 3; ++c) {
      std::size_t lo = SIZE_MAX, hi = 0;
      for (int f = 0; f < k; ++f) {
        lo = std::min(lo, m[{f, c}]);
        hi = std::max(hi, m[{f, c}]);
      }
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(Unicode, RoundTripAndInvalidBytes) {
  const std::string s = "Việt Nam \xF0\x9F\x98\x82";
  EXPECT_EQ(unicode::encode(unicode::decode(s)), s);
  EXPECT_EQ(unicode::decode("\xFF")[0], U'�');
  EXPECT_EQ(unicode::length("đi"), 2u);
}

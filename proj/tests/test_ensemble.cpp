#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hatebench/ensemble.hpp"
#include "test_util.hpp"

using namespace hatebench;

namespace {

Lexicon lexicon(std::set<std::string> profanity, std::set<std::string> pronouns) {
  return Lexicon{std::move(profanity), std::move(pronouns), "test"};
}

Corpus labeled(const std::vector<std::pair<std::string, int>>& rows) {
  Corpus c;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    c.documents.push_back(hbtest::doc("d" + std::to_string(i + 1), rows[i].first, label_from_index(rows[i].second)));
  }
  return c;
}

ClassScores random_scores(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

}  // namespace

TEST(SoftVote, Examples) {
  const std::vector<ClassScores> sets{{0.9, 0.05, 0.05}, {0.2, 0.7, 0.1}};
  const std::vector<double> equal{1.0, 1.0};
  const auto combined = combine_scores(sets, equal);
  EXPECT_NEAR(combined[0], 0.55, 1e-15);
  EXPECT_NEAR(combined[1], 0.375, 1e-15);
  EXPECT_NEAR(combined[2], 0.075, 1e-15);
  EXPECT_EQ(soft_vote(sets, equal), Label::Clean);

  const std::vector<ClassScores> same{{0.1, 0.3, 0.6}, {0.1, 0.3, 0.6}};
  EXPECT_EQ(soft_vote(same, equal), Label::Hate);

  EXPECT_EQ(soft_vote(sets, std::vector<double>{0.0, 1.0}), Label::Offensive);
  EXPECT_EQ(soft_vote(sets, std::vector<double>{1.0, 0.0}), Label::Clean);
}

TEST(SoftVote, TiesGoToLowestIndex) {
  const std::vector<ClassScores> sets{{0.2, 0.4, 0.4}, {0.2, 0.4, 0.4}};
  EXPECT_EQ(soft_vote(sets, std::vector<double>{1.0, 1.0}), Label::Offensive);
}

TEST(SoftVote, Errors) {
  const std::vector<ClassScores> one{{0.2, 0.4, 0.4}};
  const std::vector<ClassScores> two{{0.2, 0.4, 0.4}, {0.1, 0.1, 0.8}};
  const auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code_of([&] { soft_vote(one, std::vector<double>{1.0}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { soft_vote(two, std::vector<double>{1.0}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { soft_vote(two, std::vector<double>{0.0, 0.0}); }), ErrorCode::AllZeroWeights);
  EXPECT_EQ(code_of([&] { soft_vote(two, std::vector<double>{-1.0, 2.0}); }), ErrorCode::BadConfig);
}

TEST(SoftVote, DominantWeightDecides) {
  Rng rng(41);
  for (int s = 0; s < 1000; ++s) {
    const std::size_t n = 2 + rng.below(3);
    std::vector<ClassScores> sets;
    for (std::size_t i = 0; i < n; ++i) sets.push_back(random_scores(rng));
    const std::size_t lead = rng.below(n);
    std::vector<double> w(n, 1.0);
    w[lead] = 1e6;
    const auto& top = sets[lead];
    const auto sorted = [&] {
      auto v = top;
      std::sort(v.begin(), v.end());
      return v;
    }();
    if (sorted[2] - sorted[1] < 1e-4) continue;  // near-ties can flip under the small weights
    EXPECT_EQ(soft_vote(sets, w), predict_label(top));
  }
}

TEST(SoftVote, ScaleInvariantInWeights) {
  Rng rng(42);
  for (int s = 0; s < 200; ++s) {
    std::vector<ClassScores> sets{random_scores(rng), random_scores(rng), random_scores(rng)};
    std::vector<double> w{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    auto w2 = w;
    for (auto& v : w2) v *= 8.0;
    const auto a = combine_scores(sets, w);
    const auto b = combine_scores(sets, w2);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-15);
  }
}

TEST(Lexicon, FlagExamples) {
  const auto d1 = hbtest::doc("1", "tao ghét vl .");
  const auto hits1 = flag_lexicon(d1, lexicon({"vl"}, {}));
  EXPECT_EQ(hits1.profanity, (std::vector<std::string>{"vl"}));
  EXPECT_TRUE(hits1.pronouns.empty());

  EXPECT_TRUE(flag_lexicon(d1, lexicon({}, {})).profanity.empty());

  const auto d2 = hbtest::doc("2", "mày khôn lắm thằng ngu ạ");
  const auto hits2 = flag_lexicon(d2, lexicon({}, {"mày", "thằng"}));
  EXPECT_EQ(hits2.pronouns, (std::vector<std::string>{"mày", "thằng"}));

  const auto d3 = hbtest::doc("3", "VL vl vlx");
  EXPECT_EQ(flag_lexicon(d3, default_lexicon()).profanity, (std::vector<std::string>{"vl", "vl"}));
}

TEST(Lexicon, HitsAreSubMultisetOfTokens) {
  Rng rng(43);
  const auto lex = lexicon({"a", "ab", "xin"}, {"b", "cà"});
  for (int s = 0; s < 500; ++s) {
    const auto d = hbtest::doc("x", hbtest::random_text(rng, 12));
    const auto hits = flag_lexicon(d, lex);
    for (const auto* list : {&hits.profanity, &hits.pronouns}) {
      for (const auto& h : *list) {
        EXPECT_LE(std::count(list->begin(), list->end(), h), std::count(d.tokens.begin(), d.tokens.end(), h));
      }
    }
  }
}

TEST(Lexicon, LoadFile) {
  const auto dir = hbtest::temp_dir("lexicon");
  const auto path = dir + "/lex.tsv";
  std::ofstream(path) << "# comment\nprofanity\tVL\n\npronoun\tmày\r\nprofanity\tdcm\n";
  const auto lex = load_lexicon(path);
  EXPECT_EQ(lex.profanity, (std::set<std::string>{"vl", "dcm"}));
  EXPECT_EQ(lex.pronouns, (std::set<std::string>{"mày"}));

  std::ofstream(dir + "/bad1.tsv") << "profanity vl\n";
  std::ofstream(dir + "/bad2.tsv") << "slur\tvl\n";
  std::ofstream(dir + "/bad3.tsv") << "pronoun\t\n";
  for (const char* name : {"/bad1.tsv", "/bad2.tsv", "/bad3.tsv"}) {
    try {
      load_lexicon(dir + name);
      ADD_FAILURE() << name;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedLine) << name;
    }
  }
  EXPECT_THROW(load_lexicon(dir + "/missing.tsv"), Error);
}

TEST(ErrorReport, PerfectPredictionsAreEmpty) {
  const auto c = labeled({{"tốt", 0}, {"vl", 1}, {"mày vl", 2}});
  const auto rep = error_report(c, gold_labels(c), default_lexicon());
  EXPECT_TRUE(rep.records.empty());
  EXPECT_EQ(rep.summary.total_errors, 0u);
  EXPECT_EQ(rep.summary.profanity_fraction, 0.0);
  EXPECT_EQ(rep.summary.pronoun_fraction, 0.0);
  for (const auto& row : rep.summary.errors) {
    for (auto v : row) EXPECT_EQ(v, 0u);
  }
}

TEST(ErrorReport, SixKnownErrors) {
  const auto c = labeled({{"video hay vl", 1},
                          {"nhìn mặt thằng này là ghét", 2},
                          {"dcm trận này đá dở", 1},
                          {"mày nói gì vậy con", 2},
                          {"hôm nay trời đẹp", 0},
                          {"đẹp vkl luôn", 1},
                          {"ăn cơm chưa", 0},
                          {"con mày ngu vl", 2}});
  const std::vector<Label> pred{Label::Clean, Label::Clean, Label::Clean, Label::Offensive,
                                Label::Clean, Label::Clean, Label::Clean, Label::Offensive};
  const auto rep = error_report(c, pred, default_lexicon());
  ASSERT_EQ(rep.records.size(), 6u);
  const std::vector<std::pair<int, int>> expected{{1, 0}, {2, 0}, {1, 0}, {2, 1}, {1, 0}, {2, 1}};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(to_index(rep.records[i].gold), expected[i].first) << i;
    EXPECT_EQ(to_index(rep.records[i].predicted), expected[i].second) << i;
  }
  EXPECT_EQ(rep.records[0].id, "d1");
  EXPECT_EQ(rep.records[3].pronoun_hits, (std::vector<std::string>{"mày", "con"}));
  EXPECT_EQ(rep.summary.errors[1][0], 3u);
  EXPECT_EQ(rep.summary.errors[2][1], 2u);
  EXPECT_EQ(rep.summary.errors[2][0], 1u);
  EXPECT_DOUBLE_EQ(rep.summary.profanity_fraction, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(rep.summary.pronoun_fraction, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(rep.summary.pronoun_fraction_for_gold(Label::Hate), 1.0);
  EXPECT_DOUBLE_EQ(rep.summary.pronoun_fraction_for_gold(Label::Offensive), 0.0);
  EXPECT_DOUBLE_EQ(rep.summary.profanity_fraction_for_gold(Label::Offensive), 1.0);

  std::ostringstream tsv, summary;
  write_error_records(tsv, rep);
  write_error_summary(summary, rep);
  EXPECT_EQ(tsv.str().substr(0, tsv.str().find('\n')), "id\tgold\tpred\ttext\tprofanity_hits\tpronoun_hits");
  EXPECT_NE(tsv.str().find("d8\t2\t1\tcon mày ngu vl\tvl\tcon mày\n"), std::string::npos) << tsv.str();
  EXPECT_NE(summary.str().find("misclassified documents: 6"), std::string::npos);
}

TEST(ErrorReport, RecordCountEqualsMismatches) {
  Rng rng(44);
  for (int s = 0; s < 100; ++s) {
    Corpus c;
    std::vector<Label> pred;
    std::size_t wrong = 0;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = label_from_index(static_cast<int>(rng.below(3)));
      const auto p = label_from_index(static_cast<int>(rng.below(3)));
      c.documents.push_back(hbtest::doc(std::to_string(i), hbtest::random_text(rng), g));
      pred.push_back(p);
      wrong += g != p;
    }
    const auto rep = error_report(c, pred, default_lexicon());
    EXPECT_EQ(rep.records.size(), wrong);
    std::size_t tally = 0;
    for (const auto& row : rep.summary.errors) {
      for (auto v : row) tally += v;
    }
    EXPECT_EQ(tally, wrong);
  }
}

TEST(ErrorReport, Errors) {
  const auto c = labeled({{"a", 0}, {"b", 1}});
  EXPECT_THROW(error_report(c, std::vector<Label>{Label::Clean}, default_lexicon()), Error);
  Corpus unlabeled;
  unlabeled.documents.push_back(hbtest::doc("u", "x"));
  EXPECT_THROW(error_report(unlabeled, std::vector<Label>{Label::Hate}, default_lexicon()), Error);
}

TEST(ErrorReport, TsvFieldsNeverContainTabs) {
  Corpus c;
  c.documents.push_back(hbtest::doc("id\twith tab", "x", Label::Hate));
  c.documents.back().raw = "raw\ttext\nline";
  const auto rep = error_report(c, std::vector<Label>{Label::Clean}, default_lexicon());
  std::ostringstream tsv;
  write_error_records(tsv, rep);
  std::istringstream lines(tsv.str());
  for (std::string line; std::getline(lines, line);) EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 5);
}

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "hatebench/model_file.hpp"
#include "hatebench/synthetic.hpp"
#include "test_util.hpp"

using namespace hatebench;

namespace {

std::vector<Document> training_docs() {
  synthetic::KeywordCorpusConfig cfg;
  cfg.size = 90;
  cfg.proportions = {0.5, 0.3, 0.2};
  cfg.seed = 17;
  auto c = synthetic::keyword_corpus(cfg);
  for (auto& d : c.documents) prepare(d);
  return c.documents;
}

ModelSpec small_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  for (NetConfig* n : {&s.textcnn, &s.bigru}) {
    n->embed_dim = 8;
    n->max_len = 12;
  }
  s.textcnn.filters_per_size = 4;
  s.bigru.hidden = 5;
  s.train.epochs = 2;
  s.logreg.epochs = 5;
  s.svm.epochs = 5;
  return s;
}

std::vector<Document> random_inputs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto& words = synthetic::neutral_words();
  std::vector<Document> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const auto len = rng.below(15);
    for (std::uint64_t w = 0; w < len; ++w) {
      const double r = rng.uniform();
      text += (w ? " " : "");
      if (r < 0.1) text += synthetic::profanity_words()[rng.below(3)];
      else if (r < 0.15) text += synthetic::pronoun_words()[rng.below(3)];
      else if (r < 0.2) text += "unseen";
      else text += words[rng.below(words.size())];
    }
    out.push_back(hbtest::doc(std::to_string(i), text));
  }
  return out;
}

bool bitwise_equal(const ClassScores& a, const ClassScores& b) { return std::memcmp(a.data(), b.data(), sizeof a) == 0; }

class RoundTrip : public ::testing::TestWithParam<ModelKind> {};

}  // namespace

TEST_P(RoundTrip, IdenticalScoresAfterSaveAndLoad) {
  const auto docs = training_docs();
  const auto model = train_model(small_spec(GetParam()), docs, 5);
  const auto path = hbtest::temp_dir(std::string("model_") + model_kind_name(GetParam())) + "/m.hbm";
  const ModelMetadata meta{12345, {{"model", model_kind_name(GetParam())}}};
  save_model(path, model, meta);
  ModelMetadata back_meta;
  const auto back = load_model(path, &back_meta);
  EXPECT_EQ(back_meta.corpus_fingerprint, 12345u);
  EXPECT_EQ(back_meta.config, meta.config);
  EXPECT_EQ(back.kind, model.kind);
  for (const auto& d : random_inputs(300, 9)) {
    EXPECT_TRUE(bitwise_equal(back.scores(d), model.scores(d))) << d.raw;
  }
  // the serialized form is stable
  EXPECT_EQ(serialize_model_file(to_model_file(back, meta)), serialize_model_file(to_model_file(model, meta)));
}

INSTANTIATE_TEST_SUITE_P(AllKinds, RoundTrip,
                         ::testing::Values(ModelKind::LogReg, ModelKind::Svm, ModelKind::TextCnn, ModelKind::BiGru,
                                           ModelKind::Ensemble, ModelKind::Majority),
                         [](const auto& info) { return std::string(model_kind_name(info.param)); });

TEST(ModelFile, RawArraysRoundTrip) {
  ModelFile mf;
  mf.header = {{"k", "v"}, {"n", 3}};
  detail::put_array(mf, "a", {2, 3}, {1, 2, 3, 4, 5, -0.0});
  detail::put_array(mf, "empty", {0}, {});
  const auto back = parse_model_file(serialize_model_file(mf));
  EXPECT_EQ(back.header, mf.header);
  EXPECT_EQ(detail::get_array(back, "a").shape, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_TRUE(std::signbit(detail::get_array(back, "a").values[5]));
  EXPECT_TRUE(detail::get_array(back, "empty").values.empty());
  EXPECT_THROW(detail::get_array(back, "missing"), Error);
}

TEST(ModelFile, TruncationIsDetected) {
  const auto model = train_model(small_spec(ModelKind::LogReg), training_docs(), 5);
  const auto bytes = serialize_model_file(to_model_file(model, {}));
  Rng rng(3);
  std::vector<std::size_t> cuts{0, 3, 4, 8, 16, bytes.size() / 2, bytes.size() - 9, bytes.size() - 1};
  for (int i = 0; i < 50; ++i) cuts.push_back(rng.below(bytes.size()));
  for (auto n : cuts) {
    try {
      parse_model_file(std::string_view(bytes).substr(0, n));
      ADD_FAILURE() << "accepted a prefix of " << n << " bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::VersionOrCorruption) << n;
    }
  }
}

TEST(ModelFile, CorruptionIsDetected) {
  const auto model = train_model(small_spec(ModelKind::Svm), training_docs(), 5);
  const auto bytes = serialize_model_file(to_model_file(model, {}));
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    auto bad = bytes;
    bad[rng.below(bad.size())] ^= static_cast<char>(1 + rng.below(255));
    EXPECT_THROW(from_model_file(parse_model_file(bad)), Error);
  }
  EXPECT_THROW(parse_model_file(bytes + "x"), Error);
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  try {
    parse_model_file(wrong_version);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionOrCorruption);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(ModelFile, MissingAndTruncatedFiles) {
  const auto dir = hbtest::temp_dir("model_files");
  EXPECT_THROW(load_model(dir + "/nope.hbm"), Error);
  const auto model = train_model(small_spec(ModelKind::Majority), training_docs(), 5);
  save_model(dir + "/m.hbm", model, {});
  std::filesystem::resize_file(dir + "/m.hbm", std::filesystem::file_size(dir + "/m.hbm") - 5);
  try {
    load_model(dir + "/m.hbm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionOrCorruption);
  }
}

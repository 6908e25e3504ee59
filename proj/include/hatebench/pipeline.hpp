#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/ensemble.hpp"
#include "hatebench/features.hpp"
#include "hatebench/linear.hpp"
#include "hatebench/neural.hpp"

namespace hatebench {

/// `Majority` predicts the most frequent training label; it is the baseline
/// used to sanity-check the cross-validation harness.
enum class ModelKind { LogReg, Svm, TextCnn, BiGru, Ensemble, Majority };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::LogReg: return "logreg";
    case ModelKind::Svm: return "svm";
    case ModelKind::TextCnn: return "textcnn";
    case ModelKind::BiGru: return "bigru";
    case ModelKind::Ensemble: return "ensemble";
    case ModelKind::Majority: return "majority";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::LogReg, ModelKind::Svm, ModelKind::TextCnn, ModelKind::BiGru, ModelKind::Ensemble,
                      ModelKind::Majority}) {
    if (s == model_kind_name(k)) return k;
  }
  return std::nullopt;
}

inline bool is_linear(ModelKind k) { return k == ModelKind::LogReg || k == ModelKind::Svm; }
inline bool is_neural(ModelKind k) { return k == ModelKind::TextCnn || k == ModelKind::BiGru; }

/// Everything needed to train one model kind on a document set.
struct ModelSpec {
  ModelKind kind = ModelKind::LogReg;
  FeatureBlocks features = FeatureBlocks::Union;
  StopwordSet stopwords;
  LinearConfig logreg = default_logreg_config();
  LinearConfig svm = default_svm_config();
  NetConfig textcnn = textcnn_config();
  NetConfig bigru = bigru_config();
  TrainConfig train;  // class weights are recomputed from each training set
  bool neural_class_weights = true;
  std::size_t vocab_cap = kDefaultVocabCap;
  std::optional<std::string> embeddings_path;
  std::vector<ModelKind> ensemble_members{ModelKind::Svm, ModelKind::TextCnn};
  std::vector<double> ensemble_weights{1.0, 1.0};
  int validation_folds = 10;  // neural early stopping holds out one of this many stratified parts

  ModelSpec with_kind(ModelKind k) const {
    ModelSpec s = *this;
    s.kind = k;
    return s;
  }
};

struct TrainedModel {
  ModelKind kind = ModelKind::Majority;

  FeaturePipeline features;  // linear
  LinearModel linear;

  NeuralVocab vocab;  // neural
  NeuralNet<double> net;
  TrainHistory history;
  double embedding_coverage = 0.0;

  Label majority = Label::Clean;

  std::vector<TrainedModel> members;  // ensemble
  std::vector<double> weights;

  /// Class probabilities for linear models (softmax), sigmoid scores for
  /// neural models, the weighted mean for the ensemble, one-hot for majority.
  ClassScores scores(const Document& doc) const {
    switch (kind) {
      case ModelKind::LogReg:
      case ModelKind::Svm: return predict_proba(linear, features.transform(doc));
      case ModelKind::TextCnn:
      case ModelKind::BiGru: {
        const auto ids = encode(doc, vocab, net.config.max_len);
        const auto p = net_forward(net, ids);
        return {p[0], p[1], p[2]};
      }
      case ModelKind::Ensemble: {
        std::vector<ClassScores> sets;
        sets.reserve(members.size());
        for (const auto& m : members) sets.push_back(m.scores(doc));
        return combine_scores(sets, weights);
      }
      case ModelKind::Majority: {
        ClassScores s{};
        s[static_cast<std::size_t>(to_index(majority))] = 1.0;
        return s;
      }
    }
    return {};
  }

  Label predict(const Document& doc) const { return predict_label(scores(doc)); }
};

namespace detail {

inline std::vector<Label> labels_of(std::span<const Document> docs) {
  std::vector<Label> y;
  y.reserve(docs.size());
  for (const auto& d : docs) {
    if (!d.label) throw Error(ErrorCode::UnlabeledDocument, d.id);
    y.push_back(*d.label);
  }
  return y;
}

inline TrainedModel train_linear_model(const ModelSpec& spec, std::span<const Document> docs, std::uint64_t seed) {
  TrainedModel m;
  m.kind = spec.kind;
  m.features = fit_features(docs, spec.features, spec.stopwords);
  std::vector<SparseVector> X;
  X.reserve(docs.size());
  for (const auto& d : docs) X.push_back(m.features.transform(d));
  const auto y = labels_of(docs);
  LinearConfig cfg = spec.kind == ModelKind::LogReg ? spec.logreg : spec.svm;
  cfg.kind = spec.kind == ModelKind::LogReg ? LinearKind::LogReg : LinearKind::Svm;
  cfg.seed = derive_seed(seed, 0x6c696e6561 /* "linea" */);
  m.linear = hatebench::train_linear(X, y, cfg);
  return m;
}

inline TrainedModel train_neural_model(const ModelSpec& spec, std::span<const Document> docs, std::uint64_t seed) {
  TrainedModel m;
  m.kind = spec.kind;
  const NetConfig& cfg = spec.kind == ModelKind::TextCnn ? spec.textcnn : spec.bigru;
  m.vocab = build_vocab(docs, spec.vocab_cap);

  // early-stopping holdout: the last part of a stratified split of the training docs
  const auto y = labels_of(docs);
  std::vector<Document> fit_docs, val_docs;
  if (spec.validation_folds >= 2) {
    const auto plan = stratified_kfold(std::span<const Label>(y), spec.validation_folds, derive_seed(seed, 0x76616c /* "val" */));
    for (std::size_t i = 0; i < docs.size(); ++i) {
      (plan.assignments[i] == spec.validation_folds - 1 ? val_docs : fit_docs).push_back(docs[i]);
    }
  }
  if (fit_docs.empty()) {
    fit_docs.assign(docs.begin(), docs.end());
    val_docs.clear();
  }

  const std::uint64_t init_seed = derive_seed(seed, 0x696e6974 /* "init" */);
  std::optional<EmbeddingMatrix<double>> emb;
  if (spec.embeddings_path) {
    emb = load_pretrained_vectors<double>(*spec.embeddings_path, m.vocab, cfg.embed_dim, init_seed);
    m.embedding_coverage = emb->coverage;
  }
  m.net = init_net<double>(cfg, m.vocab.size(), init_seed, emb ? &emb->table : nullptr);

  TrainConfig tc = spec.train;
  tc.seed = derive_seed(seed, 0x6e6e /* "nn" */);
  const auto fit_labels = labels_of(fit_docs);
  tc.class_weights = spec.neural_class_weights ? training_class_weights(fit_labels, true) : ClassScores{1.0, 1.0, 1.0};
  if (spec.kind == ModelKind::BiGru && tc.clip_norm == 0.0) tc.clip_norm = kGruClipNorm;
  m.history = train_neural(m.net, encode_all(fit_docs, m.vocab, cfg.max_len), encode_all(val_docs, m.vocab, cfg.max_len), tc);
  return m;
}

}  // namespace detail

/// Fits `spec.kind` on `docs`. All randomness derives from `seed`; ensemble
/// members are trained exactly as they would be on their own.
inline TrainedModel train_model(const ModelSpec& spec, std::span<const Document> docs, std::uint64_t seed) {
  if (docs.empty()) throw Error(ErrorCode::EmptySplit, "no training documents");
  switch (spec.kind) {
    case ModelKind::LogReg:
    case ModelKind::Svm: return detail::train_linear_model(spec, docs, seed);
    case ModelKind::TextCnn:
    case ModelKind::BiGru: return detail::train_neural_model(spec, docs, seed);
    case ModelKind::Majority: {
      const auto y = detail::labels_of(docs);
      const auto counts = label_counts(y);
      TrainedModel m;
      m.kind = ModelKind::Majority;
      std::size_t best = 0;
      for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c;
      }
      m.majority = label_from_index(static_cast<int>(best));
      return m;
    }
    case ModelKind::Ensemble: {
      if (spec.ensemble_members.size() < 2 || spec.ensemble_members.size() != spec.ensemble_weights.size()) {
        throw Error(ErrorCode::LengthMismatch, "ensemble needs >= 2 members and one weight per member");
      }
      TrainedModel m;
      m.kind = ModelKind::Ensemble;
      m.weights = spec.ensemble_weights;
      for (ModelKind k : spec.ensemble_members) {
        if (k == ModelKind::Ensemble) throw Error(ErrorCode::BadConfig, "nested ensembles are not supported");
        m.members.push_back(train_model(spec.with_kind(k), docs, seed));
      }
      return m;
    }
  }
  throw Error(ErrorCode::BadConfig, "unknown model kind");
}

}  // namespace hatebench

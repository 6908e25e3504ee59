#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/error.hpp"
#include "hatebench/label.hpp"
#include "hatebench/layers.hpp"
#include "hatebench/metrics.hpp"
#include "hatebench/rng.hpp"
#include "hatebench/tensor.hpp"

namespace hatebench {

// ---------------------------------------------------------------------------
// Vocabulary. Id 0 is shared by padding and out-of-vocabulary tokens.

inline constexpr std::size_t kDefaultVocabCap = 11221;

struct NeuralVocab {
  std::vector<std::string> tokens{std::string()};  // id -> token; tokens[0] is the padding slot
  std::unordered_map<std::string, int> ids;

  std::size_t size() const { return tokens.size(); }

  int id(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? 0 : it->second;
  }

  void rebuild_index() {
    ids.clear();
    for (std::size_t i = 1; i < tokens.size(); ++i) ids.emplace(tokens[i], static_cast<int>(i));
  }

  friend bool operator==(const NeuralVocab& a, const NeuralVocab& b) { return a.tokens == b.tokens; }
};

/// Most frequent tokens first (ties by token) get ids 1..cap-1.
inline NeuralVocab build_vocab(std::span<const Document> docs, std::size_t cap = kDefaultVocabCap) {
  if (docs.empty()) throw Error(ErrorCode::EmptySplit, "vocabulary from zero documents");
  if (cap < 1) throw Error(ErrorCode::BadConfig, "vocabulary cap must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) freq[t] += 1;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > cap - 1) ranked.resize(cap - 1);
  NeuralVocab v;
  for (auto& [tok, _] : ranked) v.tokens.push_back(std::move(tok));
  v.rebuild_index();
  return v;
}

/// Token ids truncated to `max_len` and right-padded with 0.
inline std::vector<int> encode(const Document& doc, const NeuralVocab& vocab, std::size_t max_len) {
  std::vector<int> ids(max_len, 0);
  const std::size_t n = std::min(max_len, doc.tokens.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(doc.tokens[i]);
  return ids;
}

/// Positions up to and including the last non-zero id; trailing zeros are padding.
inline std::size_t effective_length(std::span<const int> ids) {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == 0) --n;
  return n;
}

// ---------------------------------------------------------------------------
// Pretrained vectors ("COUNT DIM" header, then "token v1 ... vDIM" per line)

template <class T>
struct EmbeddingMatrix {
  nn::Tensor<T> table;  // [V, D], row 0 zero
  double coverage = 0.0;
  std::size_t found = 0;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) parts.push_back(line.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace detail

inline constexpr double kRandomEmbeddingScale = 0.05;

/// Random rows uniform in [-kRandomEmbeddingScale, kRandomEmbeddingScale] (row 0
/// zero), drawn for every row so the values do not depend on which tokens a
/// pretrained file covers.
template <class T>
nn::Tensor<T> random_embedding(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  nn::Tensor<T> table({vocab_size, dim});
  Rng rng(derive_seed(seed, 0x656d62 /* "emb" */));
  for (std::size_t r = 1; r < vocab_size; ++r) {
    for (auto& v : table.row(r)) v = static_cast<T>(rng.uniform(-kRandomEmbeddingScale, kRandomEmbeddingScale));
  }
  return table;
}

template <class T>
EmbeddingMatrix<T> load_pretrained_vectors(std::istream& in, const NeuralVocab& vocab, std::size_t expected_dim,
                                           std::uint64_t seed) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::BadHeader, "empty vector file");
  const auto head = detail::split_spaces(line);
  double count_d = 0.0, dim_d = 0.0;
  if (head.size() != 2 || !detail::parse_double(head[0], count_d) || !detail::parse_double(head[1], dim_d) ||
      dim_d < 1 || dim_d != std::floor(dim_d)) {
    throw Error(ErrorCode::BadHeader, "expected 'COUNT DIM', got '" + line + "'");
  }
  const auto dim = static_cast<std::size_t>(dim_d);
  if (dim != expected_dim) {
    throw Error(ErrorCode::DimMismatch, "found " + std::to_string(dim) + ", expected " + std::to_string(expected_dim));
  }
  EmbeddingMatrix<T> em{random_embedding<T>(vocab.size(), dim, seed), 0.0, 0};
  std::vector<char> seen(vocab.size(), 0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = detail::split_spaces(line);
    if (parts.empty()) continue;
    const int id = vocab.id(std::string(parts[0]));
    if (id == 0 || seen[static_cast<std::size_t>(id)]) continue;
    if (parts.size() != dim + 1) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + std::to_string(parts.size() - 1) +
                                                " values, expected " + std::to_string(dim));
    }
    auto row = em.table.row(static_cast<std::size_t>(id));
    for (std::size_t d = 0; d < dim; ++d) {
      double v = 0.0;
      if (!detail::parse_double(parts[d + 1], v)) {
        throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": bad number '" +
                                                  std::string(parts[d + 1]) + "'");
      }
      row[d] = static_cast<T>(v);
    }
    seen[static_cast<std::size_t>(id)] = 1;
    em.found += 1;
  }
  em.coverage = vocab.size() > 1 ? static_cast<double>(em.found) / static_cast<double>(vocab.size() - 1) : 0.0;
  return em;
}

template <class T>
EmbeddingMatrix<T> load_pretrained_vectors(const std::string& path, const NeuralVocab& vocab,
                                           std::size_t expected_dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path);
  return load_pretrained_vectors<T>(in, vocab, expected_dim, seed);
}

// ---------------------------------------------------------------------------
// Architectures

enum class Arch { TextCnn, BiGru };

inline const char* arch_name(Arch a) { return a == Arch::TextCnn ? "textcnn" : "bigru"; }

struct NetConfig {
  Arch arch = Arch::TextCnn;
  std::size_t embed_dim = 300;
  std::vector<std::size_t> filter_sizes{1, 2, 3, 5};  // Text-CNN
  std::size_t filters_per_size = 32;                   // Text-CNN
  std::size_t hidden = 80;                             // BiGRU, per direction
  std::size_t max_len = 100;

  void validate() const {
    if (embed_dim < 1) throw Error(ErrorCode::BadConfig, "embed_dim must be >= 1");
    if (arch == Arch::TextCnn) {
      if (filter_sizes.empty() || !std::is_sorted(filter_sizes.begin(), filter_sizes.end()) ||
          std::adjacent_find(filter_sizes.begin(), filter_sizes.end()) != filter_sizes.end() || filter_sizes[0] < 1) {
        throw Error(ErrorCode::BadConfig, "filter sizes must be non-empty, positive and strictly ascending");
      }
      if (filters_per_size < 1) throw Error(ErrorCode::BadConfig, "filters_per_size must be >= 1");
      if (max_len < filter_sizes.back()) throw Error(ErrorCode::BadConfig, "max_len below the largest filter size");
    } else if (hidden < 1) {
      throw Error(ErrorCode::BadConfig, "hidden must be >= 1");
    }
    if (max_len < 1) throw Error(ErrorCode::BadConfig, "max_len must be >= 1");
  }

  std::size_t feature_width() const {
    return arch == Arch::TextCnn ? filter_sizes.size() * filters_per_size : 2 * hidden;
  }
};

/// Embedding 300; conv widths 1, 2, 3, 5 with 32 filters each; ELU; dense 3 + sigmoid.
inline NetConfig textcnn_config() { return NetConfig{}; }

/// Embedding 300; bidirectional GRU with 80 units per direction; dense 3 + sigmoid.
inline NetConfig bigru_config() {
  NetConfig c;
  c.arch = Arch::BiGru;
  return c;
}

template <class T>
struct NeuralNet {
  NetConfig config;
  std::size_t vocab_size = 0;
  nn::ParamStore<T> params;
};

inline std::string conv_filters_name(std::size_t k) { return "conv" + std::to_string(k) + ".filters"; }
inline std::string conv_bias_name(std::size_t k) { return "conv" + std::to_string(k) + ".bias"; }

/// Glorot-initialized network. Without `embedding`, rows come from random_embedding.
template <class T>
NeuralNet<T> init_net(const NetConfig& cfg, std::size_t vocab_size, std::uint64_t seed,
                      const nn::Tensor<T>* embedding = nullptr) {
  cfg.validate();
  if (vocab_size < 1) throw Error(ErrorCode::BadConfig, "vocabulary must hold the padding id");
  NeuralNet<T> net;
  net.config = cfg;
  net.vocab_size = vocab_size;
  if (embedding) {
    nn::require_shape(*embedding, {vocab_size, cfg.embed_dim}, "embedding matrix");
    nn::Tensor<T> table = *embedding;
    for (auto& v : table.row(0)) v = T(0);
    net.params.add("embedding", std::move(table));
  } else {
    net.params.add("embedding", random_embedding<T>(vocab_size, cfg.embed_dim, seed));
  }
  Rng rng(derive_seed(seed, 0x6e6574 /* "net" */));
  if (cfg.arch == Arch::TextCnn) {
    for (std::size_t k : cfg.filter_sizes) {
      nn::Tensor<T> f({cfg.filters_per_size, k, cfg.embed_dim});
      nn::glorot_uniform(f, k * cfg.embed_dim, cfg.filters_per_size, rng);
      net.params.add(conv_filters_name(k), std::move(f));
      net.params.add(conv_bias_name(k), nn::Tensor<T>({cfg.filters_per_size}));
    }
  } else {
    nn::add_gru_params(net.params, "fwd.", cfg.embed_dim, cfg.hidden, rng);
    nn::add_gru_params(net.params, "bwd.", cfg.embed_dim, cfg.hidden, rng);
  }
  nn::Tensor<T> W({static_cast<std::size_t>(kNumClasses), cfg.feature_width()});
  nn::glorot_uniform(W, cfg.feature_width(), kNumClasses, rng);
  net.params.add("out.W", std::move(W));
  net.params.add("out.b", nn::Tensor<T>({static_cast<std::size_t>(kNumClasses)}));
  return net;
}

/// Everything the backward pass needs from one forward evaluation.
template <class T>
struct ForwardCache {
  nn::Tensor<T> emb;
  // Text-CNN, one entry per filter size
  std::vector<nn::Tensor<T>> conv_pre;
  std::vector<nn::Tensor<T>> conv_act;
  std::vector<std::vector<std::size_t>> argmax;
  // BiGRU
  std::size_t length = 0;
  nn::Tensor<T> seq;
  nn::BiGruTrace<T> trace;

  nn::Tensor<T> features;
  nn::Tensor<T> logits;
  nn::Tensor<T> probs;
};

template <class T>
ForwardCache<T> forward_cached(const NeuralNet<T>& net, std::span<const int> ids) {
  const auto& cfg = net.config;
  const auto& P = net.params;
  ForwardCache<T> c;
  c.emb = nn::embedding_forward(P.value("embedding"), ids);
  c.features = nn::Tensor<T>({cfg.feature_width()});
  if (cfg.arch == Arch::TextCnn) {
    if (ids.size() < cfg.filter_sizes.back()) {
      throw Error(ErrorCode::ShapeMismatch, "sequence shorter than the largest filter; encode with max_len");
    }
    std::size_t off = 0;
    for (std::size_t k : cfg.filter_sizes) {
      auto pre = nn::conv1d_forward(c.emb, P.value(conv_filters_name(k)), P.value(conv_bias_name(k)));
      auto act = nn::apply_activation(nn::Activation::Elu, pre);
      auto pooled = nn::max_pool_time(act);
      for (std::size_t f = 0; f < cfg.filters_per_size; ++f) c.features[off + f] = pooled.out[f];
      off += cfg.filters_per_size;
      c.conv_pre.push_back(std::move(pre));
      c.conv_act.push_back(std::move(act));
      c.argmax.push_back(std::move(pooled.argmax));
    }
  } else {
    c.length = effective_length(ids);
    // an all-padding input reads out the zero initial states
    if (c.length > 0) {
      c.seq = nn::Tensor<T>({c.length, cfg.embed_dim});
      for (std::size_t t = 0; t < c.length; ++t) std::copy_n(c.emb.row(t).begin(), cfg.embed_dim, c.seq.row(t).begin());
      c.trace = nn::bigru_sequence(c.seq, nn::gru_params(P, "fwd."), nn::gru_params(P, "bwd."));
      for (std::size_t i = 0; i < cfg.hidden; ++i) {
        c.features[i] = c.trace.h_fwd[i];
        c.features[cfg.hidden + i] = c.trace.h_bwd[i];
      }
    }
  }
  c.logits = nn::dense_forward(c.features, P.value("out.W"), P.value("out.b"));
  c.probs = nn::apply_activation(nn::Activation::Sigmoid, c.logits);
  return c;
}

/// Per-class sigmoid scores.
template <class T>
nn::Tensor<T> net_forward(const NeuralNet<T>& net, std::span<const int> ids) {
  return forward_cached(net, ids).probs;
}

template <class T>
nn::Tensor<T> textcnn_forward(const NeuralNet<T>& net, std::span<const int> ids) {
  if (net.config.arch != Arch::TextCnn) throw Error(ErrorCode::BadConfig, "not a Text-CNN");
  return net_forward(net, ids);
}

template <class T>
nn::Tensor<T> bigru_forward(const NeuralNet<T>& net, std::span<const int> ids) {
  if (net.config.arch != Arch::BiGru) throw Error(ErrorCode::BadConfig, "not a BiGRU");
  return net_forward(net, ids);
}

/// Backpropagates `dprobs` through the cached forward pass into the gradient slots.
template <class T>
void backward(NeuralNet<T>& net, std::span<const int> ids, const ForwardCache<T>& c, const nn::Tensor<T>& dprobs) {
  const auto& cfg = net.config;
  auto& P = net.params;
  const auto dlogits = nn::activation_backward(nn::Activation::Sigmoid, c.logits, c.probs, dprobs);
  nn::Tensor<T> dfeat({cfg.feature_width()});
  nn::dense_backward(c.features, P.value("out.W"), dlogits, &dfeat, P.grad("out.W"), P.grad("out.b"));
  nn::Tensor<T> demb(c.emb.shape());
  if (cfg.arch == Arch::TextCnn) {
    std::size_t off = 0;
    for (std::size_t b = 0; b < cfg.filter_sizes.size(); ++b) {
      const std::size_t k = cfg.filter_sizes[b];
      nn::Tensor<T> dpool({cfg.filters_per_size});
      for (std::size_t f = 0; f < cfg.filters_per_size; ++f) dpool[f] = dfeat[off + f];
      off += cfg.filters_per_size;
      const auto dact = nn::max_pool_time_backward(std::span<const std::size_t>(c.argmax[b]), dpool, c.conv_act[b].dim(0));
      const auto dpre = nn::activation_backward(nn::Activation::Elu, c.conv_pre[b], c.conv_act[b], dact);
      nn::conv1d_backward(c.emb, P.value(conv_filters_name(k)), dpre, &demb, P.grad(conv_filters_name(k)),
                          P.grad(conv_bias_name(k)));
    }
  } else if (c.length > 0) {
    nn::Tensor<T> dh_f({cfg.hidden}), dh_b({cfg.hidden});
    for (std::size_t i = 0; i < cfg.hidden; ++i) {
      dh_f[i] = dfeat[i];
      dh_b[i] = dfeat[cfg.hidden + i];
    }
    const auto dseq = nn::bigru_backward(c.seq, nn::gru_params(P, "fwd."), nn::gru_params(P, "bwd."), c.trace, dh_f,
                                         dh_b, nn::gru_grads(P, "fwd."), nn::gru_grads(P, "bwd."));
    for (std::size_t t = 0; t < c.length; ++t) std::copy_n(dseq.row(t).begin(), cfg.embed_dim, demb.row(t).begin());
  }
  nn::embedding_backward(ids, demb, P.grad("embedding"));
}

/// Forward + weighted BCE + backward, gradients scaled by `scale`. Returns the unscaled loss.
template <class T>
double accumulate_gradients(NeuralNet<T>& net, std::span<const int> ids, Label gold,
                            std::span<const double> class_weights, double scale = 1.0) {
  const auto c = forward_cached(net, ids);
  const auto g = static_cast<std::size_t>(to_index(gold));
  const double loss = nn::weighted_bce_loss(c.probs, g, class_weights);
  auto dprobs = nn::weighted_bce_backward(c.probs, g, class_weights);
  for (auto& v : dprobs.data()) v = static_cast<T>(static_cast<double>(v) * scale);
  backward(net, ids, c, dprobs);
  return loss;
}

template <class T>
double example_loss(const NeuralNet<T>& net, std::span<const int> ids, Label gold, std::span<const double> class_weights) {
  return nn::weighted_bce_loss(net_forward(net, ids), static_cast<std::size_t>(to_index(gold)), class_weights);
}

template <class T>
Label predict(const NeuralNet<T>& net, std::span<const int> ids) {
  const auto p = net_forward(net, ids);
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
  }
  return label_from_index(best);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 10;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int patience = 3;
  std::array<double, kNumClasses> class_weights{1.0, 1.0, 1.0};
  double clip_norm = 0.0;  // 0 disables; BiGRU trains with 5
  bool freeze_embeddings = false;

  void validate() const {
    if (epochs < 1) throw Error(ErrorCode::BadConfig, "epochs must be >= 1");
    if (patience < 1) throw Error(ErrorCode::BadConfig, "patience must be >= 1");
    if (batch < 1) throw Error(ErrorCode::BadConfig, "batch must be >= 1");
    if (!(lr > 0.0)) throw Error(ErrorCode::BadConfig, "lr must be > 0");
  }
};

inline constexpr double kGruClipNorm = 5.0;

struct EncodedSet {
  std::vector<std::vector<int>> ids;
  std::vector<Label> labels;

  std::size_t size() const { return ids.size(); }
};

inline EncodedSet encode_all(std::span<const Document> docs, const NeuralVocab& vocab, std::size_t max_len) {
  EncodedSet s;
  for (const auto& d : docs) {
    s.ids.push_back(encode(d, vocab, max_len));
    if (!d.label) throw Error(ErrorCode::UnlabeledDocument, d.id);
    s.labels.push_back(*d.label);
  }
  return s;
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  friend bool operator==(const TrainHistory& a, const TrainHistory& b) {
    if (a.best_epoch != b.best_epoch || a.stopped_early != b.stopped_early || a.epochs.size() != b.epochs.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      if (a.epochs[i].epoch != b.epochs[i].epoch || a.epochs[i].train_loss != b.epochs[i].train_loss ||
          a.epochs[i].val_macro_f1 != b.epochs[i].val_macro_f1) {
        return false;
      }
    }
    return true;
  }
};

template <class T>
double evaluate_macro_f1(const NeuralNet<T>& net, const EncodedSet& set) {
  std::vector<Label> pred;
  pred.reserve(set.size());
  for (const auto& ids : set.ids) pred.push_back(predict(net, ids));
  return macro_f1(set.labels, pred);
}

/// Mini-batch Adam on the weighted BCE. After each epoch the validation macro-F1
/// is recorded; the best epoch's parameters are kept and training stops after
/// `patience` epochs without improvement. Without validation data the last
/// epoch is kept.
template <class T>
TrainHistory train_neural(NeuralNet<T>& net, const EncodedSet& train, const EncodedSet& validation,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw Error(ErrorCode::EmptySplit, "no training documents");
  nn::AdamState<T> adam;
  adam.lr = cfg.lr;
  net.params.zero_grad();
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, 0x747261696e /* "train" */));

  TrainHistory hist;
  double best = -1.0;
  int since_best = 0;
  nn::ParamStore<T> best_params;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++batch_no) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t r = order[i];
        batch_loss += accumulate_gradients(net, train.ids[r], train.labels[r], cfg.class_weights, scale);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      }
      epoch_loss += batch_loss;
      if (cfg.freeze_embeddings) net.params.grad("embedding").fill(T(0));
      if (cfg.clip_norm > 0.0) nn::clip_grad_norm(net.params, cfg.clip_norm);
      nn::adam_step(net.params, adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train.size());
    if (validation.size() == 0) {
      rec.val_macro_f1 = 0.0;
      hist.epochs.push_back(rec);
      hist.best_epoch = epoch;
      continue;
    }
    rec.val_macro_f1 = evaluate_macro_f1(net, validation);
    hist.epochs.push_back(rec);
    if (rec.val_macro_f1 > best) {
      best = rec.val_macro_f1;
      hist.best_epoch = epoch;
      since_best = 0;
      best_params = net.params;
    } else if (++since_best >= cfg.patience) {
      hist.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  if (validation.size() > 0) {
    net.params = std::move(best_params);
    net.params.zero_grad();
  }
  return hist;
}

}  // namespace hatebench

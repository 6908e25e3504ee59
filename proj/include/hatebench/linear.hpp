#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hatebench/error.hpp"
#include "hatebench/features.hpp"
#include "hatebench/label.hpp"
#include "hatebench/rng.hpp"

namespace hatebench {

using ClassScores = std::array<double, kNumClasses>;

/// Balanced weights N / (K * N_c).
inline ClassScores class_weights(std::span<const std::size_t> counts) {
  if (counts.size() != static_cast<std::size_t>(kNumClasses)) {
    throw Error(ErrorCode::DimensionMismatch, "expected one count per class");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error(ErrorCode::ZeroCount, std::string("class ") + label_name(label_from_index(static_cast<int>(c))));
    total += static_cast<double>(counts[c]);
  }
  ClassScores w{};
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w[c] = total / (static_cast<double>(kNumClasses) * static_cast<double>(counts[c]));
  }
  return w;
}

inline std::array<std::size_t, kNumClasses> label_counts(std::span<const Label> y) {
  std::array<std::size_t, kNumClasses> counts{};
  for (Label l : y) counts[static_cast<std::size_t>(to_index(l))] += 1;
  return counts;
}

/// Balanced weights over the classes present in `y`; absent classes get 1.
inline ClassScores training_class_weights(std::span<const Label> y, bool balanced) {
  ClassScores w{1.0, 1.0, 1.0};
  if (!balanced) return w;
  const auto counts = label_counts(y);
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) {
      w[c] = static_cast<double>(y.size()) / (static_cast<double>(present) * static_cast<double>(counts[c]));
    }
  }
  return w;
}

enum class LinearKind { LogReg, Svm };

inline const char* linear_kind_name(LinearKind k) { return k == LinearKind::LogReg ? "logreg" : "svm"; }

struct LinearConfig {
  LinearKind kind = LinearKind::LogReg;
  double C = 1.0;
  bool balanced = true;
  int epochs = 30;
  double lr0 = 1.0;
  std::uint64_t seed = 0;
  bool multinomial = true;  // logreg only; false trains three one-vs-rest binary models
  std::size_t batch = 64;

  void validate() const {
    if (!(C > 0.0)) throw Error(ErrorCode::BadConfig, "C must be > 0");
    if (epochs < 1) throw Error(ErrorCode::BadConfig, "epochs must be >= 1");
    if (!(lr0 > 0.0)) throw Error(ErrorCode::BadConfig, "lr0 must be > 0");
    if (batch < 1) throw Error(ErrorCode::BadConfig, "batch must be >= 1");
  }
};

/// Logistic regression with C = 1.0 and balanced class weights.
inline LinearConfig default_logreg_config() { return LinearConfig{}; }

/// Linear SVM with C = 1.0 and unweighted classes.
inline LinearConfig default_svm_config() {
  LinearConfig c;
  c.kind = LinearKind::Svm;
  c.balanced = false;
  c.lr0 = 2.0;
  c.epochs = 60;
  return c;
}

struct LinearModel {
  LinearKind kind = LinearKind::LogReg;
  bool multinomial = true;
  std::size_t dim = 0;
  std::array<std::vector<double>, kNumClasses> W;
  ClassScores b{};
  ClassScores class_weights{1.0, 1.0, 1.0};

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

inline double dot(const std::vector<double>& w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& e : x.entries) s += w[e.index] * e.value;
  return s;
}

inline ClassScores decision_scores(const LinearModel& model, const SparseVector& x) {
  if (x.dim != model.dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature dim " + std::to_string(x.dim) + " vs model dim " + std::to_string(model.dim));
  }
  ClassScores s{};
  for (int c = 0; c < kNumClasses; ++c) {
    s[static_cast<std::size_t>(c)] = dot(model.W[static_cast<std::size_t>(c)], x) + model.b[static_cast<std::size_t>(c)];
  }
  return s;
}

inline ClassScores softmax(const ClassScores& s) {
  const double m = *std::max_element(s.begin(), s.end());
  ClassScores p{};
  double z = 0.0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    p[c] = std::exp(s[c] - m);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

inline double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

/// Argmax; ties go to the lowest class index.
inline Label predict_label(const ClassScores& scores) {
  for (double v : scores) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite class score");
  }
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (scores[static_cast<std::size_t>(c)] > scores[static_cast<std::size_t>(best)]) best = c;
  }
  return label_from_index(best);
}

/// Class probabilities: softmax of the decision scores (sigmoids for one-vs-rest
/// logistic regression, renormalized).
inline ClassScores predict_proba(const LinearModel& model, const SparseVector& x) {
  const auto s = decision_scores(model, x);
  if (model.kind == LinearKind::LogReg && !model.multinomial) {
    ClassScores p{};
    double z = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] = sigmoid(s[c]);
      z += p[c];
    }
    for (auto& v : p) v /= z;
    return p;
  }
  return softmax(s);
}

namespace detail {

inline void check_training_set(std::span<const SparseVector> X, std::span<const Label> y) {
  if (X.size() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(X.size()) + " rows vs " + std::to_string(y.size()) + " labels");
  }
  if (X.empty()) throw Error(ErrorCode::DimensionMismatch, "empty training set");
  for (const auto& x : X) {
    if (x.dim != X.front().dim) throw Error(ErrorCode::DimensionMismatch, "rows have different dims");
  }
}

inline double log_sum_exp(const ClassScores& s) {
  const double m = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - m);
  return m + std::log(z);
}

// log(1 + e^v) without overflow
inline double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

/// Per-row gradient of the data term with respect to the three class scores.
inline ClassScores score_gradient(const LinearModel& m, const ClassScores& s, Label y) {
  const auto yi = static_cast<std::size_t>(to_index(y));
  const double w = m.class_weights[yi];
  ClassScores g{};
  if (m.kind == LinearKind::LogReg && m.multinomial) {
    const auto p = softmax(s);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = w * (p[c] - (c == yi ? 1.0 : 0.0));
  } else if (m.kind == LinearKind::LogReg) {
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = w * (sigmoid(s[c]) - (c == yi ? 1.0 : 0.0));
  } else {
    for (std::size_t c = 0; c < g.size(); ++c) {
      const double t = c == yi ? 1.0 : -1.0;
      g[c] = t * s[c] < 1.0 ? -w * t : 0.0;
    }
  }
  return g;
}

inline double row_loss(const LinearModel& m, const ClassScores& s, Label y) {
  const auto yi = static_cast<std::size_t>(to_index(y));
  const double w = m.class_weights[yi];
  if (m.kind == LinearKind::LogReg && m.multinomial) return w * (log_sum_exp(s) - s[yi]);
  double l = 0.0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double t = c == yi ? 1.0 : -1.0;
    if (m.kind == LinearKind::LogReg) {
      l += softplus(-t * s[c]);
    } else {
      l += std::max(0.0, 1.0 - t * s[c]);
    }
  }
  return w * l;
}

inline double objective(const LinearModel& m, std::span<const SparseVector> X, std::span<const Label> y, double C) {
  double data = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) data += row_loss(m, decision_scores(m, X[i]), y[i]);
  double sq = 0.0;
  for (const auto& w : m.W) {
    for (double v : w) sq += v * v;
  }
  const double n = static_cast<double>(X.size());
  return data / n + sq / (2.0 * C * n);
}

inline LinearModel train_linear(std::span<const SparseVector> X, std::span<const Label> y, const LinearConfig& cfg) {
  cfg.validate();
  check_training_set(X, y);
  const std::size_t n = X.size();
  LinearModel m;
  m.kind = cfg.kind;
  m.multinomial = cfg.kind == LinearKind::LogReg ? cfg.multinomial : false;
  m.dim = X.front().dim;
  for (auto& w : m.W) w.assign(m.dim, 0.0);
  m.class_weights = training_class_weights(y, cfg.balanced);

  const double lambda = 1.0 / (cfg.C * static_cast<double>(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 0x6c696e /* "lin" */));
  std::vector<ClassScores> batch_grads;
  // subgradient steps on the hinge are not descent steps: the SVM keeps the best epoch-end iterate
  const bool keep_best = m.kind == LinearKind::Svm;
  LinearModel best;
  double best_objective = INFINITY;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    const double eta = cfg.lr0 / (1.0 + 0.01 * static_cast<double>(epoch));
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t stop = std::min(n, start + cfg.batch);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      // all gradients in the batch are taken at the same weights
      batch_grads.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t r = order[i];
        batch_grads.push_back(score_gradient(m, decision_scores(m, X[r]), y[r]));
      }
      const double decay = 1.0 - eta * lambda;
      for (auto& w : m.W) {
        for (double& v : w) v *= decay;
      }
      for (std::size_t i = start; i < stop; ++i) {
        const auto& g = batch_grads[i - start];
        const auto& x = X[order[i]];
        for (std::size_t c = 0; c < g.size(); ++c) {
          if (g[c] == 0.0) continue;
          const double step = eta * inv_b * g[c];
          for (const auto& e : x.entries) m.W[c][e.index] -= step * e.value;
          m.b[c] -= step;
        }
      }
    }
    if (keep_best) {
      const double f = objective(m, X, y, cfg.C);
      if (f < best_objective) {
        best_objective = f;
        best = m;
      }
    }
  }
  return keep_best ? best : m;
}

}  // namespace detail

/// Class-weighted multinomial cross-entropy plus (1/(2C))||W||^2, by mini-batch
/// SGD (batch 64, step lr0 / (1 + 0.01 epoch), reshuffled each epoch).
inline LinearModel train_logreg(std::span<const SparseVector> X, std::span<const Label> y, LinearConfig cfg) {
  cfg.kind = LinearKind::LogReg;
  return detail::train_linear(X, y, cfg);
}

/// One-vs-rest hinge loss with class-weighted rows; subgradient SGD on the same schedule,
/// returning the epoch-end weights with the lowest objective.
inline LinearModel train_svm(std::span<const SparseVector> X, std::span<const Label> y, LinearConfig cfg) {
  cfg.kind = LinearKind::Svm;
  return detail::train_linear(X, y, cfg);
}

inline LinearModel train_linear(std::span<const SparseVector> X, std::span<const Label> y, const LinearConfig& cfg) {
  return detail::train_linear(X, y, cfg);
}

/// Objective value divided by n: mean weighted data loss + ||W||^2 / (2 C n).
inline double training_objective(const LinearModel& m, std::span<const SparseVector> X, std::span<const Label> y,
                                 double C) {
  detail::check_training_set(X, y);
  return detail::objective(m, X, y, C);
}

}  // namespace hatebench

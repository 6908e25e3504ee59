#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "hatebench/error.hpp"
#include "hatebench/label.hpp"

namespace hatebench {

/// Gold rows x predicted columns. Real-valued so fold averages fit the same type.
struct ConfusionMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> counts{};

  double& at(Label gold, Label pred) {
    return counts[static_cast<std::size_t>(to_index(gold))][static_cast<std::size_t>(to_index(pred))];
  }
  double at(Label gold, Label pred) const {
    return counts[static_cast<std::size_t>(to_index(gold))][static_cast<std::size_t>(to_index(pred))];
  }

  double row_sum(std::size_t g) const {
    double s = 0.0;
    for (double v : counts[g]) s += v;
    return s;
  }

  double total() const {
    double s = 0.0;
    for (std::size_t g = 0; g < counts.size(); ++g) s += row_sum(g);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(gold.size()) + " gold vs " + std::to_string(pred.size()) + " predicted");
  }
  if (gold.empty()) throw Error(ErrorCode::LengthMismatch, "no label pairs");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) m.at(gold[i], pred[i]) += 1.0;
  return m;
}

/// Per-class F1 with 0/0 taken as 0.
inline std::array<double, kNumClasses> per_class_f1(const ConfusionMatrix& m) {
  std::array<double, kNumClasses> f1{};
  for (std::size_t c = 0; c < f1.size(); ++c) {
    const double tp = m.counts[c][c];
    double fp = 0.0, fn = 0.0;
    for (std::size_t o = 0; o < f1.size(); ++o) {
      if (o == c) continue;
      fp += m.counts[o][c];
      fn += m.counts[c][o];
    }
    const double p = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    f1[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return f1;
}

inline double macro_f1(const ConfusionMatrix& m) {
  if (!(m.total() > 0.0)) throw Error(ErrorCode::EmptyMatrix, "macro-F1 of an empty confusion matrix");
  const auto f1 = per_class_f1(m);
  return (f1[0] + f1[1] + f1[2]) / 3.0;
}

inline double macro_f1(std::span<const Label> gold, std::span<const Label> pred) {
  return macro_f1(confusion_matrix(gold, pred));
}

}  // namespace hatebench

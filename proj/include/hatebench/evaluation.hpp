#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/metrics.hpp"
#include "hatebench/pipeline.hpp"
#include "json.hpp"

namespace hatebench {

using RowPercentages = std::array<std::array<double, kNumClasses>, kNumClasses>;

/// 100 * cell / row sum; a zero row gives zeros.
inline RowPercentages row_percentages(const ConfusionMatrix& m) {
  RowPercentages pct{};
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    const double s = m.row_sum(g);
    for (std::size_t p = 0; p < kNumClasses; ++p) pct[g][p] = s > 0.0 ? 100.0 * m.counts[g][p] / s : 0.0;
  }
  return pct;
}

struct AveragedMatrix {
  ConfusionMatrix mean;
  RowPercentages percentages{};
};

inline AveragedMatrix average_matrices(std::span<const ConfusionMatrix> ms) {
  if (ms.empty()) throw Error(ErrorCode::ShapeMismatch, "no matrices to average");
  AveragedMatrix out;
  for (const auto& m : ms) {
    for (std::size_t g = 0; g < kNumClasses; ++g) {
      for (std::size_t p = 0; p < kNumClasses; ++p) out.mean.counts[g][p] += m.counts[g][p];
    }
  }
  for (auto& row : out.mean.counts) {
    for (auto& v : row) v /= static_cast<double>(ms.size());
  }
  out.percentages = row_percentages(out.mean);
  return out;
}

/// Fixed-point rendering rounded half-up. A 1e-9 nudge absorbs binary
/// representation error (3694.2 is stored as 3694.19999...).
inline std::string format_fixed_half_up(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const bool neg = v < 0.0;
  const auto scaled = static_cast<long long>(std::floor(std::abs(v) * scale + 0.5 + 1e-9));
  const long long whole = scaled / static_cast<long long>(scale);
  const long long frac = scaled % static_cast<long long>(scale);
  std::ostringstream os;
  if (neg && scaled != 0) os << '-';
  os << whole;
  if (decimals > 0) os << '.' << std::setw(decimals) << std::setfill('0') << frac;
  return os.str();
}

inline std::string format_percent(double pct) { return format_fixed_half_up(pct, 2) + "%"; }

/// "3694.2 (99.23%)"
inline std::string format_cell(double count, double pct) {
  return format_fixed_half_up(count, 1) + " (" + format_percent(pct) + ")";
}

struct FoldPrediction {
  std::string id;
  Label gold = Label::Clean;
  Label predicted = Label::Clean;
  int fold = 0;
};

/// Score of a model fit on the whole CV portion, evaluated on the held-out part.
struct HoldoutResult {
  std::size_t size = 0;
  double macro_f1 = 0.0;
  ConfusionMatrix matrix;
};

struct CvReport {
  int report_version = 1;
  std::string model;
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;  // run configuration echo
  std::vector<std::size_t> fold_test_sizes;
  std::vector<double> fold_macro_f1;
  double mean_macro_f1 = 0.0;
  std::vector<ConfusionMatrix> fold_matrices;
  ConfusionMatrix averaged;
  RowPercentages percentages{};
  std::vector<int> fold_best_epoch;  // neural models only
  std::vector<FoldPrediction> predictions;  // corpus order
  std::vector<std::string> warnings;
  std::optional<HoldoutResult> holdout;  // set by run_holdout_then_cv only
  double runtime_seconds = 0.0;
  std::string generated_at;
};

using FoldProgress = std::function<void(int fold, double macro_f1)>;

/// Stratified k-fold: each fold is predicted by a model fit on the other k-1
/// folds, with features and vocabularies refit on that training portion only.
inline CvReport run_cross_validation(const ModelSpec& spec, const Corpus& corpus, int k, std::uint64_t seed,
                                     int parallel_folds = 1, const FoldProgress& progress = {}) {
  const auto started = std::chrono::steady_clock::now();
  const auto plan = stratified_kfold(corpus, k, seed);
  CvReport rep;
  rep.model = model_kind_name(spec.kind);
  rep.k = k;
  rep.seed = seed;
  rep.warnings = plan.notes;
  rep.fold_test_sizes.assign(static_cast<std::size_t>(k), 0);
  rep.fold_macro_f1.assign(static_cast<std::size_t>(k), 0.0);
  rep.fold_matrices.assign(static_cast<std::size_t>(k), ConfusionMatrix{});
  rep.fold_best_epoch.assign(static_cast<std::size_t>(k), 0);
  rep.predictions.resize(corpus.size());

  const auto gold = gold_labels(corpus);
  std::array<bool, kNumClasses> present{};
  for (Label l : gold) present[static_cast<std::size_t>(to_index(l))] = true;

  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(k));
  std::mutex progress_mu;
  auto run_fold = [&](int fold) {
    try {
      const auto test_idx = plan.test_indices(fold);
      const auto train_idx = plan.train_indices(fold);
      std::vector<Document> train_docs;
      train_docs.reserve(train_idx.size());
      for (auto i : train_idx) train_docs.push_back(corpus.documents[i]);
      const auto model = train_model(spec, train_docs, derive_seed(seed, 0x6376 /* "cv" */, static_cast<std::uint64_t>(fold)));
      std::vector<Label> g, p;
      for (auto i : test_idx) {
        const Label pred = model.predict(corpus.documents[i]);
        g.push_back(gold[i]);
        p.push_back(pred);
        rep.predictions[i] = {corpus.documents[i].id, gold[i], pred, fold};
      }
      const auto f = static_cast<std::size_t>(fold);
      rep.fold_test_sizes[f] = test_idx.size();
      if (!test_idx.empty()) {
        rep.fold_matrices[f] = confusion_matrix(g, p);
        rep.fold_macro_f1[f] = macro_f1(rep.fold_matrices[f]);
      }
      if (is_neural(model.kind)) rep.fold_best_epoch[f] = model.history.best_epoch;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(fold, rep.fold_macro_f1[f]);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(fold)] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min(parallel_folds, k));
  if (workers == 1) {
    for (int f = 0; f < k; ++f) run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int f = next++; f < k; f = next++) run_fold(f);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (int f = 0; f < k; ++f) {
    if (failures[static_cast<std::size_t>(f)]) {
      try {
        std::rethrow_exception(failures[static_cast<std::size_t>(f)]);
      } catch (const Error& e) {
        throw Error(e.code(), std::string("fold ") + std::to_string(f) + ": " + e.what());
      }
    }
  }

  for (int f = 0; f < k; ++f) {
    const auto& m = rep.fold_matrices[static_cast<std::size_t>(f)];
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (present[c] && m.row_sum(c) == 0.0) {
        rep.warnings.push_back("FoldTooSmall: fold " + std::to_string(f) + " has no " +
                               label_name(label_from_index(static_cast<int>(c))) + " test documents");
      }
    }
  }
  double sum = 0.0;
  for (double v : rep.fold_macro_f1) sum += v;
  rep.mean_macro_f1 = sum / static_cast<double>(k);
  const auto avg = average_matrices(rep.fold_matrices);
  rep.averaged = avg.mean;
  rep.percentages = avg.percentages;
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  rep.generated_at = buf;
  return rep;
}

/// Alternative protocol: a stratified 1/5 of the corpus is held out, k-fold
/// cross-validation runs on the remaining documents, then a model fit on all
/// of them is scored on the held-out part.
inline CvReport run_holdout_then_cv(const ModelSpec& spec, const Corpus& corpus, int k, std::uint64_t seed,
                                    int parallel_folds = 1, const FoldProgress& progress = {}) {
  constexpr int kHoldoutParts = 5;
  const auto split = stratified_kfold(corpus, kHoldoutParts, derive_seed(seed, 0x686f6c64 /* "hold" */));
  Corpus rest, held;
  rest.source = held.source = corpus.source;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (split.assignments[i] == kHoldoutParts - 1 ? held : rest).documents.push_back(corpus.documents[i]);
  }
  if (held.empty() || rest.empty()) throw Error(ErrorCode::EmptySplit, "corpus too small to hold out a part");
  const auto started = std::chrono::steady_clock::now();
  CvReport rep = run_cross_validation(spec, rest, k, seed, parallel_folds, progress);
  const auto model = train_model(spec, rest.documents, derive_seed(seed, 0x686f6c64, 1));
  std::vector<Label> pred;
  pred.reserve(held.size());
  for (const auto& d : held.documents) pred.push_back(model.predict(d));
  HoldoutResult h;
  h.size = held.size();
  h.matrix = confusion_matrix(gold_labels(held), pred);
  h.macro_f1 = macro_f1(h.matrix);
  rep.holdout = h;
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_matrix_table(const ConfusionMatrix& avg, const RowPercentages& pct) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "";
  for (int p = 0; p < kNumClasses; ++p) os << std::setw(20) << ("Predicted-" + std::to_string(p));
  os << "\n";
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    os << std::setw(10) << ("Gold-" + std::to_string(g));
    for (std::size_t p = 0; p < kNumClasses; ++p) os << std::setw(20) << format_cell(avg.counts[g][p], pct[g][p]);
    os << "\n";
  }
  os << "Note: " << kLabelLegend << "\n";
  return os.str();
}

inline std::string render_text(const CvReport& r) {
  std::ostringstream os;
  os << "Model: " << r.model << "\n";
  os << "Folds: " << r.k << "  Seed: " << r.seed << "\n";
  os << "Per-fold macro-F1:";
  for (double v : r.fold_macro_f1) os << ' ' << format_fixed_half_up(100.0 * v, 2);
  os << "\n";
  os << "Mean macro-F1: " << format_fixed_half_up(100.0 * r.mean_macro_f1, 2) << "%\n\n";
  os << "Averaged confusion matrix over " << r.k << " folds (gold rows, predicted columns)\n";
  os << render_matrix_table(r.averaged, r.percentages);
  if (r.holdout) {
    os << "\nHeld-out part (" << r.holdout->size << " documents) macro-F1: "
       << format_fixed_half_up(100.0 * r.holdout->macro_f1, 2) << "%\n";
    os << render_matrix_table(r.holdout->matrix, row_percentages(r.holdout->matrix));
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

namespace detail {

inline nlohmann::json matrix_json(const ConfusionMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : m.counts) rows.push_back(row);
  return rows;
}

inline ConfusionMatrix matrix_from_json(const nlohmann::json& j) {
  ConfusionMatrix m;
  if (!j.is_array() || j.size() != kNumClasses) throw Error(ErrorCode::VersionOrCorruption, "matrix must be 3x3");
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    if (!j[g].is_array() || j[g].size() != kNumClasses) throw Error(ErrorCode::VersionOrCorruption, "matrix must be 3x3");
    for (std::size_t p = 0; p < kNumClasses; ++p) m.counts[g][p] = j[g][p].get<double>();
  }
  return m;
}

}  // namespace detail

/// Self-describing JSON. Timing fields (`generated_at`, `runtime_seconds`) are
/// the only values that vary between identical runs; each sits on its own line.
inline nlohmann::json report_to_json(const CvReport& r) {
  using nlohmann::json;
  json j;
  j["report_version"] = r.report_version;
  j["model"] = r.model;
  j["k"] = r.k;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["label_legend"] = kLabelLegend;
  j["fold_test_sizes"] = r.fold_test_sizes;
  j["fold_macro_f1"] = r.fold_macro_f1;
  j["mean_macro_f1"] = r.mean_macro_f1;
  json fm = json::array();
  for (const auto& m : r.fold_matrices) fm.push_back(detail::matrix_json(m));
  j["fold_matrices"] = fm;
  j["averaged_matrix"] = detail::matrix_json(r.averaged);
  json pct = json::array();
  for (const auto& row : r.percentages) pct.push_back(row);
  j["row_percentages"] = pct;
  j["fold_best_epoch"] = r.fold_best_epoch;
  json preds = json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"id", p.id}, {"gold", to_index(p.gold)}, {"pred", to_index(p.predicted)}, {"fold", p.fold}});
  }
  j["predictions"] = preds;
  j["warnings"] = r.warnings;
  if (r.holdout) {
    j["holdout"] = {{"size", r.holdout->size}, {"macro_f1", r.holdout->macro_f1}, {"matrix", detail::matrix_json(r.holdout->matrix)}};
  } else {
    j["holdout"] = nullptr;
  }
  j["runtime_seconds"] = r.runtime_seconds;
  j["generated_at"] = r.generated_at;
  return j;
}

inline std::string render_structured(const CvReport& r) {
  return report_to_json(r).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

inline CvReport parse_structured(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::VersionOrCorruption, std::string("report is not valid JSON: ") + e.what());
  }
  try {
    CvReport r;
    r.report_version = j.at("report_version").get<int>();
    if (r.report_version != 1) {
      throw Error(ErrorCode::VersionOrCorruption, "unsupported report_version " + std::to_string(r.report_version));
    }
    r.model = j.at("model").get<std::string>();
    r.k = j.at("k").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.fold_test_sizes = j.at("fold_test_sizes").get<std::vector<std::size_t>>();
    r.fold_macro_f1 = j.at("fold_macro_f1").get<std::vector<double>>();
    r.mean_macro_f1 = j.at("mean_macro_f1").get<double>();
    for (const auto& m : j.at("fold_matrices")) r.fold_matrices.push_back(detail::matrix_from_json(m));
    r.averaged = detail::matrix_from_json(j.at("averaged_matrix"));
    const auto& pct = j.at("row_percentages");
    for (std::size_t g = 0; g < kNumClasses; ++g) {
      for (std::size_t p = 0; p < kNumClasses; ++p) r.percentages[g][p] = pct.at(g).at(p).get<double>();
    }
    r.fold_best_epoch = j.at("fold_best_epoch").get<std::vector<int>>();
    for (const auto& p : j.at("predictions")) {
      r.predictions.push_back({p.at("id").get<std::string>(), label_from_index(p.at("gold").get<int>()),
                               label_from_index(p.at("pred").get<int>()), p.at("fold").get<int>()});
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (const auto& h = j.at("holdout"); !h.is_null()) {
      r.holdout = HoldoutResult{h.at("size").get<std::size_t>(), h.at("macro_f1").get<double>(),
                                detail::matrix_from_json(h.at("matrix"))};
    }
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
    r.generated_at = j.at("generated_at").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::VersionOrCorruption, std::string("report field error: ") + e.what());
  }
}

enum class ReportFormat { Text, Structured };

inline std::string render_report(const CvReport& r, ReportFormat format) {
  return format == ReportFormat::Text ? render_text(r) : render_structured(r);
}

}  // namespace hatebench

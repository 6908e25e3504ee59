#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hatebench/corpus.hpp"
#include "hatebench/ensemble.hpp"
#include "hatebench/evaluation.hpp"
#include "hatebench/model_file.hpp"
#include "hatebench/pipeline.hpp"
#include "json.hpp"

// Command-line front end: stats, cv, train, predict, report, errors.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

namespace hatebench::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  std::string command;
  std::string corpus;
  std::string model = "svm";
  std::string features = "union";
  int k = 5;
  std::optional<std::uint64_t> seed;
  std::string embeddings;
  std::string stopwords;
  std::string lexicon;
  std::size_t max_len = 100;
  std::optional<int> epochs;
  bool no_class_weights = false;
  bool freeze_embeddings = false;
  int parallel_folds = 1;
  bool holdout_split = false;  // cv: hold out a stratified fifth, cross-validate on the rest
  std::string out = "out";
  std::string model_file;
  std::string input;  // report / errors: a structured cv report
  std::string format = "text";

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("HATEBENCH_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadConfig, std::string("HATEBENCH_SEED is not an integer: ") + env);
      }
    }
    return 0;
  }

  /// Verbatim echo written into every report and model file.
  std::map<std::string, std::string> echo() const {
    std::map<std::string, std::string> e{{"command", command},
                                         {"corpus", corpus},
                                         {"model", model},
                                         {"features", features},
                                         {"k", std::to_string(k)},
                                         {"seed", std::to_string(resolved_seed())},
                                         {"embeddings", embeddings},
                                         {"stopwords", stopwords},
                                         {"lexicon", lexicon},
                                         {"max_len", std::to_string(max_len)},
                                         {"epochs", epochs ? std::to_string(*epochs) : std::string("default")},
                                         {"class_weights", no_class_weights ? "off" : "on"},
                                         {"freeze_embeddings", freeze_embeddings ? "on" : "off"},
                                         {"holdout_split", holdout_split ? "on" : "off"},
                                         {"out", out}};
    return e;
  }
};

inline ModelSpec make_spec(const RunConfig& rc) {
  ModelSpec spec;
  const auto kind = parse_model_kind(rc.model);
  if (!kind) throw CLI::ValidationError("--model", "unknown model kind '" + rc.model + "'");
  spec.kind = *kind;
  spec.features = rc.features == "word" ? FeatureBlocks::Word : rc.features == "char" ? FeatureBlocks::Char : FeatureBlocks::Union;
  if (!rc.stopwords.empty()) spec.stopwords = load_stopwords(rc.stopwords);
  spec.textcnn.max_len = rc.max_len;
  spec.bigru.max_len = rc.max_len;
  if (rc.epochs) spec.train.epochs = *rc.epochs;
  spec.neural_class_weights = !rc.no_class_weights;
  spec.train.freeze_embeddings = rc.freeze_embeddings;
  if (!rc.embeddings.empty()) spec.embeddings_path = rc.embeddings;
  return spec;
}

inline Corpus load_prepared(const std::string& path) {
  Corpus c = load_corpus(path, guess_format(path));
  prepare(c);
  return c;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << content;
  if (!f) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline std::string render_stats_table(const CorpusStats& s) {
  std::ostringstream os;
  auto fmt2 = [](double v) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << v;
    return o.str();
  };
  os << std::left << std::setw(22) << "Label" << std::right << std::setw(12) << "CLEAN" << std::setw(12) << "OFFENSIVE"
     << std::setw(12) << "HATE" << std::setw(12) << "All" << "\n";
  os << std::left << std::setw(22) << "Number of comments" << std::right;
  for (const auto& r : s.per_label) os << std::setw(12) << r.count;
  os << std::setw(12) << s.overall.count << "\n";
  os << std::left << std::setw(22) << "Average word length" << std::right;
  for (const auto& r : s.per_label) os << std::setw(12) << fmt2(r.avg_len);
  os << std::setw(12) << fmt2(s.overall.avg_len) << "\n";
  os << std::left << std::setw(22) << "Token total" << std::right;
  for (const auto& r : s.per_label) os << std::setw(12) << r.token_total;
  os << std::setw(12) << s.overall.token_total << "\n";
  return os.str();
}

inline nlohmann::json stats_json(const CorpusStats& s, const RunConfig& rc) {
  auto row = [](const StatsRow& r) {
    return nlohmann::json{{"count", r.count}, {"token_total", r.token_total}, {"avg_len", r.avg_len}};
  };
  nlohmann::json j;
  j["report_version"] = 1;
  j["config"] = rc.echo();
  j["per_label"] = {{"CLEAN", row(s.per_label[0])}, {"OFFENSIVE", row(s.per_label[1])}, {"HATE", row(s.per_label[2])}};
  j["overall"] = row(s.overall);
  return j;
}

inline int cmd_stats(const RunConfig& rc, std::ostream& out) {
  const Corpus corpus = load_prepared(rc.corpus);
  const auto stats = compute_stats(corpus);
  out << corpus.size() << " documents\n";
  out << render_stats_table(stats);
  ensure_dir(rc.out);
  write_text_file((std::filesystem::path(rc.out) / "stats.json").string(), stats_json(stats, rc).dump(2) + "\n");
  return kExitOk;
}

inline std::string report_stem(const RunConfig& rc) { return (std::filesystem::path(rc.out) / ("cv_" + rc.model)).string(); }

inline int cmd_cv(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = make_spec(rc);
  const Corpus corpus = load_prepared(rc.corpus);
  const FoldProgress progress = [&](int fold, double f1) { err << "fold " << fold << " macro-F1 " << f1 << "\n"; };
  auto report = rc.holdout_split
                    ? run_holdout_then_cv(spec, corpus, rc.k, rc.resolved_seed(), rc.parallel_folds, progress)
                    : run_cross_validation(spec, corpus, rc.k, rc.resolved_seed(), rc.parallel_folds, progress);
  report.config = rc.echo();
  ensure_dir(rc.out);
  write_text_file(report_stem(rc) + ".json", render_report(report, ReportFormat::Structured));
  write_text_file(report_stem(rc) + ".txt", render_report(report, ReportFormat::Text));
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << render_text(report) << "\n";
  out << rc.model << " macro-F1: " << std::setprecision(17) << report.mean_macro_f1 << "\n";
  return kExitOk;
}

inline std::string default_model_path(const RunConfig& rc) {
  return rc.model_file.empty() ? (std::filesystem::path(rc.out) / (rc.model + ".hbm")).string() : rc.model_file;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out) {
  const ModelSpec spec = make_spec(rc);
  const Corpus corpus = load_prepared(rc.corpus);
  const auto model = train_model(spec, corpus.documents, rc.resolved_seed());
  const std::string path = default_model_path(rc);
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) ensure_dir(parent.string());
  save_model(path, model, ModelMetadata{fingerprint(corpus), rc.echo()});
  out << "trained " << rc.model << " on " << corpus.size() << " documents -> " << path << "\n";
  return kExitOk;
}

inline std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline int cmd_predict(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  ModelMetadata meta;
  const auto model = load_model(default_model_path(rc), &meta);
  const Corpus corpus = load_prepared(rc.corpus);
  if (fingerprint(corpus) != meta.corpus_fingerprint) {
    err << "warning: corpus fingerprint differs from the training corpus\n";
  }
  std::ostringstream tsv;
  tsv << "id\tpred\tlabel\tscore_clean\tscore_offensive\tscore_hate\n";
  for (const auto& d : corpus.documents) {
    const auto s = model.scores(d);
    const Label l = predict_label(s);
    tsv << detail::tsv_safe(d.id) << '\t' << to_index(l) << '\t' << label_name(l) << '\t' << format_score(s[0]) << '\t'
        << format_score(s[1]) << '\t' << format_score(s[2]) << '\n';
  }
  ensure_dir(rc.out);
  const auto path = (std::filesystem::path(rc.out) / "predictions.tsv").string();
  write_text_file(path, tsv.str());
  out << tsv.str();
  return kExitOk;
}

inline int cmd_report(const RunConfig& rc, std::ostream& out) {
  const auto report = parse_structured(detail::read_file(rc.input));
  out << render_report(report, rc.format == "structured" ? ReportFormat::Structured : ReportFormat::Text);
  return kExitOk;
}

inline int cmd_errors(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_prepared(rc.corpus);
  const Lexicon lex = rc.lexicon.empty() ? default_lexicon() : load_lexicon(rc.lexicon);
  CvReport report;
  if (!rc.input.empty()) {
    report = parse_structured(detail::read_file(rc.input));
  } else {
    report = run_cross_validation(make_spec(rc), corpus, rc.k, rc.resolved_seed(), rc.parallel_folds,
                                  [&](int fold, double f1) { err << "fold " << fold << " macro-F1 " << f1 << "\n"; });
  }
  std::map<std::string, Label> by_id;
  for (const auto& p : report.predictions) by_id.emplace(p.id, p.predicted);
  std::vector<Label> pred;
  pred.reserve(corpus.size());
  for (const auto& d : corpus.documents) {
    auto it = by_id.find(d.id);
    if (it == by_id.end()) throw Error(ErrorCode::LengthMismatch, "no prediction for document " + d.id);
    pred.push_back(it->second);
  }
  const auto rep = error_report(corpus, pred, lex);
  ensure_dir(rc.out);
  std::ostringstream rec, sum;
  write_error_records(rec, rep);
  write_error_summary(sum, rep);
  write_text_file((std::filesystem::path(rc.out) / ("errors_" + report.model + ".tsv")).string(), rec.str());
  write_text_file((std::filesystem::path(rc.out) / ("errors_" + report.model + "_summary.txt")).string(), sum.str());
  out << sum.str();
  return kExitOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Hate-speech classification experiments: TF-IDF linear models, Text-CNN and BiGRU under stratified k-fold"};
  cli.require_subcommand(1);
  RunConfig rc;
  const std::vector<std::string> models{"logreg", "svm", "textcnn", "bigru", "ensemble", "majority"};

  auto add_common = [&](CLI::App* sub, bool needs_model) {
    sub->add_option("--corpus", rc.corpus, "CSV/TSV corpus with header id,text[,label]")->required();
    sub->add_option("--seed", rc.seed, "Seed for every random choice (fallback: HATEBENCH_SEED, then 0)");
    sub->add_option("--out", rc.out, "Output directory")->capture_default_str();
    if (!needs_model) return;
    sub->add_option("--model", rc.model, "Model kind")->check(CLI::IsMember(models))->capture_default_str();
    sub->add_option("--features", rc.features, "TF-IDF blocks for linear models")
        ->check(CLI::IsMember({"word", "char", "union"}))
        ->capture_default_str();
    sub->add_option("--k", rc.k, "Number of folds")->check(CLI::Range(2, 1000))->capture_default_str();
    sub->add_option("--embeddings", rc.embeddings, "Pretrained vectors ('COUNT DIM' header, then 'token v1 .. vDIM')");
    sub->add_option("--stopwords", rc.stopwords, "Stopword file, one token per line");
    sub->add_option("--max-len", rc.max_len, "Neural input length")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--epochs", rc.epochs, "Neural training epochs (default 10)")->check(CLI::PositiveNumber);
    sub->add_flag("--no-class-weights", rc.no_class_weights, "Unweighted loss for neural models");
    sub->add_flag("--freeze-embeddings", rc.freeze_embeddings, "Keep embedding rows fixed during training");
    sub->add_option("--parallel-folds", rc.parallel_folds, "Folds trained concurrently")->check(CLI::PositiveNumber);
  };

  auto* stats = cli.add_subcommand("stats", "Corpus statistics per label");
  add_common(stats, false);
  auto* cv = cli.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_common(cv, true);
  cv->add_flag("--holdout-split", rc.holdout_split, "Hold out a stratified 20% first, cross-validate on the rest, score the held-out part");
  auto* train = cli.add_subcommand("train", "Fit on the whole corpus and save a model file");
  add_common(train, true);
  train->add_option("--model-file", rc.model_file, "Output model path (default <out>/<model>.hbm)");
  auto* predict = cli.add_subcommand("predict", "Label a corpus with a saved model");
  predict->add_option("--corpus", rc.corpus, "Corpus to label")->required();
  predict->add_option("--model-file", rc.model_file, "Model file from `train`")->required();
  predict->add_option("--out", rc.out, "Output directory")->capture_default_str();
  auto* report = cli.add_subcommand("report", "Render a structured cv report");
  report->add_option("--in", rc.input, "Structured report (JSON) from `cv`")->required();
  report->add_option("--format", rc.format, "text or structured")->check(CLI::IsMember({"text", "structured"}));
  auto* errors = cli.add_subcommand("errors", "Lexicon-based analysis of misclassified documents");
  add_common(errors, true);
  errors->add_option("--lexicon", rc.lexicon, "Lexicon file: profanity<TAB>token / pronoun<TAB>token");
  errors->add_option("--in", rc.input, "Use predictions from this structured cv report instead of running cv");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << cli.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << cli.help();
    return kExitUsage;
  }

  try {
    if (*stats) {
      rc.command = "stats";
      return cmd_stats(rc, out);
    }
    if (*cv) {
      rc.command = "cv";
      return cmd_cv(rc, out, err);
    }
    if (*train) {
      rc.command = "train";
      return cmd_train(rc, out);
    }
    if (*predict) {
      rc.command = "predict";
      return cmd_predict(rc, out, err);
    }
    if (*report) {
      rc.command = "report";
      return cmd_report(rc, out);
    }
    rc.command = "errors";
    return cmd_errors(rc, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace hatebench::app

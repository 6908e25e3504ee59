// Writes the synthetic corpora and the default lexicon used by the tests.
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hatebench/ensemble.hpp"
#include "hatebench/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic keyword corpora"};
  std::string out_dir = "data";
  hatebench::synthetic::KeywordCorpusConfig cfg;
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--size", cfg.size, "Documents in the keyword corpus")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Generator seed")->capture_default_str();
  app.add_option("--min-words", cfg.min_words, "Shortest document")->capture_default_str();
  app.add_option("--max-words", cfg.max_words, "Longest document")->capture_default_str();
  app.add_option("--clean-pronoun-rate", cfg.clean_pronoun_rate, "Share of clean documents with a pronoun")
      ->capture_default_str();
  app.add_option("--label-noise", cfg.label_noise, "Share of flipped labels")->capture_default_str();
  app.add_option("--phrase-pool", cfg.phrase_pool, "Recurring filler phrases")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  namespace syn = hatebench::synthetic;
  try {
    std::ofstream kw(out_dir + "/synthetic_keyword.csv", std::ios::binary);
    syn::write_csv(kw, syn::keyword_corpus(cfg));
    std::ofstream sep(out_dir + "/separable64.csv", std::ios::binary);
    syn::write_csv(sep, syn::separable_fixture());
    std::ofstream lex(out_dir + "/lexicon.tsv");
    const auto l = hatebench::default_lexicon();
    for (const auto& t : l.profanity) lex << "profanity\t" << t << "\n";
    for (const auto& t : l.pronouns) lex << "pronoun\t" << t << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Writes a synthetic English-like treebank in CoNLL format.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "redep/synthetic.hpp"
#include "redep/treebank.hpp"

using namespace redep;

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dependency treebank"};
  SyntheticConfig cfg;
  std::string out, format = "conllu";
  app.add_option("--sentences", cfg.sentences, "sentence count")->capture_default_str();
  app.add_option("--min-length", cfg.min_length, "shortest sentence")->capture_default_str();
  app.add_option("--max-length", cfg.max_length, "longest sentence")->capture_default_str();
  app.add_option("--noise", cfg.attachment_noise, "share of PPs attached against the rule")->capture_default_str();
  app.add_option("--pp-rate", cfg.pp_rate, "verb-phrase PP rate")->capture_default_str();
  app.add_option("--extraposition", cfg.extraposition, "non-projective relative clause rate")->capture_default_str();
  app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app.add_option("--prefix", cfg.id_prefix, "sentence id prefix")->capture_default_str();
  app.add_option("--format", format, "conllx|conllu")->capture_default_str();
  app.add_option("--out", out, "output file (default stdout)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = generate_treebank(cfg);
    const auto fmt = parse_conll_format(format);
    if (out.empty()) {
      write_conll(std::cout, corpus, fmt);
    } else {
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot write " + out);
      write_conll(f, corpus, fmt);
    }
  } catch (const std::exception& e) {
    std::cerr << "synth_treebank: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

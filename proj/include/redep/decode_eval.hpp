#pragma once

// Greedy decoding and attachment scoring.

#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "redep/model.hpp"
#include "redep/parallel.hpp"
#include "redep/transitions.hpp"
#include "redep/treebank.hpp"

namespace redep {

// A complete derivation with the policy's view of each step.
struct Trajectory {
  std::vector<int> actions;  // inventory ids
  std::vector<FeatureVector> features;
  std::vector<double> probabilities;  // of the chosen action when taken
  DepTree tree;
  double reward = 0.0;
  double log_prob = 0.0;
};

// Bound on derivation length: 4N + 8, widened for swap-standard, whose
// derivations can need a quadratic number of swaps.
inline std::size_t step_cap(SystemId sys, int n) {
  const auto base = static_cast<std::size_t>(4 * n + 8);
  return sys == SystemId::swap_standard ? base + static_cast<std::size_t>(n * n) : base;
}

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseResult {
  DepTree tree;
  Trajectory trace;
};

inline ParseResult greedy_parse(const Model& m, const Sentence& s) {
  const auto sys = m.transition_system();
  const FeatureContext ctx(m);
  const auto enc = ctx.encode(s);
  Configuration c = initial_config(s);
  ParseResult r;
  const std::size_t cap = step_cap(sys.id(), s.size());
  ForwardCache cache;
  while (!is_terminal(sys, c)) {
    if (r.trace.actions.size() >= cap)
      throw DecodeError("greedy_parse: step cap of " + std::to_string(cap) + " exceeded on sentence " + s.id);
    const auto f = ctx.features(c, enc);
    const auto mask = legal_mask(sys, c);
    forward(m, f, mask, cache);
    int best = -1;
    for (int i = 0; i < static_cast<int>(mask.size()); ++i)
      if (mask[static_cast<std::size_t>(i)] && (best < 0 || cache.probs[i] > cache.probs[best])) best = i;
    r.trace.actions.push_back(best);
    r.trace.features.push_back(f);
    r.trace.probabilities.push_back(cache.probs[best]);
    r.trace.log_prob += std::log(cache.probs[best]);
    apply_in_place(sys, c, sys.action(best));
  }
  r.tree = extract_tree(sys, c);
  r.trace.tree = r.tree;
  return r;
}

inline std::vector<DepTree> parse_corpus(const Model& m, const std::vector<Sentence>& sentences, int jobs = 1) {
  std::vector<DepTree> out(sentences.size());
  parallel_for(sentences.size(), jobs, [&](std::size_t i) { out[i] = greedy_parse(m, sentences[i]).tree; });
  return out;
}

struct SentenceScore {
  std::string id;
  int correct_heads = 0;
  int correct_labeled = 0;
  int scored_tokens = 0;
};

struct EvalReport {
  double uas = 0.0;
  double las = 0.0;
  int token_count = 0;
  std::vector<SentenceScore> per_sentence;
};

inline SentenceScore score_sentence(const Sentence& gold, const DepTree& pred, PunctConvention punct) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("evaluate: sentence " + gold.id + " has " + std::to_string(gold.size()) +
                                " gold tokens but " + std::to_string(pred.size()) + " predicted");
  SentenceScore sc;
  sc.id = gold.id;
  for (int t = 1; t <= gold.size(); ++t) {
    const Token& tok = gold.at(t);
    if (is_punctuation(tok, punct)) continue;
    ++sc.scored_tokens;
    if (pred.head(t) == tok.gold_head) {
      ++sc.correct_heads;
      if (pred.label(t) == tok.gold_label) ++sc.correct_labeled;
    }
  }
  return sc;
}

inline EvalReport evaluate(const std::vector<Sentence>& gold, const std::vector<DepTree>& predicted,
                           PunctConvention punct) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("evaluate: " + std::to_string(gold.size()) + " gold sentences but " +
                                std::to_string(predicted.size()) + " predicted");
  EvalReport r;
  long heads = 0, labeled = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    r.per_sentence.push_back(score_sentence(gold[i], predicted[i], punct));
    const auto& sc = r.per_sentence.back();
    heads += sc.correct_heads;
    labeled += sc.correct_labeled;
    r.token_count += sc.scored_tokens;
  }
  if (r.token_count > 0) {
    r.uas = 100.0 * static_cast<double>(heads) / r.token_count;
    r.las = 100.0 * static_cast<double>(labeled) / r.token_count;
  }
  return r;
}

// Gold and system files must hold the same sentences in the same order.
inline EvalReport evaluate(const std::vector<Sentence>& gold, const std::vector<Sentence>& system,
                           PunctConvention punct) {
  if (gold.size() != system.size())
    throw std::invalid_argument("evaluate: " + std::to_string(gold.size()) + " gold sentences but " +
                                std::to_string(system.size()) + " system sentences");
  std::vector<DepTree> trees;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != system[i].size())
      throw std::invalid_argument("evaluate: sentence " + std::to_string(i + 1) + " (" + gold[i].id +
                                  ") has different token counts in gold and system files");
    for (int t = 1; t <= gold[i].size(); ++t)
      if (gold[i].at(t).form != system[i].at(t).form)
        throw std::invalid_argument("evaluate: sentence " + std::to_string(i + 1) + " (" + gold[i].id +
                                    ") differs in token " + std::to_string(t));
    trees.push_back(gold_tree(system[i]));
  }
  return evaluate(gold, trees, punct);
}

inline void write_eval_summary(std::ostream& out, const EvalReport& r) {
  out << std::fixed << std::setprecision(2) << "UAS: " << r.uas << "\nLAS: " << r.las
      << "\nScored tokens: " << r.token_count << '\n';
  out.unsetf(std::ios::floatfield);
}

inline void write_eval_tsv(std::ostream& out, const EvalReport& r) {
  out << "id\tscored_tokens\tcorrect_heads\tcorrect_labeled\n";
  for (const auto& s : r.per_sentence)
    out << s.id << '\t' << s.scored_tokens << '\t' << s.correct_heads << '\t' << s.correct_labeled << '\n';
}

}  // namespace redep

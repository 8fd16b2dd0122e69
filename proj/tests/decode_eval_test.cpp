#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "redep/decode_eval.hpp"
#include "redep/training.hpp"
#include "support/fixtures.hpp"

using namespace redep;
using namespace redep::testing;

namespace {

// Erroneous fragment: "themselves" under "hit", "on" under "themselves".
DepTree waves_erroneous_tree() {
  DepTree t = gold_tree(waves_sentence());
  t.heads[3] = 2;
  t.labels[3] = "dobj";
  t.heads[4] = 4;
  t.labels[4] = "dep";
  return t;
}

}  // namespace

TEST(Decode, MemorizingModelReproducesGold) {
  const auto s = waves_sentence();
  Model m = small_model(SystemId::arc_standard, {s}, 8, 16, 1, 0.1);
  m.hyper.learning_rate = 0.05;
  SupervisedConfig cfg;
  cfg.epochs = 150;
  cfg.dropout = 0.0;
  cfg.batch_size = 4;
  train_supervised(m, {s}, cfg);
  const auto r = greedy_parse(m, s);
  EXPECT_EQ(r.tree, gold_tree(s));
  EXPECT_EQ(r.trace.actions.size(), 16u);
  EXPECT_EQ(r.trace.tree, r.tree);
}

TEST(Decode, SingleTokenAttachesToRoot) {
  const auto corpus = small_corpus(5, 2);
  Sentence one;
  one.id = "one";
  one.tokens.push_back(corpus[0].tokens[0]);
  one.tokens[0].index = 1;
  one.tokens[0].gold_head = 0;
  for (auto id : {SystemId::arc_standard, SystemId::arc_eager, SystemId::swap_standard}) {
    const Model m = small_model(id, corpus, 4, 6, 3, 0.5);
    EXPECT_EQ(greedy_parse(m, one).tree.head(1), 0) << to_string(id);
  }
}

TEST(Decode, DeterministicAndJobInvariant) {
  const auto corpus = small_corpus(30, 4);
  for (auto id : {SystemId::arc_standard, SystemId::arc_eager, SystemId::swap_standard}) {
    const Model m = small_model(id, corpus, 6, 8, 5, 0.3);
    const auto a = parse_corpus(m, corpus, 1);
    const auto b = parse_corpus(m, corpus, 4);
    EXPECT_EQ(a, b);
    for (const auto& t : a) EXPECT_TRUE(tree_violation(t.heads).empty());
  }
}

TEST(Decode, StepCap) {
  EXPECT_EQ(step_cap(SystemId::arc_standard, 10), 48u);
  EXPECT_EQ(step_cap(SystemId::swap_standard, 10), 148u);
}

TEST(Eval, ErroneousFragmentScoresSeventyFive) {
  const auto s = waves_sentence();
  const auto r = evaluate({s}, {waves_erroneous_tree()}, PunctConvention::ptb);
  EXPECT_DOUBLE_EQ(r.uas, 75.0);
  EXPECT_DOUBLE_EQ(r.las, 75.0);
  EXPECT_EQ(r.token_count, 8);
}

TEST(Eval, MatchesNaiveRecount) {
  std::mt19937 rng(6);
  const std::vector<std::string> labels{"a", "b", "c"};
  const std::vector<std::string> tags{"NN", "VB", ".", ",", "DT"};
  for (int corpus_no = 0; corpus_no < 100; ++corpus_no) {
    std::vector<Sentence> gold;
    std::vector<DepTree> pred;
    for (int i = 0, n = 1 + corpus_no % 7; i < n; ++i) {
      const int len = 1 + static_cast<int>(rng() % 10);
      auto s = sentence_from_heads(random_heads(len, rng), random_labels(len, labels, rng));
      for (auto& t : s.tokens) t.pos = tags[rng() % tags.size()];
      gold.push_back(s);
      pred.push_back(DepTree{random_heads(len, rng), random_labels(len, labels, rng)});
    }
    for (auto punct : {PunctConvention::ptb, PunctConvention::ud}) {
      const auto r = evaluate(gold, pred, punct);
      long scored = 0, heads = 0, labeled = 0;
      for (std::size_t i = 0; i < gold.size(); ++i)
        for (int t = 1; t <= gold[i].size(); ++t) {
          const auto& pos = gold[i].at(t).pos;
          if (punct == PunctConvention::ptb && (pos == "." || pos == ",")) continue;
          ++scored;
          const bool h = pred[i].head(t) == gold[i].at(t).gold_head;
          heads += h;
          labeled += h && pred[i].label(t) == gold[i].at(t).gold_label;
        }
      ASSERT_EQ(r.token_count, scored);
      if (scored > 0) {
        ASSERT_NEAR(r.uas, 100.0 * heads / scored, 1e-9);
        ASSERT_NEAR(r.las, 100.0 * labeled / scored, 1e-9);
      }
      ASSERT_LE(r.las, r.uas);
      int per_heads = 0;
      for (const auto& sc : r.per_sentence) per_heads += sc.correct_heads;
      ASSERT_EQ(per_heads, heads);
    }
  }
}

TEST(Eval, PunctuationFreeCorpusSameUnderBothConventions) {
  const auto s = waves_sentence();
  const auto t = waves_erroneous_tree();
  const auto a = evaluate({s}, {t}, PunctConvention::ptb);
  const auto b = evaluate({s}, {t}, PunctConvention::ud);
  EXPECT_EQ(a.uas, b.uas);
  EXPECT_EQ(a.las, b.las);
}

TEST(Eval, MisalignedInputRejected) {
  const auto s = waves_sentence();
  EXPECT_THROW(evaluate({s}, std::vector<DepTree>{}, PunctConvention::ptb), std::invalid_argument);
  EXPECT_THROW(evaluate({s}, {DepTree{{0}, {"root"}}}, PunctConvention::ptb), std::invalid_argument);
  Sentence other = s;
  other.tokens[2].form = "bonds";
  EXPECT_THROW(evaluate({s}, std::vector<Sentence>{other}, PunctConvention::ptb), std::invalid_argument);
  EXPECT_DOUBLE_EQ(evaluate({s}, std::vector<Sentence>{s}, PunctConvention::ptb).las, 100.0);
}

TEST(Eval, OutputFormats) {
  const auto r = evaluate({waves_sentence()}, {waves_erroneous_tree()}, PunctConvention::ptb);
  std::ostringstream summary, tsv;
  write_eval_summary(summary, r);
  EXPECT_EQ(summary.str(), "UAS: 75.00\nLAS: 75.00\nScored tokens: 8\n");
  write_eval_tsv(tsv, r);
  EXPECT_EQ(tsv.str(), "id\tscored_tokens\tcorrect_heads\tcorrect_labeled\nwaves\t8\t6\t6\n");
}

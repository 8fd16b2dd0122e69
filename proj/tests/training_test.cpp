#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "redep/training.hpp"
#include "support/fixtures.hpp"

using namespace redep;
using namespace redep::testing;

namespace {

Trajectory with_reward(double r, int tag = 0) {
  Trajectory t;
  t.reward = r;
  t.actions = {tag};
  return t;
}

std::vector<Sentence> short_sentences(const std::vector<Sentence>& corpus, int max_len) {
  std::vector<Sentence> out;
  for (const auto& s : corpus)
    if (s.size() <= max_len) out.push_back(s);
  return out;
}

}  // namespace

TEST(Reward, CountsCorrectLabeledNonPunctuation) {
  const auto s = small_corpus(1, 3)[0];
  const auto gold = gold_tree(s);
  const int scored = count_scored_tokens(s, PunctConvention::ptb);
  EXPECT_LT(scored, s.size());  // final period is punctuation
  EXPECT_DOUBLE_EQ(reward_fn(gold, s, PunctConvention::ptb), scored);
  EXPECT_DOUBLE_EQ(baseline_fn(s, PunctConvention::ptb), 0.5 * scored);
  DepTree wrong = gold;
  wrong.labels[0] = "bogus";
  EXPECT_DOUBLE_EQ(reward_fn(wrong, s, PunctConvention::ptb), scored - 1);
  EXPECT_THROW(reward_fn(DepTree{{0}, {"x"}}, s, PunctConvention::ptb), std::invalid_argument);
}

TEST(Memory, CapacityAndForgetting) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + trial % 6;
    std::vector<Trajectory> mem;
    for (int round = 0; round < 5; ++round) {
      std::vector<Trajectory> cand;
      for (int c = 0, nc = static_cast<int>(rng() % 10); c < nc; ++c) cand.push_back(with_reward(rng() % 7));
      const auto before = mem.size();
      update_memory(mem, cand, k, 0.0, rng);
      ASSERT_LE(mem.size(), static_cast<std::size_t>(k));
      ASSERT_GE(mem.size(), before);  // rho = 0 never forgets
    }
  }
  std::vector<Trajectory> mem{with_reward(1), with_reward(2)};
  update_memory(mem, {}, 2, 1.0, rng);
  EXPECT_TRUE(mem.empty());
  EXPECT_THROW(update_memory(mem, {}, 0, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(update_memory(mem, {}, 1, 1.5, rng), std::invalid_argument);
}

TEST(Memory, ReplacesMinimumOnlyWhenStrictlyBetter) {
  std::mt19937 rng(2);
  std::vector<Trajectory> mem{with_reward(3, 1), with_reward(1, 2), with_reward(5, 3)};
  update_memory(mem, {with_reward(1, 9)}, 3, 0.0, rng);  // tie with the minimum: kept out
  EXPECT_EQ(mem[1].actions, std::vector<int>{2});
  update_memory(mem, {with_reward(2, 8)}, 3, 0.0, rng);
  EXPECT_EQ(mem[1].actions, std::vector<int>{8});
  EXPECT_DOUBLE_EQ(mem[1].reward, 2);
  // below capacity: appended regardless of reward
  update_memory(mem, {with_reward(-4, 7)}, 4, 0.0, rng);
  EXPECT_EQ(mem.size(), 4u);
}

TEST(Memory, ForgettingRateMatchesRho) {
  std::mt19937 rng(3);
  long kept = 0, total = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Trajectory> mem(10, with_reward(1));
    update_memory(mem, {}, 10, 0.3, rng);
    kept += static_cast<long>(mem.size());
    total += 10;
  }
  EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(total), 0.7, 0.02);
}

TEST(Sampling, TrajectoriesAreConsistent) {
  const auto corpus = small_corpus(10, 4);
  const Model m = small_model(SystemId::arc_standard, corpus, 8, 12, 5, 0.3);
  Rng rng = make_rng(7);
  for (const auto& s : corpus) {
    const auto U = sample_trajectories(m, s, 5, rng);
    ASSERT_FALSE(U.empty());
    ASSERT_LE(U.size(), 5u);
    for (std::size_t i = 0; i < U.size(); ++i) {
      const auto& t = U[i];
      EXPECT_EQ(t.actions.size(), static_cast<std::size_t>(2 * s.size()));
      double lp = 0.0;
      for (double p : t.probabilities) lp += std::log(p);
      EXPECT_NEAR(lp, t.log_prob, 1e-9);
      EXPECT_NEAR(replay(m, s, t.actions).log_prob, t.log_prob, 1e-9);
      EXPECT_DOUBLE_EQ(t.reward, reward_fn(t.tree, s, PunctConvention::ptb));
      for (std::size_t j = 0; j < i; ++j) EXPECT_NE(t.actions, U[j].actions);
    }
  }
}

TEST(Sampling, SameSeedSameTrajectories) {
  const auto corpus = small_corpus(3, 5);
  const Model m = small_model(SystemId::arc_eager, corpus, 6, 8, 6, 0.3);
  Rng a = make_rng(11, 2, 3), b = make_rng(11, 2, 3), c = make_rng(11, 2, 4);
  const auto ua = sample_trajectories(m, corpus[0], 4, a);
  const auto ub = sample_trajectories(m, corpus[0], 4, b);
  ASSERT_EQ(ua.size(), ub.size());
  for (std::size_t i = 0; i < ua.size(); ++i) EXPECT_EQ(ua[i].actions, ub[i].actions);
  EXPECT_NE(make_rng(11, 2, 3)(), c());
}

TEST(Sampling, OracleTrajectoryIsGold) {
  const auto corpus = small_corpus(10, 6);
  for (auto id : {SystemId::arc_standard, SystemId::arc_eager, SystemId::swap_standard}) {
    const Model m = small_model(id, corpus, 4, 6, 7);
    for (const auto& s : corpus) {
      if (!oracle_derivable(id, s)) continue;
      const auto t = oracle_trajectory(m, s);
      EXPECT_EQ(t.tree, gold_tree(s));
      EXPECT_DOUBLE_EQ(t.reward, count_scored_tokens(s, PunctConvention::ptb));
    }
  }
}

TEST(Replay, RejectsIllegalOrIncompleteSequences) {
  const auto corpus = small_corpus(2, 8);
  const Model m = small_model(SystemId::arc_standard, corpus, 4, 6, 9);
  const auto& s = corpus[0];
  EXPECT_THROW(replay(m, s, {1}), std::exception);  // LEFT on <root> only
  EXPECT_THROW(replay(m, s, {0}), std::exception);  // not terminal
}

TEST(Apg, RawModeMatchesFiniteDifferences) {
  const auto corpus = short_sentences(small_corpus(50, 9, 6), 6);
  ASSERT_GE(corpus.size(), 5u);
  std::mt19937 probe_rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Model m = small_model(SystemId::arc_standard, corpus, 8, 10, 20 + trial, 0.5);
    const auto& s = corpus[static_cast<std::size_t>(trial) % corpus.size()];
    Rng rng = make_rng(trial);
    const auto U = sample_trajectories(m, s, 4, rng);
    const double b = 0.5 * s.size();
    Gradient g = Gradient::zeros_like(m);
    apg_gradient(m, s, U, b, WeightMode::raw, g);
    worst = std::max(worst, max_gradient_error(
                                m, g, [&](const Model& mm) { return apg_objective(mm, s, U, b, WeightMode::raw); },
                                probe_rng));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Apg, NormalizedModeMatchesFrozenWeightObjective) {
  const auto corpus = small_corpus(20, 11, 10);
  std::mt19937 probe_rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Model m = small_model(SystemId::arc_standard, corpus, 8, 10, 40 + trial, 0.5);
    const auto& s = corpus[static_cast<std::size_t>(trial)];
    Rng rng = make_rng(trial + 100);
    const auto U = sample_trajectories(m, s, 6, rng);
    const double b = baseline_fn(s, PunctConvention::ptb);
    const auto w = normalized_weights(m, s, U);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    Gradient g = Gradient::zeros_like(m);
    const auto st = apg_gradient(m, s, U, b, WeightMode::normalized, g);
    EXPECT_EQ(st.trajectories, static_cast<int>(U.size()));
    worst = std::max(worst, max_gradient_error(
                                m, g,
                                [&](const Model& mm) { return apg_objective(mm, s, U, b, WeightMode::normalized, w); },
                                probe_rng));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Apg, SingleTrajectoryEqualsReinforce) {
  const auto corpus = small_corpus(5, 13);
  const Model m = small_model(SystemId::arc_standard, corpus, 8, 10, 14, 0.3);
  const auto& s = corpus[1];
  const double b = baseline_fn(s, PunctConvention::ptb);
  Rng r1 = make_rng(5);
  Gradient g1 = Gradient::zeros_like(m), g2 = Gradient::zeros_like(m);
  const auto t = reinforce_gradient(m, s, r1, b, g1);
  ASSERT_TRUE(t);
  apg_gradient(m, s, {*t}, b, WeightMode::normalized, g2);
  g1.add_scaled(g2, -1.0);
  EXPECT_LT(g1.squared_norm(), 1e-20);
}

TEST(Apg, ZeroAdvantageGivesZeroGradient) {
  const auto corpus = small_corpus(5, 15);
  const Model m = small_model(SystemId::arc_standard, corpus, 8, 10, 16, 0.3);
  const auto t = oracle_trajectory(m, corpus[0]);
  Gradient g = Gradient::zeros_like(m);
  apg_gradient(m, corpus[0], {t}, t.reward, WeightMode::normalized, g);
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {Strategy::reinforce, Strategy::rl_oracle, Strategy::rl_random, Strategy::rl_memory})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("rl-beam"), std::invalid_argument);
  EXPECT_EQ(parse_weight_mode("raw"), WeightMode::raw);
  EXPECT_THROW(parse_weight_mode("softmax"), std::invalid_argument);
}

TEST(Supervised, LossDecreasesAndIsDeterministic) {
  const auto corpus = small_corpus(60, 17);
  Model a = small_model(SystemId::arc_standard, corpus, 8, 16, 18);
  Model b = a;
  a.hyper.learning_rate = b.hyper.learning_rate = 0.05;
  SupervisedConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 3;
  const auto ra = train_supervised(a, corpus, cfg);
  const auto rb = train_supervised(b, corpus, cfg);
  ASSERT_EQ(ra.epoch_loss.size(), 4u);
  EXPECT_LT(ra.epoch_loss.back(), ra.epoch_loss.front());
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(a.w1, b.w1);
}

TEST(Supervised, SkipsNonProjectiveForArcStandard) {
  auto corpus = small_corpus(10, 19);
  corpus.push_back(sentence_from_heads({3, 4, 0, 3}, {"det", "det", "root", "det"}, "np"));
  Model m = small_model(SystemId::arc_standard, corpus, 4, 6, 20);
  SupervisedConfig cfg;
  cfg.epochs = 1;
  EXPECT_EQ(train_supervised(m, corpus, cfg).skipped_sentences, 1);
  Model sw = small_model(SystemId::swap_standard, corpus, 4, 6, 20);
  EXPECT_EQ(train_supervised(sw, corpus, cfg).skipped_sentences, 0);
}

TEST(RL, ConfigValidation) {
  RLConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = RLConfig{};
  cfg.rho = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = RLConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(RL, DeterministicAcrossJobCounts) {
  const auto train = small_corpus(40, 21);
  const auto dev = small_corpus(10, 22);
  Model base = small_model(SystemId::arc_standard, train, 8, 12, 23, 0.1);
  SupervisedConfig sc;
  sc.epochs = 2;
  train_supervised(base, train, sc);
  for (auto strategy : {Strategy::reinforce, Strategy::rl_oracle, Strategy::rl_random, Strategy::rl_memory}) {
    RLConfig cfg;
    cfg.strategy = strategy;
    cfg.k = 3;
    cfg.batch_size = 10;
    cfg.updates = 4;
    cfg.eval_every = 2;
    cfg.seed = 5;
    Model one = base, three = base;
    std::ostringstream log1, log3;
    const auto r1 = train_rl(one, train, dev, cfg, &log1);
    cfg.jobs = 3;
    const auto r3 = train_rl(three, train, dev, cfg, &log3);
    EXPECT_EQ(one.w1, three.w1) << to_string(strategy);
    EXPECT_EQ(one.word_emb, three.word_emb) << to_string(strategy);
    EXPECT_EQ(log1.str(), log3.str());
    EXPECT_EQ(r1.mean_rewards, r3.mean_rewards);
    EXPECT_GE(r1.best_dev_las, 0.0);
    EXPECT_TRUE(r1.best_update == 2 || r1.best_update == 4);
  }
}

TEST(RL, LogHasOneRowPerUpdate) {
  const auto train = small_corpus(20, 24);
  const auto dev = small_corpus(5, 25);
  Model m = small_model(SystemId::arc_standard, train, 6, 8, 26, 0.1);
  RLConfig cfg;
  cfg.strategy = Strategy::rl_random;
  cfg.k = 2;
  cfg.batch_size = 4;
  cfg.updates = 5;
  cfg.eval_every = 2;
  cfg.learning_rate = 0.002;
  std::ostringstream log;
  const auto r = train_rl(m, train, dev, cfg, &log);
  EXPECT_DOUBLE_EQ(m.hyper.learning_rate, 0.002);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "update\tmean_reward\tmean_advantage\tdev_uas\tdev_las");
  int rows = 0, evaluated = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find("\t-\t-") == std::string::npos) ++evaluated;
  }
  EXPECT_EQ(rows, 5);
  EXPECT_EQ(evaluated, 3);  // updates 2, 4 and the last one
  EXPECT_EQ(r.mean_rewards.size(), 5u);
}

TEST(RL, ZeroUpdatesLeavesModelUnchanged) {
  const auto train = small_corpus(10, 27);
  Model m = small_model(SystemId::arc_standard, train, 4, 6, 28);
  const Model before = m;
  RLConfig cfg;
  cfg.updates = 0;
  const auto r = train_rl(m, train, train, cfg);
  EXPECT_EQ(m.w1, before.w1);
  EXPECT_DOUBLE_EQ(r.best_dev_las, r.initial_dev_las);
}

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "redep/error_analysis.hpp"
#include "redep/training.hpp"
#include "support/fixtures.hpp"

using namespace redep;
using namespace redep::testing;

namespace {

std::vector<Action> waves_prefix(const TransitionSystem& sys) {
  auto L = [&](const char* l) { return Action::left(sys.label_id(l)); };
  auto R = [&](const char* l) { return Action::right(sys.label_id(l)); };
  const Action S = Action::shift();
  return {S, S, L("nsubj"), S, S, R("dep"), R("dobj")};
}

std::vector<int> ids(const TransitionSystem& sys, const std::vector<Action>& actions) {
  std::vector<int> out;
  for (const auto& a : actions) out.push_back(sys.action_id(a));
  return out;
}

// Scripted policy: a preferred action at chosen configurations, otherwise the
// lowest-id zero-cost action. The preferred action gets most of the mass.
class ScriptedPolicy {
 public:
  ScriptedPolicy(const TransitionSystem& sys, const Sentence& s) : sys_(sys), oracle_(sys, gold_tree(s)), n_(s.size()) {}

  void prefer(const std::vector<Action>& prefix, const Action& a) {
    script_[key(run_actions(sys_, n_, prefix))] = sys_.action_id(a);
  }

  PolicyFn fn() const {
    return [this](const Configuration& c) {
      std::vector<double> p(static_cast<std::size_t>(sys_.num_actions()), 0.0);
      const auto mask = legal_mask(sys_, c);
      int choice;
      if (auto it = script_.find(key(c)); it != script_.end()) {
        choice = it->second;
      } else {
        const auto costs = oracle_.action_costs(c);
        choice = static_cast<int>(std::find(costs.begin(), costs.end(), 0) - costs.begin());
      }
      int legal = 0;
      for (char m : mask) legal += m;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (mask[i]) p[i] = 0.1 / legal;
      p[static_cast<std::size_t>(choice)] += 0.9;
      return p;
    };
  }

 private:
  static std::vector<int> key(const Configuration& c) {
    std::vector<int> k = c.stack;
    k.push_back(-1);
    k.insert(k.end(), c.buffer.begin(), c.buffer.end());
    k.insert(k.end(), c.heads.begin(), c.heads.end());
    k.insert(k.end(), c.labels.begin(), c.labels.end());
    return k;
  }

  const TransitionSystem& sys_;
  DynamicOracle oracle_;
  int n_;
  std::map<std::vector<int>, int> script_;
};

RepairRecord record(long arc, long dec, long fixed, const std::string& id = "r") {
  RepairRecord r;
  r.sentence_id = id;
  r.original_arc_errors = static_cast<int>(arc);
  r.original_unlabeled_errors = static_cast<int>(arc);
  r.original_decision_errors = static_cast<int>(dec);
  r.fixed_decisions = static_cast<int>(fixed);
  r.propagated_errors = static_cast<int>(std::max(0L, dec - fixed));
  r.new_errors = static_cast<int>(std::max(0L, fixed - dec));
  return r;
}

}  // namespace

TEST(DecisionErrors, OracleTraceHasNone) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  EXPECT_TRUE(detect_decision_errors(sys, s, ids(sys, static_oracle(sys, s))).empty());
}

TEST(DecisionErrors, WalkThroughWithTwoArcErrors) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  auto L = [&](const char* l) { return Action::left(sys.label_id(l)); };
  auto R = [&](const char* l) { return Action::right(sys.label_id(l)); };
  const Action S = Action::shift();
  const std::vector<Action> trace{S, S, L("nsubj"), S, R("dobj"), S, S, S, S, S,
                                  L("nn"), L("det"), R("pobj"), R("dep"), R("dep"), R("root")};
  const auto errors = detect_decision_errors(sys, s, ids(sys, trace));
  // The second error is the RIGHT(dep) at step 13, not the SHIFT at step 6.
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[0], (DecisionError{4, 1}));
  EXPECT_EQ(errors[1], (DecisionError{13, 1}));
}

TEST(DecisionErrors, SingleErrorWithThreeArcErrors) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  auto actions = waves_prefix(sys);
  for (int i = 0; i < 4; ++i) actions.push_back(Action::shift());  // on the Big Board
  actions.push_back(Action::right(sys.label_id("amod")));         // Big -> Board
  actions.push_back(Action::left(sys.label_id("det")));           // Big -> the
  actions.push_back(Action::right(sys.label_id("pobj")));         // on -> Big
  actions.push_back(Action::right(sys.label_id("prep")));
  actions.push_back(Action::right(sys.label_id("root")));
  const auto errors = detect_decision_errors(sys, s, ids(sys, actions));
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0], (DecisionError{11, 3}));
  const auto tree = extract_tree(sys, run_actions(sys, s.size(), actions));
  int wrong = 0;
  for (int t = 1; t <= s.size(); ++t) wrong += tree.head(t) != s.at(t).gold_head || tree.label(t) != s.at(t).gold_label;
  EXPECT_EQ(wrong, 3);
}

TEST(DecisionErrors, CostsSumToArcErrors) {
  const auto corpus = small_corpus(40, 1);
  const Model m = small_model(SystemId::arc_standard, corpus, 6, 8, 2, 0.3);
  for (const auto& s : corpus) {
    if (!is_projective(gold_tree(s))) continue;
    const auto r = greedy_parse(m, s);
    int total = 0;
    for (const auto& e : detect_decision_errors(m, s, r.trace)) total += e.cost;
    int wrong = 0;
    for (int t = 1; t <= s.size(); ++t)
      wrong += r.tree.head(t) != s.at(t).gold_head || r.tree.label(t) != s.at(t).gold_label;
    EXPECT_EQ(total, wrong);
  }
}

TEST(DecisionErrors, OtherSystemsRejected) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_eager, waves_labels());
  EXPECT_THROW(detect_decision_errors(sys, s, {}), std::invalid_argument);
}

TEST(Repair, GoldProducingPolicyNeedsNoFixes) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  const ScriptedPolicy policy(sys, s);
  const auto rec = repair_parse(sys, s, policy.fn());
  EXPECT_EQ(rec.original_decision_errors, 0);
  EXPECT_EQ(rec.fixed_decisions, 0);
  EXPECT_EQ(rec.propagated_errors, 0);
  EXPECT_EQ(rec.passes.size(), 1u);
}

TEST(Repair, FixingFirstErrorRemovesSecond) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  auto L = [&](const char* l) { return Action::left(sys.label_id(l)); };
  auto R = [&](const char* l) { return Action::right(sys.label_id(l)); };
  const Action S = Action::shift();
  ScriptedPolicy policy(sys, s);
  // The walk-through: premature RIGHT(dobj), later RIGHT(dep) under it.
  const std::vector<Action> trace{S, S, L("nsubj"), S, R("dobj"), S, S, S, S, S,
                                  L("nn"), L("det"), R("pobj"), R("dep"), R("dep"), R("root")};
  for (std::size_t i = 0; i < trace.size(); ++i)
    policy.prefer(std::vector<Action>(trace.begin(), trace.begin() + static_cast<long>(i)), trace[i]);
  const auto rec = repair_parse(sys, s, policy.fn());
  EXPECT_FALSE(rec.flagged);
  EXPECT_EQ(rec.original_decision_errors, 2);
  EXPECT_EQ(rec.original_arc_errors, 2);
  EXPECT_EQ(rec.fixed_decisions, 1);
  EXPECT_EQ(rec.propagated_errors, 1);
  EXPECT_EQ(rec.new_errors, 0);
  EXPECT_EQ(rec.alternative_count(), 1);
  EXPECT_EQ(rec.passes.back().loss, 0);
}

TEST(Repair, CorrectionCanInduceNewErrors) {
  const auto s = waves_sentence();
  const TransitionSystem sys(SystemId::arc_standard, waves_labels());
  const Action S = Action::shift();
  ScriptedPolicy policy(sys, s);
  // Greedy run: wrong label on waves. The forced zero-cost alternative is
  // SHIFT, after which the policy attaches stocks too early.
  policy.prefer({S, S}, Action::left(sys.label_id("amod")));
  policy.prefer({S, S, S}, Action::right(sys.label_id("dobj")));
  const auto rec = repair_parse(sys, s, policy.fn());
  EXPECT_FALSE(rec.flagged);
  EXPECT_EQ(rec.original_decision_errors, 1);
  EXPECT_EQ(rec.original_arc_errors, 1);
  EXPECT_EQ(rec.original_unlabeled_errors, 0);
  EXPECT_EQ(rec.fixed_decisions, 2);
  EXPECT_EQ(rec.new_errors, 1);
  EXPECT_EQ(rec.propagated_errors, 0);
  EXPECT_EQ(rec.alternative_count(), 0);

  const auto guarded = repair_parse(sys, s, policy.fn(), 1);
  EXPECT_TRUE(guarded.flagged);
  const auto rep = aggregate({guarded, rec});
  EXPECT_EQ(rep.flagged, 1);
  EXPECT_EQ(rep.sentences, 1);
}

TEST(Repair, RejectsNonProjectiveAndOtherSystems) {
  const auto np = sentence_from_heads({3, 4, 0, 3}, {"a", "a", "a", "a"});
  const TransitionSystem sys(SystemId::arc_standard, {"a"});
  const ScriptedPolicy policy(sys, np);
  EXPECT_THROW(repair_parse(sys, np, policy.fn()), std::invalid_argument);
  const TransitionSystem eager(SystemId::arc_eager, {"a"});
  EXPECT_THROW(repair_parse(eager, np, policy.fn()), std::invalid_argument);
}

TEST(Repair, ModelRunsTerminateWithGold) {
  auto corpus = small_corpus(60, 3);
  corpus.push_back(sentence_from_heads({3, 4, 0, 3}, {"det", "det", "root", "det"}, "np"));
  Model m = small_model(SystemId::arc_standard, corpus, 8, 16, 4, 0.1);
  SupervisedConfig cfg;
  cfg.epochs = 2;
  train_supervised(m, corpus, cfg);
  const auto a = analyze_corpus(m, corpus, 1);
  const auto b = analyze_corpus(m, corpus, 3);
  EXPECT_EQ(a.report.skipped, 1);
  EXPECT_EQ(a.report.flagged, 0);
  EXPECT_EQ(a.report.sentences, 60);
  std::ostringstream ta, tb;
  write_repair_tsv(ta, a.records);
  write_repair_tsv(tb, b.records);
  EXPECT_EQ(ta.str(), tb.str());
  for (const auto& r : a.records) {
    EXPECT_EQ(r.passes.back().loss, 0);
    EXPECT_EQ(r.propagated_errors * r.new_errors, 0);
    EXPECT_EQ(r.passes.front().decision_errors, r.original_decision_errors);
  }
  EXPECT_GT(a.report.decision_errors, 0);
  Model eager = small_model(SystemId::arc_eager, corpus, 4, 6, 5);
  EXPECT_THROW(analyze_corpus(eager, corpus), std::invalid_argument);
}

TEST(Aggregate, ReferenceTotalsArithmetic) {
  // 5177 decision errors, 1399 propagated, 7069 arc errors, 411 new
  std::vector<RepairRecord> records;
  for (int i = 0; i < 1399; ++i) records.push_back(record(2, 2, 1));
  for (int i = 0; i < 411; ++i) records.push_back(record(1, 1, 2));
  records.push_back(record(7069 - 2 * 1399 - 411, 5177 - 2 * 1399 - 411, 5177 - 2 * 1399 - 411));
  const auto r = aggregate(records);
  EXPECT_EQ(r.total_loss, 7069);
  EXPECT_EQ(r.decision_errors, 5177);
  EXPECT_EQ(r.err_prop, 1399);
  EXPECT_EQ(r.new_errors, 411);
  EXPECT_EQ(format_fixed(r.loss_per_error, 2), "1.37");
  EXPECT_EQ(format_fixed(r.err_prop_pct, 1), "27.0");
  std::ostringstream out;
  write_propagation_summary(out, r, true);
  EXPECT_NE(out.str().find("Loss/error\t1.37\n"), std::string::npos);
  EXPECT_NE(out.str().find("Err. Prop. (%)\t27.0\n"), std::string::npos);
  EXPECT_NE(out.str().find("Alternative count\t"), std::string::npos);
}

TEST(Aggregate, ZeroGuardsAndAdditivity) {
  const auto zero = aggregate({record(0, 0, 0)});
  EXPECT_EQ(zero.loss_per_error, 0.0);
  EXPECT_EQ(zero.err_prop_pct, 0.0);
  const std::vector<RepairRecord> a{record(3, 2, 1), record(1, 1, 1)}, b{record(4, 1, 3)};
  std::vector<RepairRecord> both = a;
  both.insert(both.end(), b.begin(), b.end());
  const auto ra = aggregate(a), rb = aggregate(b), rab = aggregate(both);
  EXPECT_EQ(rab.total_loss, ra.total_loss + rb.total_loss);
  EXPECT_EQ(rab.decision_errors, ra.decision_errors + rb.decision_errors);
  EXPECT_EQ(rab.err_prop, ra.err_prop + rb.err_prop);
  EXPECT_EQ(rab.new_errors, ra.new_errors + rb.new_errors);
  EXPECT_DOUBLE_EQ(rab.loss_per_error, 8.0 / 4.0);
}

TEST(Aggregate, AvoidedPropagationShare) {
  PropagationReport before, after;
  before.decision_errors = 100;
  before.err_prop = 27;
  after.decision_errors = 90;
  after.err_prop = 22;
  EXPECT_DOUBLE_EQ(*avoided_propagation_share(before, after), 50.0);
  after.decision_errors = 100;
  EXPECT_FALSE(avoided_propagation_share(before, after));
}

TEST(Aggregate, RepairTsvMarksFlaggedRows) {
  RepairRecord flagged = record(2, 2, 0, "f");
  flagged.flagged = true;
  std::ostringstream out;
  write_repair_tsv(out, {record(2, 2, 1, "ok"), flagged});
  EXPECT_EQ(out.str(),
            "id\toriginal_arc_errors\toriginal_decision_errors\tfixed_decisions\tpropagated_errors\tnew_errors\tpasses\n"
            "ok\t2\t2\t1\t1\t0\t0\n"
            "f\t2\t2\tNA\tNA\tNA\t0\n");
}

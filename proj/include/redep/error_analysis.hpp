#pragma once

// Decision errors in greedy arc-standard derivations and the repair
// procedure that measures how many of them are caused by earlier ones.

#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "redep/decode_eval.hpp"
#include "redep/dynamic_oracle.hpp"
#include "redep/model.hpp"
#include "redep/parallel.hpp"
#include "redep/transitions.hpp"
#include "redep/treebank.hpp"

namespace redep {

struct DecisionError {
  int step = 0;  // 0-based position in the derivation
  int cost = 0;  // labeled loss increase
  friend bool operator==(const DecisionError&, const DecisionError&) = default;
};

// Loss-increasing steps of an arc-standard action sequence.
inline std::vector<DecisionError> detect_decision_errors(const TransitionSystem& sys, const Sentence& gold,
                                                         const std::vector<int>& actions,
                                                         LossMode mode = LossMode::labeled) {
  if (sys.id() != SystemId::arc_standard)
    throw std::invalid_argument("decision-error detection needs an arc-standard derivation");
  const DynamicOracle oracle(sys, gold_tree(gold));
  Configuration c = initial_config(gold);
  int loss = oracle.min_loss(c, mode);
  std::vector<DecisionError> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    apply_in_place(sys, c, sys.action(actions[i]));
    const int next = oracle.min_loss(c, mode);
    if (next > loss) out.push_back({static_cast<int>(i), next - loss});
    loss = next;
  }
  return out;
}

inline std::vector<DecisionError> detect_decision_errors(const Model& m, const Sentence& gold, const Trajectory& trace) {
  return detect_decision_errors(m.transition_system(), gold, trace.actions);
}

// Probabilities over the action inventory for a configuration.
using PolicyFn = std::function<std::vector<double>(const Configuration&)>;

inline PolicyFn model_policy(const Model& m, const Sentence& s) {
  auto ctx = std::make_shared<FeatureContext>(m);
  auto enc = std::make_shared<SentenceEncoding>(ctx->encode(s));
  auto sys = std::make_shared<TransitionSystem>(m.transition_system());
  return [&m, ctx, enc, sys](const Configuration& c) {
    return forward(m, ctx->features(c, *enc), legal_mask(*sys, c)).probabilities;
  };
}

struct RepairPass {
  int corrections = 0;      // forced zero-cost substitutions
  int decision_errors = 0;  // remaining (uncorrected) loss-increasing steps
  int loss = 0;             // labeled arc errors of the produced tree
};

struct RepairRecord {
  std::string sentence_id;
  int original_arc_errors = 0;  // labeled
  int original_unlabeled_errors = 0;
  int original_decision_errors = 0;
  int fixed_decisions = 0;
  int propagated_errors = 0;
  int new_errors = 0;
  bool flagged = false;  // depth guard hit; excluded from aggregates
  std::vector<RepairPass> passes;  // pass r forces the first r corrections

  int alternative_count() const {
    int count = 0;
    for (std::size_t r = 1; r < passes.size(); ++r)
      if (passes[r - 1].decision_errors - passes[r].decision_errors >= 2) ++count;
    return count;
  }
};

// One decoding pass that replaces the model's choice by its most probable
// zero-cost action at the first `budget` loss-increasing steps.
inline RepairPass repair_pass(const TransitionSystem& sys, const DynamicOracle& oracle, int n, const PolicyFn& policy,
                              int budget, DepTree* tree_out = nullptr) {
  Configuration c = initial_config(n);
  RepairPass pass;
  int loss = oracle.min_loss(c);
  const std::size_t cap = step_cap(sys.id(), n);
  std::size_t steps = 0;
  while (!is_terminal(sys, c)) {
    if (++steps > cap) throw DecodeError("repair_pass: step cap exceeded");
    const auto probs = policy(c);
    const auto mask = legal_mask(sys, c);
    int choice = -1;
    for (int i = 0; i < static_cast<int>(mask.size()); ++i)
      if (mask[static_cast<std::size_t>(i)] &&
          (choice < 0 || probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(choice)]))
        choice = i;
    Configuration next = apply(sys, c, sys.action(choice));
    int next_loss = oracle.min_loss(next);
    if (next_loss > loss) {
      if (pass.corrections < budget) {
        const auto costs = oracle.action_costs(c);
        int fix = -1;
        for (int i = 0; i < static_cast<int>(costs.size()); ++i)
          if (costs[static_cast<std::size_t>(i)] == 0 &&
              (fix < 0 || probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(fix)]))
            fix = i;
        if (fix < 0) throw std::logic_error("repair_pass: no zero-cost action");
        next = apply(sys, c, sys.action(fix));
        next_loss = loss;
        ++pass.corrections;
      } else {
        ++pass.decision_errors;
      }
    }
    c = std::move(next);
    loss = next_loss;
  }
  pass.loss = loss;
  if (tree_out) *tree_out = extract_tree(sys, c);
  return pass;
}

// Re-parses with one more forced correction per pass until the gold tree
// comes out. max_depth <= 0 means 2N.
inline RepairRecord repair_parse(const TransitionSystem& sys, const Sentence& s, const PolicyFn& policy,
                                 int max_depth = 0) {
  if (sys.id() != SystemId::arc_standard) throw std::invalid_argument("repair_parse needs an arc-standard model");
  const DepTree gold = gold_tree(s);
  if (!is_projective(gold)) throw std::invalid_argument("repair_parse: sentence " + s.id + " is non-projective");
  if (max_depth <= 0) max_depth = 2 * s.size();
  const DynamicOracle oracle(sys, gold);
  RepairRecord rec;
  rec.sentence_id = s.id;
  DepTree greedy;
  rec.passes.push_back(repair_pass(sys, oracle, s.size(), policy, 0, &greedy));
  rec.original_decision_errors = rec.passes[0].decision_errors;
  rec.original_arc_errors = rec.passes[0].loss;
  for (int t = 1; t <= s.size(); ++t)
    if (greedy.head(t) != gold.head(t)) ++rec.original_unlabeled_errors;
  for (int r = 1; rec.passes.back().loss > 0; ++r) {
    if (r > max_depth) {
      rec.flagged = true;
      return rec;
    }
    rec.passes.push_back(repair_pass(sys, oracle, s.size(), policy, r));
  }
  rec.fixed_decisions = rec.passes.back().corrections;
  rec.propagated_errors = std::max(0, rec.original_decision_errors - rec.fixed_decisions);
  rec.new_errors = std::max(0, rec.fixed_decisions - rec.original_decision_errors);
  return rec;
}

inline RepairRecord repair_parse(const Model& m, const Sentence& s, int max_depth = 0) {
  return repair_parse(m.transition_system(), s, model_policy(m, s), max_depth);
}

struct PropagationReport {
  int sentences = 0;
  int flagged = 0;
  int skipped = 0;  // non-projective, not analysed
  long total_loss = 0;
  long total_unlabeled_loss = 0;
  long decision_errors = 0;
  long err_prop = 0;
  long new_errors = 0;
  long alternative = 0;
  double loss_per_error = 0.0;
  double err_prop_pct = 0.0;

  void finish() {
    loss_per_error = decision_errors > 0 ? static_cast<double>(total_loss) / static_cast<double>(decision_errors) : 0.0;
    err_prop_pct = decision_errors > 0 ? 100.0 * static_cast<double>(err_prop) / static_cast<double>(decision_errors) : 0.0;
  }
};

inline PropagationReport aggregate(const std::vector<RepairRecord>& records) {
  PropagationReport rep;
  for (const auto& r : records) {
    if (r.flagged) {
      ++rep.flagged;
      continue;
    }
    ++rep.sentences;
    rep.total_loss += r.original_arc_errors;
    rep.total_unlabeled_loss += r.original_unlabeled_errors;
    rep.decision_errors += r.original_decision_errors;
    rep.err_prop += r.propagated_errors;
    rep.new_errors += r.new_errors;
    rep.alternative += r.alternative_count();
  }
  rep.finish();
  return rep;
}

inline long alternative_propagation_count(const std::vector<RepairRecord>& records) {
  long total = 0;
  for (const auto& r : records)
    if (!r.flagged) total += r.alternative_count();
  return total;
}

// Share of the decision errors removed by a second model that were
// propagated errors under the first: the drop in propagated errors over the
// drop in decision errors, in percent. nullopt when no errors were removed.
inline std::optional<double> avoided_propagation_share(const PropagationReport& before, const PropagationReport& after) {
  const long removed = before.decision_errors - after.decision_errors;
  if (removed <= 0) return std::nullopt;
  return 100.0 * static_cast<double>(before.err_prop - after.err_prop) / static_cast<double>(removed);
}

struct AnalysisResult {
  std::vector<RepairRecord> records;
  PropagationReport report;
};

inline AnalysisResult analyze_corpus(const Model& m, const std::vector<Sentence>& sentences, int jobs = 1,
                                     int max_depth = 0) {
  if (m.system != SystemId::arc_standard) throw std::invalid_argument("error analysis needs an arc-standard model");
  std::vector<const Sentence*> usable;
  int skipped = 0;
  for (const auto& s : sentences) {
    if (is_projective(gold_tree(s)))
      usable.push_back(&s);
    else
      ++skipped;
  }
  AnalysisResult res;
  res.records.resize(usable.size());
  parallel_for(usable.size(), jobs, [&](std::size_t i) { res.records[i] = repair_parse(m, *usable[i], max_depth); });
  res.report = aggregate(res.records);
  res.report.skipped = skipped;
  return res;
}

inline void write_repair_tsv(std::ostream& out, const std::vector<RepairRecord>& records) {
  out << "id\toriginal_arc_errors\toriginal_decision_errors\tfixed_decisions\tpropagated_errors\tnew_errors\tpasses\n";
  for (const auto& r : records) {
    out << r.sentence_id << '\t' << r.original_arc_errors << '\t' << r.original_decision_errors << '\t';
    if (r.flagged)
      out << "NA\tNA\tNA";
    else
      out << r.fixed_decisions << '\t' << r.propagated_errors << '\t' << r.new_errors;
    out << '\t' << r.passes.size() << '\n';
  }
}

inline std::string format_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Summary rows named as in the usual decision-error overview table.
inline void write_propagation_summary(std::ostream& out, const PropagationReport& r, bool alternative = false) {
  out << "Total Loss\t" << r.total_loss << '\n'
      << "Total Loss (unlabeled)\t" << r.total_unlabeled_loss << '\n'
      << "Dec. Errors\t" << r.decision_errors << '\n'
      << "Err. Prop.\t" << r.err_prop << '\n'
      << "New errors\t" << r.new_errors << '\n'
      << "Loss/error\t" << format_fixed(r.loss_per_error, 2) << '\n'
      << "Err. Prop. (%)\t" << format_fixed(r.err_prop_pct, 1) << '\n';
  if (alternative) out << "Alternative count\t" << r.alternative << '\n';
  out << "Sentences\t" << r.sentences << '\n'
      << "Flagged\t" << r.flagged << '\n'
      << "Skipped (non-projective)\t" << r.skipped << '\n';
}

}  // namespace redep

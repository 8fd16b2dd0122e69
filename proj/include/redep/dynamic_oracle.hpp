#pragma once

// Exact arc-standard dynamic oracle: the minimal number of arc errors any
// completion of a configuration can end with.
//
// Arcs already in A are fixed. The tokens still unattached (stack items and
// the buffer) can only be joined by arcs between them, so the remaining
// problem is a best projective tree over the item sequence
//   ROOT, s_1, ..., s_m, b_1, ..., b_n
// subject to what arc-standard can still build from this stack:
//   - a constituent formed only of stack items must contain the top s_m, so a
//     stack item below the top either gets no new dependents or its first new
//     right dependent's subtree reaches s_m; a stack item with new left
//     dependents needs such a right dependent too;
//   - ROOT never becomes a dependent and takes a single dependent last.
// The table is a first-order span DP (complete/incomplete spans) with the
// head-side halves split by emptiness where those rules need it. O(K^3).

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "redep/transitions.hpp"
#include "redep/treebank.hpp"

namespace redep {

enum class LossMode { unlabeled, labeled };

class DynamicOracle {
 public:
  DynamicOracle(const TransitionSystem& sys, const DepTree& gold) : sys_(&sys), gold_heads_(gold.heads) {
    if (sys.id() != SystemId::arc_standard)
      throw std::invalid_argument("dynamic oracle is only defined for arc-standard");
    gold_labels_.reserve(gold.labels.size());
    for (const auto& l : gold.labels) gold_labels_.push_back(sys.label_id(l));
  }

  int size() const { return static_cast<int>(gold_heads_.size()); }
  int gold_head(int t) const { return gold_heads_[static_cast<std::size_t>(t - 1)]; }
  int gold_label(int t) const { return gold_labels_[static_cast<std::size_t>(t - 1)]; }

  // Errors already committed by the arcs in A.
  int fixed_errors(const Configuration& c, LossMode mode) const {
    check_arity(c);
    int errors = 0;
    for (int t = 1; t <= c.n; ++t) {
      const int h = c.head(t);
      if (h < 0) continue;
      if (h != gold_head(t) || (mode == LossMode::labeled && c.label(t) != gold_label(t))) ++errors;
    }
    return errors;
  }

  // Most gold arcs still attainable among the unattached tokens.
  int best_remaining(const Configuration& c) const;

  int min_loss(const Configuration& c, LossMode mode = LossMode::labeled) const {
    const int unattached = c.n - c.num_arcs();
    return fixed_errors(c, mode) + unattached - best_remaining(c);
  }

  int action_cost(const Configuration& c, const Action& a, LossMode mode = LossMode::labeled) const {
    const Configuration next = apply(*sys_, c, a);
    return min_loss(next, mode) - min_loss(c, mode);
  }

  // Cost of every inventory action; -1 marks illegal actions. Labeled arc
  // actions share structure, so one table per action kind suffices.
  std::vector<int> action_costs(const Configuration& c, LossMode mode = LossMode::labeled) const {
    const int base = min_loss(c, mode);
    std::vector<int> costs(static_cast<std::size_t>(sys_->num_actions()), -1);
    const auto mask = legal_mask(*sys_, c);
    if (mask[0]) costs[0] = min_loss(apply(*sys_, c, Action::shift()), mode) - base;
    for (ActionKind kind : {ActionKind::left, ActionKind::right}) {
      const int first = sys_->action_id(Action{kind, 0});
      if (!mask[static_cast<std::size_t>(first)]) continue;
      const int s1 = c.stack_at(0), s2 = c.stack_at(1);
      const int dep = kind == ActionKind::left ? s2 : s1;
      const int head = kind == ActionKind::left ? s1 : s2;
      const bool head_ok = gold_head(dep) == head;
      const int probe_label = head_ok ? gold_label(dep) : 0;
      const int probe = min_loss(apply(*sys_, c, Action{kind, std::max(probe_label, 0)}), mode) - base;
      for (int l = 0; l < sys_->num_labels(); ++l) {
        int cost = probe;
        if (mode == LossMode::labeled && head_ok && l != gold_label(dep)) cost += 1;
        costs[static_cast<std::size_t>(first + l)] = cost;
      }
    }
    return costs;
  }

  std::vector<Action> zero_cost_actions(const Configuration& c, LossMode mode = LossMode::labeled) const {
    std::vector<Action> out;
    const auto costs = action_costs(c, mode);
    for (int i = 0; i < static_cast<int>(costs.size()); ++i)
      if (costs[static_cast<std::size_t>(i)] == 0) out.push_back(sys_->action(i));
    return out;
  }

  const TransitionSystem& system() const { return *sys_; }

 private:
  void check_arity(const Configuration& c) const {
    if (c.n != size())
      throw std::invalid_argument("dynamic oracle: configuration has " + std::to_string(c.n) +
                                  " tokens but gold tree has " + std::to_string(size()));
  }

  const TransitionSystem* sys_;
  std::vector<int> gold_heads_;
  std::vector<int> gold_labels_;
};

inline int DynamicOracle::best_remaining(const Configuration& c) const {
  check_arity(c);
  std::vector<int> items(c.stack.begin(), c.stack.end());
  const int m = static_cast<int>(items.size()) - 1;
  items.insert(items.end(), c.buffer.begin(), c.buffer.end());
  const int K = static_cast<int>(items.size());
  if (K <= 1) return 0;

  std::vector<int> pos(static_cast<std::size_t>(c.n + 1), -1);
  for (int i = 0; i < K; ++i) pos[static_cast<std::size_t>(items[static_cast<std::size_t>(i)])] = i;
  std::vector<int> gold_item(static_cast<std::size_t>(K), -1);
  for (int i = 1; i < K; ++i) gold_item[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(gold_head(items[static_cast<std::size_t>(i)]))];

  constexpr int NEG = std::numeric_limits<int>::min() / 4;
  const auto idx = [K](int i, int j) { return static_cast<std::size_t>(i * K + j); };
  std::vector<int> CR(static_cast<std::size_t>(K * K), NEG), CL(CR), IR0(CR), IR1(CR), IL0(CR), IL1(CR);
  for (int i = 0; i < K; ++i) CR[idx(i, i)] = CL[idx(i, i)] = 0;

  const auto constrained = [m](int x) { return x < m; };
  const auto arc = [&](int h, int d) { return gold_item[static_cast<std::size_t>(d)] == h ? 1 : 0; };
  const auto add = [](int a, int b) { return (a <= NEG || b <= NEG) ? NEG : a + b; };

  for (int w = 1; w < K; ++w) {
    for (int i = 0; i + w < K; ++i) {
      const int j = i + w;
      // i -> j
      IR0[idx(i, j)] = add(CR[idx(i, j - 1)], arc(i, j));
      int best = NEG;
      for (int r = i; r < j - 1; ++r) best = std::max(best, add(CR[idx(i, r)], CL[idx(r + 1, j)]));
      IR1[idx(i, j)] = add(best, arc(i, j));
      // j -> i; the root symbol is never a dependent
      if (i > 0) {
        IL0[idx(i, j)] = add(CL[idx(i + 1, j)], arc(j, i));
        best = NEG;
        for (int r = i + 1; r < j; ++r) best = std::max(best, add(CR[idx(i, r)], CL[idx(r + 1, j)]));
        IL1[idx(i, j)] = add(best, arc(j, i));
      }
      // complete right span headed by i
      bool cr_allowed = !(constrained(i) && j < m);
      if (i == 0 && j < K - 1) cr_allowed = false;
      if (cr_allowed) {
        best = NEG;
        for (int k = i + 1; k <= j; ++k) {
          best = std::max(best, add(IR0[idx(i, k)], CR[idx(k, j)]));
          if (!constrained(k) || j > k) best = std::max(best, add(IR1[idx(i, k)], CR[idx(k, j)]));
        }
        CR[idx(i, j)] = best;
      }
      // complete left span headed by j
      if (i > 0) {
        best = NEG;
        for (int k = i; k < j; ++k) {
          best = std::max(best, add(CL[idx(i, k)], IL1[idx(k, j)]));
          if (!constrained(k) || i == k) best = std::max(best, add(CL[idx(i, k)], IL0[idx(k, j)]));
        }
        CL[idx(i, j)] = best;
      }
    }
  }
  const int result = CR[idx(0, K - 1)];
  if (result <= NEG) throw std::logic_error("dynamic oracle: configuration has no completion");
  return result;
}

inline int min_loss(const TransitionSystem& sys, const Configuration& c, const DepTree& gold,
                    LossMode mode = LossMode::labeled) {
  return DynamicOracle(sys, gold).min_loss(c, mode);
}

inline int action_cost(const TransitionSystem& sys, const Configuration& c, const Action& a, const DepTree& gold,
                       LossMode mode = LossMode::labeled) {
  return DynamicOracle(sys, gold).action_cost(c, a, mode);
}

inline std::vector<Action> zero_cost_actions(const TransitionSystem& sys, const Configuration& c, const DepTree& gold,
                                             LossMode mode = LossMode::labeled) {
  return DynamicOracle(sys, gold).zero_cost_actions(c, mode);
}

}  // namespace redep

#pragma once

// Parser configurations and the arc-standard, arc-eager (with UNSHIFT) and
// swap-standard transition systems.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "redep/treebank.hpp"

namespace redep {

enum class SystemId : std::uint8_t { arc_standard = 0, arc_eager = 1, swap_standard = 2 };

inline std::string_view to_string(SystemId id) {
  switch (id) {
    case SystemId::arc_standard: return "arc-standard";
    case SystemId::arc_eager: return "arc-eager";
    case SystemId::swap_standard: return "swap-standard";
  }
  return "?";
}

inline SystemId parse_system_id(std::string_view s) {
  if (s == "arc-standard") return SystemId::arc_standard;
  if (s == "arc-eager") return SystemId::arc_eager;
  if (s == "swap-standard") return SystemId::swap_standard;
  throw std::invalid_argument("unknown transition system '" + std::string(s) +
                              "' (expected arc-standard|arc-eager|swap-standard)");
}

enum class ActionKind : std::uint8_t { shift, left, right, reduce, swap, unshift };

struct Action {
  ActionKind kind = ActionKind::shift;
  int label = -1;  // index into the system's label list; only for left/right

  static Action shift() { return {ActionKind::shift, -1}; }
  static Action reduce() { return {ActionKind::reduce, -1}; }
  static Action swap() { return {ActionKind::swap, -1}; }
  static Action unshift() { return {ActionKind::unshift, -1}; }
  static Action left(int l) { return {ActionKind::left, l}; }
  static Action right(int l) { return {ActionKind::right, l}; }

  bool is_arc() const { return kind == ActionKind::left || kind == ActionKind::right; }
  friend bool operator==(const Action&, const Action&) = default;
};

class IllegalAction : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NoDerivation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransitionSystem {
 public:
  TransitionSystem(SystemId id, std::vector<std::string> labels) : id_(id), labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("transition system needs at least one label");
  }

  SystemId id() const { return id_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int num_labels() const { return static_cast<int>(labels_.size()); }

  int num_actions() const { return 2 * num_labels() + fixed_actions(); }

  int label_id(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return -1;
    return static_cast<int>(it - labels_.begin());
  }

  // Inventory layout: unlabeled actions first, then LEFT_l, then RIGHT_l.
  int action_id(const Action& a) const {
    const int L = num_labels();
    const int f = fixed_actions();
    switch (a.kind) {
      case ActionKind::shift: return 0;
      case ActionKind::reduce: return id_ == SystemId::arc_eager ? 1 : -1;
      case ActionKind::unshift: return id_ == SystemId::arc_eager ? 2 : -1;
      case ActionKind::swap: return id_ == SystemId::swap_standard ? 1 : -1;
      case ActionKind::left: return f + a.label;
      case ActionKind::right: return f + L + a.label;
    }
    return -1;
  }

  Action action(int id) const {
    const int L = num_labels();
    const int f = fixed_actions();
    if (id < 0 || id >= num_actions()) throw std::out_of_range("action id out of range");
    if (id >= f + L) return Action::right(id - f - L);
    if (id >= f) return Action::left(id - f);
    if (id == 0) return Action::shift();
    if (id_ == SystemId::arc_eager) return id == 1 ? Action::reduce() : Action::unshift();
    return Action::swap();
  }

  std::vector<Action> inventory() const {
    std::vector<Action> out;
    for (int i = 0; i < num_actions(); ++i) out.push_back(action(i));
    return out;
  }

  std::string action_name(const Action& a) const {
    switch (a.kind) {
      case ActionKind::shift: return "SHIFT";
      case ActionKind::reduce: return "REDUCE";
      case ActionKind::unshift: return "UNSHIFT";
      case ActionKind::swap: return "SWAP";
      case ActionKind::left: return "LEFT_" + labels_.at(static_cast<std::size_t>(a.label));
      case ActionKind::right: return "RIGHT_" + labels_.at(static_cast<std::size_t>(a.label));
    }
    return "?";
  }

 private:
  int fixed_actions() const {
    switch (id_) {
      case SystemId::arc_standard: return 1;
      case SystemId::arc_eager: return 3;
      case SystemId::swap_standard: return 2;
    }
    return 1;
  }

  SystemId id_;
  std::vector<std::string> labels_;
};

// <stack, buffer, arcs>. Token 0 is the root symbol.
struct Configuration {
  int n = 0;
  std::vector<int> stack;  // bottom first
  std::deque<int> buffer;  // front first
  std::vector<int> heads;  // size n+1; -1 = unattached
  std::vector<int> labels;
  std::vector<char> unshifted;   // arc-eager: token was moved back by UNSHIFT
  bool buffer_exhausted = false;  // arc-eager: buffer has been empty once

  int head(int t) const { return heads[static_cast<std::size_t>(t)]; }
  int label(int t) const { return labels[static_cast<std::size_t>(t)]; }
  int stack_size() const { return static_cast<int>(stack.size()); }
  int buffer_size() const { return static_cast<int>(buffer.size()); }
  // i-th from top (0 = top); -1 when absent.
  int stack_at(int i) const { return i < stack_size() ? stack[stack.size() - 1 - static_cast<std::size_t>(i)] : -1; }
  int buffer_at(int i) const { return i < buffer_size() ? buffer[static_cast<std::size_t>(i)] : -1; }
  int num_arcs() const {
    return static_cast<int>(std::count_if(heads.begin() + 1, heads.end(), [](int h) { return h >= 0; }));
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

inline Configuration initial_config(int n) {
  if (n <= 0) throw std::invalid_argument("initial_config: empty sentence");
  Configuration c;
  c.n = n;
  c.stack.push_back(0);
  for (int i = 1; i <= n; ++i) c.buffer.push_back(i);
  c.heads.assign(static_cast<std::size_t>(n + 1), -1);
  c.labels.assign(static_cast<std::size_t>(n + 1), -1);
  c.unshifted.assign(static_cast<std::size_t>(n + 1), 0);
  return c;
}

inline Configuration initial_config(const Sentence& s) { return initial_config(s.size()); }

// Empty string when legal, otherwise the violated rule.
inline std::string legality_violation(const TransitionSystem& sys, const Configuration& c, const Action& a) {
  if (a.is_arc() && (a.label < 0 || a.label >= sys.num_labels())) return "label id out of range";
  const int ns = c.stack_size();
  const int nb = c.buffer_size();
  switch (sys.id()) {
    case SystemId::arc_standard:
    case SystemId::swap_standard:
      switch (a.kind) {
        case ActionKind::shift:
          return nb > 0 ? "" : "SHIFT requires a non-empty buffer";
        case ActionKind::left:
          if (ns < 2) return "LEFT requires at least two stack elements";
          if (c.stack_at(1) == 0) return "LEFT cannot make the root symbol a dependent";
          return "";
        case ActionKind::right:
          if (ns < 2) return "RIGHT requires at least two stack elements";
          if (c.stack_at(1) == 0 && nb > 0) return "RIGHT from the root symbol requires an empty buffer";
          return "";
        case ActionKind::swap:
          if (sys.id() != SystemId::swap_standard) return "SWAP is not an arc-standard action";
          if (ns < 2) return "SWAP requires at least two stack elements";
          if (!(0 < c.stack_at(1) && c.stack_at(1) < c.stack_at(0)))
            return "SWAP requires 0 < s2 < s1 in surface order";
          return "";
        default:
          return std::string(to_string(sys.id())) + " has no " + sys.action_name(a) + " action";
      }
    case SystemId::arc_eager:
      switch (a.kind) {
        case ActionKind::shift:
          if (nb == 0) return "SHIFT requires a non-empty buffer";
          if (c.buffer_exhausted) return "SHIFT is disabled once the buffer has been exhausted";
          return "";
        case ActionKind::reduce:
          if (ns < 1 || c.stack_at(0) == 0) return "REDUCE requires a non-root stack top";
          if (c.head(c.stack_at(0)) < 0) return "REDUCE requires the stack top to have a head";
          return "";
        case ActionKind::unshift:
          if (nb != 0) return "UNSHIFT requires an empty buffer";
          if (ns < 1 || c.stack_at(0) == 0) return "UNSHIFT requires a non-root stack top";
          if (c.head(c.stack_at(0)) >= 0) return "UNSHIFT requires an unattached stack top";
          return "";
        case ActionKind::left:
          if (nb == 0) return "LEFT requires a non-empty buffer";
          if (ns < 1 || c.stack_at(0) == 0) return "LEFT cannot make the root symbol a dependent";
          if (c.head(c.stack_at(0)) >= 0) return "LEFT requires an unattached stack top";
          return "";
        case ActionKind::right:
          if (nb == 0) return "RIGHT requires a non-empty buffer";
          if (ns < 1) return "RIGHT requires a non-empty stack";
          return "";
        default:
          return "arc-eager has no " + sys.action_name(a) + " action";
      }
  }
  return "unknown system";
}

inline bool is_legal(const TransitionSystem& sys, const Configuration& c, const Action& a) {
  return legality_violation(sys, c, a).empty();
}

inline std::vector<Action> legal_actions(const TransitionSystem& sys, const Configuration& c) {
  std::vector<Action> out;
  for (int i = 0; i < sys.num_actions(); ++i) {
    const Action a = sys.action(i);
    if (is_legal(sys, c, a)) out.push_back(a);
  }
  return out;
}

// Legality over the whole inventory; structural checks are label-independent
// so each kind is evaluated once.
inline std::vector<char> legal_mask(const TransitionSystem& sys, const Configuration& c) {
  std::vector<char> mask(static_cast<std::size_t>(sys.num_actions()), 0);
  const bool left_ok = is_legal(sys, c, Action::left(0));
  const bool right_ok = is_legal(sys, c, Action::right(0));
  for (int i = 0; i < sys.num_actions(); ++i) {
    const Action a = sys.action(i);
    if (a.kind == ActionKind::left)
      mask[static_cast<std::size_t>(i)] = left_ok;
    else if (a.kind == ActionKind::right)
      mask[static_cast<std::size_t>(i)] = right_ok;
    else
      mask[static_cast<std::size_t>(i)] = is_legal(sys, c, a);
  }
  return mask;
}

inline bool is_terminal(const TransitionSystem& /*sys*/, const Configuration& c) {
  return c.buffer.empty() && c.stack.size() == 1;
}

inline void apply_in_place(const TransitionSystem& sys, Configuration& c, const Action& a) {
  if (auto why = legality_violation(sys, c, a); !why.empty())
    throw IllegalAction("illegal " + sys.action_name(a) + ": " + why);
  auto add_arc = [&](int h, int d) {
    c.heads[static_cast<std::size_t>(d)] = h;
    c.labels[static_cast<std::size_t>(d)] = a.label;
  };
  if (sys.id() == SystemId::arc_eager) {
    switch (a.kind) {
      case ActionKind::shift:
        c.stack.push_back(c.buffer.front());
        c.buffer.pop_front();
        break;
      case ActionKind::reduce:
        c.stack.pop_back();
        break;
      case ActionKind::unshift: {
        const int t = c.stack.back();
        c.stack.pop_back();
        c.buffer.push_front(t);
        c.unshifted[static_cast<std::size_t>(t)] = 1;
        break;
      }
      case ActionKind::left:
        add_arc(c.buffer.front(), c.stack.back());
        c.stack.pop_back();
        break;
      case ActionKind::right:
        add_arc(c.stack.back(), c.buffer.front());
        c.stack.push_back(c.buffer.front());
        c.buffer.pop_front();
        break;
      default:
        break;
    }
    if (c.buffer.empty()) c.buffer_exhausted = true;
    return;
  }
  switch (a.kind) {
    case ActionKind::shift:
      c.stack.push_back(c.buffer.front());
      c.buffer.pop_front();
      break;
    case ActionKind::left: {
      const int s1 = c.stack_at(0), s2 = c.stack_at(1);
      add_arc(s1, s2);
      c.stack.erase(c.stack.end() - 2);
      break;
    }
    case ActionKind::right: {
      const int s1 = c.stack_at(0), s2 = c.stack_at(1);
      add_arc(s2, s1);
      c.stack.pop_back();
      break;
    }
    case ActionKind::swap: {
      const int s2 = c.stack_at(1);
      c.stack.erase(c.stack.end() - 2);
      c.buffer.push_front(s2);
      break;
    }
    default:
      break;
  }
}

inline Configuration apply(const TransitionSystem& sys, const Configuration& c, const Action& a) {
  Configuration next = c;
  apply_in_place(sys, next, a);
  return next;
}

inline DepTree extract_tree(const TransitionSystem& sys, const Configuration& c) {
  if (!is_terminal(sys, c)) throw std::logic_error("extract_tree: configuration is not terminal");
  DepTree t;
  for (int i = 1; i <= c.n; ++i) {
    const int h = c.head(i);
    if (h < 0) throw std::logic_error("extract_tree: token " + std::to_string(i) + " has no head");
    t.heads.push_back(h);
    t.labels.push_back(sys.labels()[static_cast<std::size_t>(c.label(i))]);
  }
  return t;
}

// Replays an action sequence from the initial configuration.
inline Configuration run_actions(const TransitionSystem& sys, int n, const std::vector<Action>& actions) {
  Configuration c = initial_config(n);
  for (const auto& a : actions) apply_in_place(sys, c, a);
  return c;
}

namespace detail {

inline int gold_label_id(const TransitionSystem& sys, const Sentence& s, int token) {
  const int l = sys.label_id(s.at(token).gold_label);
  if (l < 0) throw NoDerivation("label '" + s.at(token).gold_label + "' of sentence " + s.id + " is not in the label set");
  return l;
}

inline std::vector<int> gold_dependent_counts(const Sentence& s) {
  std::vector<int> counts(static_cast<std::size_t>(s.size() + 1), 0);
  for (const auto& t : s.tokens) ++counts[static_cast<std::size_t>(t.gold_head)];
  return counts;
}

inline int attached_dependents(const Configuration& c, int head) {
  return static_cast<int>(std::count(c.heads.begin() + 1, c.heads.end(), head));
}

// In-order traversal position of each token in the gold tree.
inline std::vector<int> projective_order(const Sentence& s) {
  const int n = s.size();
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n + 1));
  for (const auto& t : s.tokens) children[static_cast<std::size_t>(t.gold_head)].push_back(t.index);
  std::vector<int> order(static_cast<std::size_t>(n + 1), 0);
  int next = 0;
  std::function<void(int)> visit = [&](int node) {
    const auto& kids = children[static_cast<std::size_t>(node)];
    for (int k : kids)
      if (k < node) visit(k);
    order[static_cast<std::size_t>(node)] = next++;
    for (int k : kids)
      if (k > node) visit(k);
  };
  visit(0);
  return order;
}

}  // namespace detail

inline std::vector<Action> static_oracle(const TransitionSystem& sys, const Sentence& s) {
  const int n = s.size();
  if (n == 0) throw NoDerivation("empty sentence");
  if (sys.id() != SystemId::swap_standard && !is_projective(gold_tree(s)))
    throw NoDerivation("no derivation: sentence " + s.id + " is non-projective");

  auto gold_head = [&](int t) { return s.at(t).gold_head; };
  const auto gold_deps = detail::gold_dependent_counts(s);
  auto complete = [&](const Configuration& c, int t) {
    return detail::attached_dependents(c, t) == gold_deps[static_cast<std::size_t>(t)];
  };

  std::vector<Action> out;
  Configuration c = initial_config(n);
  const std::size_t cap = static_cast<std::size_t>(4 * n * n + 8 * n + 8);
  std::vector<int> order;
  if (sys.id() == SystemId::swap_standard) order = detail::projective_order(s);

  while (!is_terminal(sys, c)) {
    if (out.size() > cap) throw NoDerivation("no derivation: oracle did not terminate for sentence " + s.id);
    Action a;
    bool chosen = false;
    if (sys.id() == SystemId::arc_eager) {
      const int top = c.stack_at(0);
      const int front = c.buffer_at(0);
      if (front >= 0 && top > 0 && gold_head(top) == front) {
        a = Action::left(detail::gold_label_id(sys, s, top));
        chosen = true;
      } else if (front >= 0 && top >= 0 && gold_head(front) == top) {
        a = Action::right(detail::gold_label_id(sys, s, front));
        chosen = true;
      } else if (front >= 0) {
        bool linked_below = false;
        for (int i = 1; i < c.stack_size(); ++i) {
          const int w = c.stack_at(i);
          if (gold_head(front) == w || (w > 0 && gold_head(w) == front)) linked_below = true;
        }
        a = linked_below ? Action::reduce() : Action::shift();
        chosen = true;
      } else {
        a = c.head(top) >= 0 ? Action::reduce() : Action::unshift();
        chosen = true;
      }
    } else if (c.stack_size() >= 2) {
      const int s1 = c.stack_at(0), s2 = c.stack_at(1);
      if (s2 != 0 && gold_head(s2) == s1 && complete(c, s2)) {
        a = Action::left(detail::gold_label_id(sys, s, s2));
        chosen = true;
      } else if (gold_head(s1) == s2 && complete(c, s1) && (s2 != 0 || c.buffer.empty())) {
        a = Action::right(detail::gold_label_id(sys, s, s1));
        chosen = true;
      } else if (sys.id() == SystemId::swap_standard && s2 != 0 &&
                 order[static_cast<std::size_t>(s1)] < order[static_cast<std::size_t>(s2)]) {
        a = Action::swap();
        chosen = true;
      }
    }
    if (!chosen) a = Action::shift();
    if (!is_legal(sys, c, a)) throw NoDerivation("no derivation for sentence " + s.id + ": " + legality_violation(sys, c, a));
    apply_in_place(sys, c, a);
    out.push_back(a);
  }
  return out;
}

}  // namespace redep

#pragma once

// Small English-like treebank generator for desk-scale experiments.
// Trees use PTB tags and Stanford-style basic labels. Prepositional phrases
// attach to the verb or the preceding noun by a lexical rule (preposition,
// object class, verb class) with a configurable share of flipped
// attachments, so that parsers face genuine ambiguity. Relative clauses on
// subjects can be extraposed, which makes the tree non-projective.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "redep/treebank.hpp"

namespace redep {

struct SyntheticConfig {
  int sentences = 500;
  int min_length = 5;
  int max_length = 30;
  double attachment_noise = 0.1;  // share of PPs attached against the rule
  double pp_rate = 0.55;          // chance of a first (and, scaled, further) verb-phrase PP
  double extraposition = 0.0;     // chance a subject relative clause moves to the end
  std::uint64_t seed = 1;
  std::string id_prefix = "syn";
};

namespace synthetic_detail {

enum class NounClass { person, instrument, place, thing };
enum class VerbClass { action, motion, perception, intransitive };

struct Word {
  const char* form;
  int cls;
};

// clang-format off
inline const std::vector<Word>& nouns() {
  static const std::vector<Word> v{
    {"man", 0}, {"woman", 0}, {"child", 0}, {"teacher", 0}, {"doctor", 0}, {"farmer", 0}, {"student", 0},
    {"driver", 0}, {"lawyer", 0}, {"painter", 0}, {"neighbor", 0}, {"officer", 0}, {"banker", 0}, {"clerk", 0},
    {"telescope", 1}, {"hammer", 1}, {"knife", 1}, {"key", 1}, {"spoon", 1}, {"pen", 1}, {"camera", 1},
    {"brush", 1}, {"rope", 1}, {"ladder", 1}, {"needle", 1}, {"shovel", 1},
    {"park", 2}, {"kitchen", 2}, {"garden", 2}, {"office", 2}, {"station", 2}, {"market", 2}, {"library", 2},
    {"river", 2}, {"city", 2}, {"village", 2}, {"harbor", 2}, {"school", 2}, {"hall", 2},
    {"book", 3}, {"letter", 3}, {"box", 3}, {"car", 3}, {"apple", 3}, {"picture", 3}, {"table", 3},
    {"report", 3}, {"bag", 3}, {"window", 3}, {"coat", 3}, {"ticket", 3}, {"map", 3}, {"lamp", 3},
    {"stock", 3}, {"bond", 3}, {"contract", 3}, {"price", 3}, {"share", 3}, {"market", 3}, {"plan", 3},
  };
  return v;
}

inline const std::vector<Word>& verbs() {
  static const std::vector<Word> v{
    {"hit", 0}, {"opened", 0}, {"cut", 0}, {"fixed", 0}, {"cleaned", 0}, {"painted", 0}, {"built", 0},
    {"wrote", 0}, {"bought", 0}, {"sold", 0}, {"took", 0}, {"held", 0},
    {"carried", 1}, {"moved", 1}, {"left", 1}, {"put", 1}, {"placed", 1}, {"dropped", 1}, {"hid", 1},
    {"saw", 2}, {"watched", 2}, {"noticed", 2}, {"found", 2}, {"heard", 2}, {"met", 2}, {"liked", 2},
    {"slept", 3}, {"arrived", 3}, {"laughed", 3}, {"waited", 3}, {"smiled", 3}, {"worked", 3},
  };
  return v;
}
// clang-format on

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v{"big",  "small", "red",   "old",    "new",   "quick", "quiet",
                                          "tall", "heavy", "green", "bright", "young", "broken", "famous",
                                          "cheap", "dark", "empty", "strange", "local", "modern"};
  return v;
}

inline const std::vector<std::string>& adverbs() {
  static const std::vector<std::string> v{"quickly", "often", "yesterday", "slowly", "carefully", "again", "today", "rarely"};
  return v;
}

struct Node {
  std::string form, pos, label;
  std::vector<int> left, right;  // children, outermost first on the left, innermost first on the right
};

class Builder {
 public:
  Builder(const SyntheticConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), rng_(rng) {}

  std::vector<Node> nodes;
  int extraposed = -1;  // relative clause node moved to the end
  int extraposed_from = -1;

  int sentence() {
    int subj_rc = -1;
    int subj = np("nsubj", true, &subj_rc);
    int verb_cls = 0;
    int v = clause_verb(&verb_cls);
    nodes[static_cast<std::size_t>(v)].label = "root";
    nodes[static_cast<std::size_t>(v)].left.push_back(subj);
    if (chance(0.15)) {
      int adv = add(pick(adverbs()), "RB", "advmod");
      int comma = add(",", ",", "punct");
      auto& l = nodes[static_cast<std::size_t>(v)].left;
      l.insert(l.begin(), comma);
      l.insert(l.begin(), adv);
    }
    if (chance(0.15)) {
      const int aux = add(pick({"will", "can", "must"}), "MD", "aux");
      nodes[static_cast<std::size_t>(v)].left.push_back(aux);
    }
    verb_phrase(v, verb_cls);
    if (chance(0.12)) {
      int cls2 = 0;
      int v2 = clause_verb(&cls2);
      nodes[static_cast<std::size_t>(v2)].label = "conj";
      verb_phrase(v2, cls2);
      attach_right(v, add(",", ",", "punct"));
      attach_right(v, add(pick({"and", "but"}), "CC", "cc"));
      attach_right(v, v2);
    }
    if (subj_rc >= 0 && chance(cfg_.extraposition)) {
      extraposed = subj_rc;
      extraposed_from = subj;
      auto& r = nodes[static_cast<std::size_t>(subj)].right;
      r.erase(std::find(r.begin(), r.end(), subj_rc));
    }
    attach_right(v, add(".", ".", "punct"));
    return v;
  }

 private:
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  // Zipf-like choice so that some words are rare.
  std::size_t zipf(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
    return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_);
  }

  std::string pick(const std::vector<std::string>& v) { return v[zipf(v.size())]; }

  int add(std::string form, std::string pos, std::string label) {
    nodes.push_back(Node{std::move(form), std::move(pos), std::move(label), {}, {}});
    return static_cast<int>(nodes.size()) - 1;
  }

  void attach_right(int head, int dep) { nodes[static_cast<std::size_t>(head)].right.push_back(dep); }

  int clause_verb(int* cls) {
    const auto& v = verbs();
    const auto& w = v[zipf(v.size())];
    *cls = w.cls;
    return add(w.form, "VBD", "");
  }

  Word noun_of(int cls) {
    std::vector<Word> pool;
    for (const auto& w : nouns())
      if (cls < 0 || w.cls == cls) pool.push_back(w);
    return pool[zipf(pool.size())];
  }

  // Noun phrase; the head noun is returned.
  int np(const std::string& label, bool allow_rc, int* rc_out = nullptr, int cls = -1, int depth = 0) {
    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    if (cls < 0 && r < 0.06) return add(pick({"he", "she", "they", "it"}), "PRP", label);
    const Word w = noun_of(cls);
    const bool plural = chance(0.25);
    const bool proper = cls < 0 && chance(0.06);
    int head = proper ? add(pick({"Smith", "Jones", "Paris", "Boston", "Mary", "John"}), "NNP", label)
                      : add(std::string(w.form) + (plural ? "s" : ""), plural ? "NNS" : "NN", label);
    std::vector<int> pre;
    if (!proper) {
      if (chance(0.12)) pre.push_back(add(std::to_string(2 + zipf(20)), "CD", "num"));
      else if (!plural || chance(0.5)) pre.push_back(add(plural ? pick({"the", "some", "these"}) : pick({"the", "a", "this", "every"}), "DT", "det"));
      int adjs = chance(0.35) ? (chance(0.3) ? 2 : 1) : 0;
      for (int i = 0; i < adjs; ++i) pre.push_back(add(pick(adjectives()), "JJ", "amod"));
      if (chance(0.08)) pre.push_back(add(noun_of(3).form, "NN", "nn"));
    }
    auto& left = nodes[static_cast<std::size_t>(head)].left;
    left.insert(left.end(), pre.begin(), pre.end());
    if (depth < 2 && chance(0.12)) {
      // "of" phrases always modify the noun
      int p = add("of", "IN", "prep");
      attach_right(p, np("pobj", false, nullptr, -1, depth + 1));
      attach_right(head, p);
    }
    if (depth < 2 && chance(0.08)) {
      attach_right(head, add(pick({"and", "or"}), "CC", "cc"));
      attach_right(head, np("conj", false, nullptr, -1, depth + 1));
    }
    if (allow_rc && depth == 0 && chance(0.14)) {
      int cls2 = 0;
      int v = clause_verb(&cls2);
      nodes[static_cast<std::size_t>(v)].label = "rcmod";
      const int rel = add(pick({"who", "that", "which"}), "WDT", "nsubj");
      nodes[static_cast<std::size_t>(v)].left.push_back(rel);
      if (cls2 != static_cast<int>(VerbClass::intransitive)) attach_right(v, np("dobj", false, nullptr, -1, 1));
      attach_right(head, v);
      if (rc_out) *rc_out = v;
    }
    return head;
  }

  // Nouns along the right edge of a subtree; each can still take a
  // right dependent without crossing arcs.
  std::vector<int> open_nouns(int n) const {
    std::vector<int> out;
    for (int cur = n; cur >= 0;) {
      const auto& nd = nodes[static_cast<std::size_t>(cur)];
      if (nd.pos.rfind("NN", 0) == 0) out.push_back(cur);
      cur = nd.right.empty() ? -1 : nd.right.back();
    }
    return out;
  }

  // Object, prepositional phrases and adverb after the verb.
  void verb_phrase(int v, int verb_cls) {
    std::vector<int> open;  // outermost first
    if (verb_cls != static_cast<int>(VerbClass::intransitive)) {
      const int obj = np("dobj", false);
      attach_right(v, obj);
      open = open_nouns(obj);
    }
    int pps = 0;
    while (pps < 4 && chance(pps == 0 ? cfg_.pp_rate : cfg_.pp_rate * 0.6)) ++pps;
    for (int i = 0; i < pps; ++i) {
      const int cls_pick[] = {1, 2, 0, 3};
      const int cls = cls_pick[zipf(4)];
      std::string prep;
      switch (cls) {
        case 1: prep = pick({"with", "with", "without"}); break;
        case 2: prep = pick({"in", "near", "at", "from", "on"}); break;
        case 0: prep = pick({"with", "for", "near"}); break;
        default: prep = pick({"with", "for", "on", "from"}); break;
      }
      bool to_verb;
      if (cls == 1) to_verb = verb_cls == 0 || verb_cls == 2;  // instruments modify actions
      else if (cls == 2) to_verb = verb_cls == 1 || verb_cls == 3;  // places modify motion and intransitives
      else to_verb = prep == "for";
      // -1 is the verb; otherwise an index into `open`
      int target = (to_verb || open.empty()) ? -1 : static_cast<int>(open.size()) - 1;
      if (!open.empty() && chance(cfg_.attachment_noise)) {
        int other = std::uniform_int_distribution<int>(-1, static_cast<int>(open.size()) - 2)(rng_);
        if (other >= target) ++other;
        target = other;
      }
      const int p = add(prep, "IN", "prep");
      const int pobj = np("pobj", false, nullptr, cls, 1);
      attach_right(p, pobj);
      if (target < 0) {
        attach_right(v, p);
        open.clear();
      } else {
        attach_right(open[static_cast<std::size_t>(target)], p);
        open.resize(static_cast<std::size_t>(target) + 1);
      }
      const auto more = open_nouns(pobj);
      open.insert(open.end(), more.begin(), more.end());
    }
    if (chance(0.12)) attach_right(v, add(pick(adverbs()), "RB", "advmod"));
  }

  std::string pick(std::initializer_list<const char*> v) {
    std::vector<std::string> s(v.begin(), v.end());
    return s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng_)];
  }

  const SyntheticConfig& cfg_;
  std::mt19937_64& rng_;
};

inline void linearize(const std::vector<Node>& nodes, int n, std::vector<int>& order) {
  for (int c : nodes[static_cast<std::size_t>(n)].left) linearize(nodes, c, order);
  order.push_back(n);
  for (int c : nodes[static_cast<std::size_t>(n)].right) linearize(nodes, c, order);
}

inline void collect_heads(const std::vector<Node>& nodes, int n, int parent, std::vector<int>& head_of) {
  head_of[static_cast<std::size_t>(n)] = parent;
  for (int c : nodes[static_cast<std::size_t>(n)].left) collect_heads(nodes, c, n, head_of);
  for (int c : nodes[static_cast<std::size_t>(n)].right) collect_heads(nodes, c, n, head_of);
}

}  // namespace synthetic_detail

inline std::vector<Sentence> generate_treebank(const SyntheticConfig& cfg) {
  using namespace synthetic_detail;
  if (cfg.sentences < 0) throw std::invalid_argument("synthetic: negative sentence count");
  if (cfg.min_length < 1 || cfg.min_length > cfg.max_length)
    throw std::invalid_argument("synthetic: need 1 <= min_length <= max_length");
  for (double p : {cfg.attachment_noise, cfg.pp_rate, cfg.extraposition})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synthetic: rates must lie in [0, 1]");
  std::mt19937_64 rng(cfg.seed);
  std::vector<Sentence> out;
  long attempts = 0;
  while (static_cast<int>(out.size()) < cfg.sentences) {
    if (++attempts > 1000L * (cfg.sentences + 1))
      throw std::invalid_argument("synthetic: length range too narrow for the grammar");
    Builder b(cfg, rng);
    const int root = b.sentence();
    std::vector<int> order;
    linearize(b.nodes, root, order);
    if (b.extraposed >= 0) {
      // relative clause goes just before the final punctuation
      std::vector<int> rc;
      linearize(b.nodes, b.extraposed, rc);
      order.insert(order.end() - 1, rc.begin(), rc.end());
    }
    const int n = static_cast<int>(order.size());
    if (n < cfg.min_length || n > cfg.max_length) continue;
    std::vector<int> head_of(b.nodes.size(), -1);
    collect_heads(b.nodes, root, -1, head_of);
    if (b.extraposed >= 0) collect_heads(b.nodes, b.extraposed, b.extraposed_from, head_of);
    std::vector<int> position(b.nodes.size(), 0);
    for (int i = 0; i < n; ++i) position[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i + 1;
    Sentence s;
    s.id = cfg.id_prefix + "-" + std::to_string(out.size() + 1);
    for (int i = 0; i < n; ++i) {
      const int node = order[static_cast<std::size_t>(i)];
      const auto& nd = b.nodes[static_cast<std::size_t>(node)];
      const int h = head_of[static_cast<std::size_t>(node)];
      s.tokens.push_back(Token{i + 1, nd.form, nd.pos, h < 0 ? 0 : position[static_cast<std::size_t>(h)], nd.label});
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace redep

#pragma once

// Vocabularies and the 48-slot stack/buffer feature templates
// (18 words, 18 POS tags, 12 arc labels).

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <unordered_map>
#include <vector>

#include "redep/transitions.hpp"
#include "redep/treebank.hpp"

namespace redep {

inline constexpr int kWordSlots = 18;
inline constexpr int kPosSlots = 18;
inline constexpr int kLabelSlots = 12;
inline constexpr int kNumFeatures = kWordSlots + kPosSlots + kLabelSlots;

using FeatureVector = std::array<int, kNumFeatures>;

class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kNull = 1;
  static constexpr int kRoot = 2;

  Vocab() : strings_{"<unk>", "<null>", "<root>"} { rebuild_index(); }

  explicit Vocab(std::vector<std::string> strings) : strings_(std::move(strings)) {
    if (strings_.size() < 3) throw std::invalid_argument("vocabulary is missing reserved entries");
    rebuild_index();
  }

  int add(const std::string& s) {
    if (auto it = index_.find(s); it != index_.end()) return it->second;
    const int id = size();
    strings_.push_back(s);
    index_.emplace(s, id);
    return id;
  }

  int id(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& s) const { return index_.count(s) != 0; }
  int size() const { return static_cast<int>(strings_.size()); }
  const std::vector<std::string>& strings() const { return strings_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.strings_ == b.strings_; }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < strings_.size(); ++i) index_.emplace(strings_[i], static_cast<int>(i));
  }

  std::vector<std::string> strings_;
  std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
  Vocab words;
  Vocab pos;
  Vocab labels;

  friend bool operator==(const Vocabularies&, const Vocabularies&) = default;
};

// Lowercased; anything made of digits and number punctuation becomes <num>.
inline std::string normalize_word(const std::string& form) {
  bool has_digit = false;
  bool numeric = !form.empty();
  std::string out;
  out.reserve(form.size());
  for (unsigned char ch : form) {
    if (std::isdigit(ch))
      has_digit = true;
    else if (ch != ',' && ch != '.' && ch != '-' && ch != '/' && ch != ':')
      numeric = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  if (numeric && has_digit) return "<num>";
  return out;
}

inline Vocabularies build_vocabularies(const std::vector<Sentence>& sentences, int min_count = 1) {
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) {
      const auto w = normalize_word(t.form);
      if (counts[w]++ == 0) order.push_back(w);
    }
  Vocabularies v;
  for (const auto& w : order)
    if (counts[w] >= min_count) v.words.add(w);
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) {
      v.pos.add(t.pos);
      v.labels.add(t.gold_label);
    }
  return v;
}

// Per-sentence word/POS ids; position 0 is the root symbol.
struct SentenceEncoding {
  std::vector<int> words;
  std::vector<int> pos;
};

inline SentenceEncoding encode_sentence(const Sentence& s, const Vocabularies& v) {
  SentenceEncoding e;
  e.words.push_back(Vocab::kRoot);
  e.pos.push_back(Vocab::kRoot);
  for (const auto& t : s.tokens) {
    e.words.push_back(v.words.id(normalize_word(t.form)));
    e.pos.push_back(v.pos.id(t.pos));
  }
  return e;
}

// System label id -> label-vocabulary id.
inline std::vector<int> label_feature_map(const TransitionSystem& sys, const Vocabularies& v) {
  std::vector<int> map;
  for (const auto& l : sys.labels()) map.push_back(v.labels.id(l));
  return map;
}

namespace detail {

// cnt-th (1-based) leftmost dependent left of k, or -1.
inline int left_child(const Configuration& c, int k, int cnt) {
  if (k < 0) return -1;
  int seen = 0;
  for (int i = 1; i < k; ++i)
    if (c.head(i) == k && ++seen == cnt) return i;
  return -1;
}

// cnt-th rightmost dependent right of k, or -1.
inline int right_child(const Configuration& c, int k, int cnt) {
  if (k < 0) return -1;
  int seen = 0;
  for (int i = c.n; i > k; --i)
    if (c.head(i) == k && ++seen == cnt) return i;
  return -1;
}

}  // namespace detail

inline FeatureVector extract_features(const Configuration& c, const SentenceEncoding& enc,
                                      const std::vector<int>& label_map) {
  FeatureVector f{};
  std::array<int, kWordSlots> tokens{};
  int t = 0;
  for (int i = 0; i < 3; ++i) tokens[static_cast<std::size_t>(t++)] = c.stack_at(i);
  for (int i = 0; i < 3; ++i) tokens[static_cast<std::size_t>(t++)] = c.buffer_at(i);
  for (int i = 0; i < 2; ++i) {
    const int k = c.stack_at(i);
    const int lc1 = detail::left_child(c, k, 1);
    const int rc1 = detail::right_child(c, k, 1);
    tokens[static_cast<std::size_t>(t++)] = lc1;
    tokens[static_cast<std::size_t>(t++)] = rc1;
    tokens[static_cast<std::size_t>(t++)] = detail::left_child(c, k, 2);
    tokens[static_cast<std::size_t>(t++)] = detail::right_child(c, k, 2);
    tokens[static_cast<std::size_t>(t++)] = detail::left_child(c, lc1, 1);
    tokens[static_cast<std::size_t>(t++)] = detail::right_child(c, rc1, 1);
  }
  for (int i = 0; i < kWordSlots; ++i) {
    const int tok = tokens[static_cast<std::size_t>(i)];
    f[static_cast<std::size_t>(i)] = tok < 0 ? Vocab::kNull : enc.words[static_cast<std::size_t>(tok)];
    f[static_cast<std::size_t>(kWordSlots + i)] = tok < 0 ? Vocab::kNull : enc.pos[static_cast<std::size_t>(tok)];
  }
  // label slots follow the 12 child positions (tokens[6..17])
  for (int i = 0; i < kLabelSlots; ++i) {
    const int tok = tokens[static_cast<std::size_t>(6 + i)];
    f[static_cast<std::size_t>(kWordSlots + kPosSlots + i)] =
        tok < 0 ? Vocab::kNull : label_map[static_cast<std::size_t>(c.label(tok))];
  }
  return f;
}

}  // namespace redep

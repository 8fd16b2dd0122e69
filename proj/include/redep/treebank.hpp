#pragma once

// CoNLL-X / CoNLL-U treebank I/O and tree predicates.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace redep {

struct Token {
  int index = 0;  // 1-based
  std::string form;
  std::string pos;
  int gold_head = 0;  // 0 = root
  std::string gold_label;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  // Token by 1-based index.
  const Token& at(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// heads[i] / labels[i] describe token i+1.
struct DepTree {
  std::vector<int> heads;
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(heads.size()); }
  int head(int token) const { return heads[static_cast<std::size_t>(token - 1)]; }
  const std::string& label(int token) const { return labels[static_cast<std::size_t>(token - 1)]; }

  friend bool operator==(const DepTree&, const DepTree&) = default;
};

enum class ConllFormat { conllx, conllu };
enum class PunctConvention { ptb, ud };

class TreebankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline DepTree gold_tree(const Sentence& s) {
  DepTree t;
  t.heads.reserve(s.tokens.size());
  t.labels.reserve(s.tokens.size());
  for (const auto& tok : s.tokens) {
    t.heads.push_back(tok.gold_head);
    t.labels.push_back(tok.gold_label);
  }
  return t;
}

inline Sentence with_tree(Sentence s, const DepTree& tree) {
  if (tree.size() != s.size()) throw TreebankError("tree/sentence arity mismatch for sentence " + s.id);
  for (int i = 1; i <= s.size(); ++i) {
    auto& tok = s.tokens[static_cast<std::size_t>(i - 1)];
    tok.gold_head = tree.head(i);
    tok.gold_label = tree.label(i);
  }
  return s;
}

// Ordered set of the tags treated as punctuation under the PTB convention.
inline const std::vector<std::string>& ptb_punctuation_tags() {
  static const std::vector<std::string> tags{"``", "''", ",", ".", ":"};
  return tags;
}

inline bool is_punctuation(const Token& token, PunctConvention convention) {
  if (convention == PunctConvention::ud) return token.pos == "PUNCT";
  const auto& tags = ptb_punctuation_tags();
  return std::find(tags.begin(), tags.end(), token.pos) != tags.end();
}

inline int count_scored_tokens(const Sentence& s, PunctConvention convention) {
  return static_cast<int>(std::count_if(s.tokens.begin(), s.tokens.end(),
                                        [&](const Token& t) { return !is_punctuation(t, convention); }));
}

inline std::string_view to_string(PunctConvention c) { return c == PunctConvention::ptb ? "ptb" : "ud"; }
inline std::string_view to_string(ConllFormat f) { return f == ConllFormat::conllx ? "conllx" : "conllu"; }

inline PunctConvention parse_punct_convention(std::string_view s) {
  if (s == "ptb") return PunctConvention::ptb;
  if (s == "ud") return PunctConvention::ud;
  throw std::invalid_argument("unknown punctuation convention '" + std::string(s) + "' (expected ptb|ud)");
}

inline ConllFormat parse_conll_format(std::string_view s) {
  if (s == "conllx") return ConllFormat::conllx;
  if (s == "conllu") return ConllFormat::conllu;
  throw std::invalid_argument("unknown treebank format '" + std::string(s) + "' (expected conllx|conllu)");
}

// Checks single-headedness and acyclicity. Returns an empty string when the
// heads form a tree rooted at 0, otherwise a short reason.
inline std::string tree_violation(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  for (int i = 1; i <= n; ++i) {
    const int h = heads[static_cast<std::size_t>(i - 1)];
    if (h < 0 || h > n) return "head out of range at token " + std::to_string(i);
    if (h == i) return "self-loop at token " + std::to_string(i);
  }
  // 0 = unvisited, 1 = on current path, 2 = reaches root
  std::vector<int> state(static_cast<std::size_t>(n + 1), 0);
  state[0] = 2;
  for (int i = 1; i <= n; ++i) {
    std::vector<int> path;
    int cur = i;
    while (state[static_cast<std::size_t>(cur)] == 0) {
      state[static_cast<std::size_t>(cur)] = 1;
      path.push_back(cur);
      cur = heads[static_cast<std::size_t>(cur - 1)];
    }
    if (state[static_cast<std::size_t>(cur)] == 1) return "cycle through token " + std::to_string(cur);
    for (int p : path) state[static_cast<std::size_t>(p)] = 2;
  }
  return {};
}

// Projective iff every token strictly inside an arc's span descends from the
// arc's head (root arcs included).
inline bool is_projective(const DepTree& tree) {
  const int n = tree.size();
  auto descends_from = [&](int node, int ancestor) {
    int guard = 0;
    while (node != 0 && guard++ <= n) {
      if (node == ancestor) return true;
      node = tree.head(node);
    }
    return ancestor == 0;
  };
  for (int d = 1; d <= n; ++d) {
    const int h = tree.head(d);
    const int lo = std::min(h, d), hi = std::max(h, d);
    for (int k = lo + 1; k < hi; ++k)
      if (!descends_from(k, h)) return false;
  }
  return true;
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline bool parse_int(const std::string& s, int& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::string trim_right(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace detail

struct LoadOptions {
  ConllFormat format = ConllFormat::conllx;
  // Multi-root sentences are skipped; a warning goes here when non-null.
  std::ostream* warnings = &std::cerr;
  // Used to build ids for sentences without a "# sent_id" comment.
  std::string id_prefix = "s";
};

inline std::vector<Sentence> read_conll(std::istream& in, const LoadOptions& opts = {}) {
  std::vector<Sentence> out;
  Sentence cur;
  int ordinal = 0;
  int line_no = 0;
  int block_start = 0;
  std::string pending_id;

  auto fail = [&](const std::string& what, int line) -> TreebankError {
    const std::string id = cur.id.empty() ? opts.id_prefix + std::to_string(ordinal + 1) : cur.id;
    return TreebankError("sentence " + id + ", line " + std::to_string(line) + ": " + what);
  };

  auto finish = [&]() {
    if (cur.tokens.empty()) {
      pending_id.clear();
      return;
    }
    ++ordinal;
    if (cur.id.empty()) cur.id = opts.id_prefix + std::to_string(ordinal);
    std::vector<int> heads;
    int roots = 0;
    for (const auto& t : cur.tokens) {
      heads.push_back(t.gold_head);
      if (t.gold_head == 0) ++roots;
    }
    if (auto why = tree_violation(heads); !why.empty()) {
      throw TreebankError("sentence " + cur.id + ", line " + std::to_string(block_start) + ": " + why);
    }
    if (roots > 1) {
      if (opts.warnings)
        *opts.warnings << "warning: sentence " << cur.id << " (line " << block_start << ") has " << roots
                       << " roots; skipped\n";
    } else {
      out.push_back(std::move(cur));
    }
    cur = Sentence{};
    pending_id.clear();
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim_right(raw);
    if (line.empty()) {
      finish();
      continue;
    }
    if (line[0] == '#') {
      if (cur.tokens.empty()) {
        static constexpr std::string_view key = "# sent_id";
        if (line.rfind(key, 0) == 0) {
          auto eq = line.find('=');
          if (eq != std::string::npos) {
            std::string id = line.substr(eq + 1);
            id.erase(0, id.find_first_not_of(' '));
            cur.id = id;
          }
        }
      }
      continue;
    }
    if (cur.tokens.empty()) block_start = line_no;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 10)
      throw fail("malformed line: expected 10 tab-separated columns, got " + std::to_string(cols.size()), line_no);
    const std::string& id_col = cols[0];
    if (id_col.find('-') != std::string::npos || id_col.find('.') != std::string::npos) continue;

    Token tok;
    if (!detail::parse_int(id_col, tok.index)) throw fail("malformed token id '" + id_col + "'", line_no);
    if (tok.index != cur.size() + 1)
      throw fail("token id " + id_col + " out of sequence (expected " + std::to_string(cur.size() + 1) + ")",
                 line_no);
    tok.form = cols[1];
    const std::string& first_pos = opts.format == ConllFormat::conllu ? cols[3] : cols[4];
    const std::string& second_pos = opts.format == ConllFormat::conllu ? cols[4] : cols[3];
    tok.pos = first_pos != "_" ? first_pos : second_pos;
    if (!detail::parse_int(cols[6], tok.gold_head)) throw fail("malformed head '" + cols[6] + "'", line_no);
    if (tok.gold_head < 0) throw fail("head out of range: " + cols[6], line_no);
    if (tok.gold_head == tok.index) throw fail("self-loop at token " + id_col, line_no);
    tok.gold_label = cols[7];
    if (tok.gold_label.empty() || tok.gold_label == "_") throw fail("missing dependency label", line_no);
    cur.tokens.push_back(std::move(tok));
  }
  finish();
  // Out-of-range heads are only detectable once the sentence length is known;
  // tree_violation reports them during finish().
  return out;
}

inline std::vector<Sentence> load_conll(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw TreebankError("cannot open treebank file: " + path);
  return read_conll(in, opts);
}

inline void write_conll(std::ostream& out, const std::vector<Sentence>& sentences, const std::vector<DepTree>& trees,
                        ConllFormat format) {
  if (sentences.size() != trees.size())
    throw TreebankError("write_conll: " + std::to_string(sentences.size()) + " sentences but " +
                        std::to_string(trees.size()) + " trees");
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = sentences[s];
    const auto& tree = trees[s];
    if (tree.size() != sent.size())
      throw TreebankError("write_conll: arity mismatch for sentence " + sent.id);
    if (format == ConllFormat::conllu) out << "# sent_id = " << sent.id << '\n';
    for (int i = 1; i <= sent.size(); ++i) {
      const auto& tok = sent.at(i);
      const std::string& cpos = format == ConllFormat::conllu ? tok.pos : std::string("_");
      const std::string& xpos = format == ConllFormat::conllu ? std::string("_") : tok.pos;
      out << i << '\t' << tok.form << "\t_\t" << cpos << '\t' << xpos << "\t_\t" << tree.head(i) << '\t'
          << tree.label(i) << "\t_\t_\n";
    }
    out << '\n';
  }
}

inline void write_conll(std::ostream& out, const std::vector<Sentence>& sentences, ConllFormat format) {
  std::vector<DepTree> trees;
  trees.reserve(sentences.size());
  for (const auto& s : sentences) trees.push_back(gold_tree(s));
  write_conll(out, sentences, trees, format);
}

inline void write_conll(const std::string& path, const std::vector<Sentence>& sentences,
                        const std::vector<DepTree>& trees, ConllFormat format) {
  std::ofstream out(path);
  if (!out) throw TreebankError("cannot write treebank file: " + path);
  write_conll(out, sentences, trees, format);
}

// Labels in order of first appearance.
inline std::vector<std::string> collect_labels(const std::vector<Sentence>& sentences) {
  std::vector<std::string> labels;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens)
      if (std::find(labels.begin(), labels.end(), t.gold_label) == labels.end()) labels.push_back(t.gold_label);
  return labels;
}

// Most frequent label on root attachments (ties: first seen).
inline std::string root_label(const std::vector<Sentence>& sentences) {
  std::vector<std::pair<std::string, int>> counts;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens)
      if (t.gold_head == 0) {
        auto it = std::find_if(counts.begin(), counts.end(), [&](auto& p) { return p.first == t.gold_label; });
        if (it == counts.end())
          counts.emplace_back(t.gold_label, 1);
        else
          ++it->second;
      }
  if (counts.empty()) return "root";
  return std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
}

}  // namespace redep

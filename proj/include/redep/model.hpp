#pragma once

// Feed-forward policy: embeddings -> cube hidden layer -> masked softmax over
// the transition inventory. Exact gradients, AdaGrad, binary model files.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "redep/features.hpp"
#include "redep/transitions.hpp"

namespace redep {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Hyper {
  int dim = 50;
  int hidden = 200;
  double learning_rate = 0.01;
  double adagrad_eps = 1e-6;
  double l2 = 1e-8;
  double init_range = 0.01;

  friend bool operator==(const Hyper&, const Hyper&) = default;
};

struct Model {
  SystemId system = SystemId::arc_standard;
  std::vector<std::string> labels;  // transition-system label list
  Vocabularies vocab;
  Hyper hyper;

  Matrix word_emb, pos_emb, label_emb;
  Matrix w1;
  Vector b1;
  Matrix w2;

  // AdaGrad squared-gradient sums, same shapes as the parameters.
  Matrix g_word_emb, g_pos_emb, g_label_emb, g_w1;
  Vector g_b1;
  Matrix g_w2;

  TransitionSystem transition_system() const { return TransitionSystem(system, labels); }
  int num_actions() const { return static_cast<int>(w2.rows()); }
  int input_size() const { return kNumFeatures * hyper.dim; }
  std::vector<int> label_map() const { return label_feature_map(transition_system(), vocab); }
};

template <class Rng>
Model make_model(SystemId system, std::vector<std::string> labels, Vocabularies vocab, const Hyper& hyper, Rng& rng) {
  Model m;
  m.system = system;
  m.labels = std::move(labels);
  m.vocab = std::move(vocab);
  m.hyper = hyper;
  const int d = hyper.dim, h = hyper.hidden;
  const int actions = TransitionSystem(system, m.labels).num_actions();
  auto uniform = [&](Matrix& mat, Eigen::Index rows, Eigen::Index cols, double range) {
    std::uniform_real_distribution<double> u(-range, range);
    mat.resize(rows, cols);
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = u(rng);
  };
  uniform(m.word_emb, m.vocab.words.size(), d, hyper.init_range);
  uniform(m.pos_emb, m.vocab.pos.size(), d, hyper.init_range);
  uniform(m.label_emb, m.vocab.labels.size(), d, hyper.init_range);
  uniform(m.w1, h, kNumFeatures * d, std::sqrt(3.0 / (kNumFeatures * d)));
  m.b1 = Vector::Zero(h);
  uniform(m.w2, actions, h, std::sqrt(3.0 / h));
  m.g_word_emb = Matrix::Zero(m.word_emb.rows(), d);
  m.g_pos_emb = Matrix::Zero(m.pos_emb.rows(), d);
  m.g_label_emb = Matrix::Zero(m.label_emb.rows(), d);
  m.g_w1 = Matrix::Zero(h, kNumFeatures * d);
  m.g_b1 = Vector::Zero(h);
  m.g_w2 = Matrix::Zero(actions, h);
  return m;
}

struct Gradient {
  Matrix word_emb, pos_emb, label_emb, w1;
  Vector b1;
  Matrix w2;
  std::vector<char> word_rows, pos_rows, label_rows;  // touched embedding rows

  static Gradient zeros_like(const Model& m) {
    Gradient g;
    g.word_emb = Matrix::Zero(m.word_emb.rows(), m.word_emb.cols());
    g.pos_emb = Matrix::Zero(m.pos_emb.rows(), m.pos_emb.cols());
    g.label_emb = Matrix::Zero(m.label_emb.rows(), m.label_emb.cols());
    g.w1 = Matrix::Zero(m.w1.rows(), m.w1.cols());
    g.b1 = Vector::Zero(m.b1.size());
    g.w2 = Matrix::Zero(m.w2.rows(), m.w2.cols());
    g.word_rows.assign(static_cast<std::size_t>(m.word_emb.rows()), 0);
    g.pos_rows.assign(static_cast<std::size_t>(m.pos_emb.rows()), 0);
    g.label_rows.assign(static_cast<std::size_t>(m.label_emb.rows()), 0);
    return g;
  }

  void set_zero() {
    auto clear_rows = [](Matrix& mat, std::vector<char>& rows) {
      for (std::size_t r = 0; r < rows.size(); ++r)
        if (rows[r]) {
          mat.row(static_cast<Eigen::Index>(r)).setZero();
          rows[r] = 0;
        }
    };
    clear_rows(word_emb, word_rows);
    clear_rows(pos_emb, pos_rows);
    clear_rows(label_emb, label_rows);
    w1.setZero();
    b1.setZero();
    w2.setZero();
  }

  void add_scaled(const Gradient& o, double s) {
    auto add_rows = [s](Matrix& dst, std::vector<char>& dst_rows, const Matrix& src, const std::vector<char>& src_rows) {
      for (std::size_t r = 0; r < src_rows.size(); ++r)
        if (src_rows[r]) {
          dst.row(static_cast<Eigen::Index>(r)) += s * src.row(static_cast<Eigen::Index>(r));
          dst_rows[r] = 1;
        }
    };
    add_rows(word_emb, word_rows, o.word_emb, o.word_rows);
    add_rows(pos_emb, pos_rows, o.pos_emb, o.pos_rows);
    add_rows(label_emb, label_rows, o.label_emb, o.label_rows);
    w1 += s * o.w1;
    b1 += s * o.b1;
    w2 += s * o.w2;
  }

  void scale(double s) {
    word_emb *= s;
    pos_emb *= s;
    label_emb *= s;
    w1 *= s;
    b1 *= s;
    w2 *= s;
  }

  double squared_norm() const {
    return word_emb.squaredNorm() + pos_emb.squaredNorm() + label_emb.squaredNorm() + w1.squaredNorm() +
           b1.squaredNorm() + w2.squaredNorm();
  }

  bool all_finite() const {
    return word_emb.allFinite() && pos_emb.allFinite() && label_emb.allFinite() && w1.allFinite() &&
           b1.allFinite() && w2.allFinite();
  }
};

// Probabilities over the whole inventory; illegal entries are exactly 0.
struct PolicyOutput {
  std::vector<double> probabilities;

  // Highest probability legal action, lowest id on ties.
  int argmax(const std::vector<char>& mask) const {
    int best = -1;
    for (int i = 0; i < static_cast<int>(probabilities.size()); ++i)
      if (mask[static_cast<std::size_t>(i)] &&
          (best < 0 || probabilities[static_cast<std::size_t>(i)] > probabilities[static_cast<std::size_t>(best)]))
        best = i;
    return best;
  }
};

struct ForwardCache {
  Vector input;
  Vector pre;     // W1 x + b1
  Vector hidden;  // cube(pre), after dropout if any
  Vector logits;
  Vector probs;
  std::vector<char> mask;
  Vector dropout_scale;  // empty when no dropout
};

namespace detail {

inline void gather_input(const Model& m, const FeatureVector& f, Vector& x) {
  const int d = m.hyper.dim;
  x.resize(kNumFeatures * d);
  for (int i = 0; i < kNumFeatures; ++i) {
    const int id = f[static_cast<std::size_t>(i)];
    const Matrix& table = i < kWordSlots ? m.word_emb : (i < kWordSlots + kPosSlots ? m.pos_emb : m.label_emb);
    x.segment(i * d, d) = table.row(id).transpose();
  }
}

inline void masked_softmax(const Vector& logits, const std::vector<char>& mask, Vector& probs) {
  probs = Vector::Zero(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) {
      probs[i] = std::exp(logits[i] - mx);
      z += probs[i];
    }
  probs /= z;
}

}  // namespace detail

inline void forward(const Model& m, const FeatureVector& f, const std::vector<char>& mask, ForwardCache& cache,
                    const Vector* dropout_scale = nullptr) {
  if (static_cast<int>(mask.size()) != m.num_actions())
    throw std::invalid_argument("forward: mask size does not match the action inventory");
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw std::invalid_argument("forward: no legal action");
  detail::gather_input(m, f, cache.input);
  cache.pre.noalias() = m.w1 * cache.input;
  cache.pre += m.b1;
  cache.hidden = cache.pre.array().cube().matrix();
  if (dropout_scale) {
    cache.dropout_scale = *dropout_scale;
    cache.hidden.array() *= dropout_scale->array();
  } else {
    cache.dropout_scale.resize(0);
  }
  cache.logits.noalias() = m.w2 * cache.hidden;
  cache.mask = mask;
  detail::masked_softmax(cache.logits, mask, cache.probs);
}

inline PolicyOutput forward(const Model& m, const FeatureVector& f, const std::vector<char>& mask) {
  ForwardCache cache;
  forward(m, f, mask, cache);
  return PolicyOutput{std::vector<double>(cache.probs.data(), cache.probs.data() + cache.probs.size())};
}

// Accumulates scale * d(L)/d(theta) into `grad`, where dlogp[a] = dL/d log p(a).
// Entries of dlogp on illegal actions must be zero.
inline void backward(const Model& m, const FeatureVector& f, const ForwardCache& cache, const Vector& dlogp,
                     Gradient& grad, double scale = 1.0) {
  const double total = dlogp.sum();
  Vector dlogits = dlogp - cache.probs * total;
  for (Eigen::Index i = 0; i < dlogits.size(); ++i)
    if (!cache.mask[static_cast<std::size_t>(i)]) dlogits[i] = 0.0;
  dlogits *= scale;
  if (dlogits.isZero(0.0)) return;

  grad.w2.noalias() += dlogits * cache.hidden.transpose();
  Vector dhidden = m.w2.transpose() * dlogits;
  if (cache.dropout_scale.size() > 0) dhidden.array() *= cache.dropout_scale.array();
  const Vector dpre = (dhidden.array() * 3.0 * cache.pre.array().square()).matrix();
  grad.b1 += dpre;
  grad.w1.noalias() += dpre * cache.input.transpose();
  const Vector dx = m.w1.transpose() * dpre;
  const int d = m.hyper.dim;
  for (int i = 0; i < kNumFeatures; ++i) {
    const int id = f[static_cast<std::size_t>(i)];
    if (i < kWordSlots) {
      grad.word_emb.row(id) += dx.segment(i * d, d).transpose();
      grad.word_rows[static_cast<std::size_t>(id)] = 1;
    } else if (i < kWordSlots + kPosSlots) {
      grad.pos_emb.row(id) += dx.segment(i * d, d).transpose();
      grad.pos_rows[static_cast<std::size_t>(id)] = 1;
    } else {
      grad.label_emb.row(id) += dx.segment(i * d, d).transpose();
      grad.label_rows[static_cast<std::size_t>(id)] = 1;
    }
  }
}

// One AdaGrad descent step on `grad` (+ l2 * theta when l2 > 0). Returns false
// and leaves the model untouched when the gradient is not finite.
inline bool adagrad_step(Model& m, const Gradient& grad, double l2 = 0.0, std::string* diagnostic = nullptr) {
  if (!grad.all_finite()) {
    if (diagnostic) *diagnostic = "adagrad_step: non-finite gradient, step rejected";
    return false;
  }
  const double lr = m.hyper.learning_rate;
  const double eps = m.hyper.adagrad_eps;
  auto step_dense = [&](auto& param, auto& acc, const auto& g) {
    auto total = (g + l2 * param).eval();
    acc.array() += total.array().square();
    param.array() -= lr * total.array() / (acc.array() + eps).sqrt();
  };
  auto step_rows = [&](Matrix& param, Matrix& acc, const Matrix& g, const std::vector<char>& rows) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r]) continue;
      const auto i = static_cast<Eigen::Index>(r);
      Eigen::RowVectorXd total = g.row(i) + l2 * param.row(i);
      acc.row(i).array() += total.array().square();
      param.row(i).array() -= lr * total.array() / (acc.row(i).array() + eps).sqrt();
    }
  };
  step_rows(m.word_emb, m.g_word_emb, grad.word_emb, grad.word_rows);
  step_rows(m.pos_emb, m.g_pos_emb, grad.pos_emb, grad.pos_rows);
  step_rows(m.label_emb, m.g_label_emb, grad.label_emb, grad.label_rows);
  step_dense(m.w1, m.g_w1, grad.w1);
  step_dense(m.b1, m.g_b1, grad.b1);
  step_dense(m.w2, m.g_w2, grad.w2);
  return true;
}

inline void reset_accumulators(Model& m) {
  m.g_word_emb.setZero();
  m.g_pos_emb.setZero();
  m.g_label_emb.setZero();
  m.g_w1.setZero();
  m.g_b1.setZero();
  m.g_w2.setZero();
}

// ---------------------------------------------------------------------------
// Model files
//
//   magic "REDEPMDL" | u32 version | u8 byte order (1 = little endian)
//   u8 system id | u32 dim | u32 hidden | f64 lr, eps, l2, init_range
//   label list, word vocab, pos vocab, label vocab (u32 count, then u32 len + bytes each)
//   12 matrices: parameters then accumulators (u64 rows, u64 cols, f64 row-major)
//
// All integers and floats little endian.

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[8] = {'R', 'E', 'D', 'E', 'P', 'M', 'D', 'L'};

namespace detail {

template <class T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <class T>
  void put(T v) {
    v = byteswap_if_needed(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_strings(const std::vector<std::string>& v) {
    put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (const auto& s : v) put_string(s);
  }
  template <class M>
  void put_matrix(const M& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(m(r, c));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError("model file " + source_ + ": " + what + " at offset " + std::to_string(offset_));
  }

  void read_bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated file while reading ") + what);
    offset_ += n;
  }

  template <class T>
  T get(const char* what) {
    T v;
    read_bytes(reinterpret_cast<char*>(&v), sizeof(T), what);
    return byteswap_if_needed(v);
  }

  std::string get_string(const char* what) {
    const auto len = get<std::uint32_t>(what);
    if (len > (1u << 20)) fail(std::string("implausible string length in ") + what);
    std::string s(len, '\0');
    read_bytes(s.data(), len, what);
    return s;
  }

  std::vector<std::string> get_strings(const char* what) {
    const auto n = get<std::uint32_t>(what);
    if (n > (1u << 26)) fail(std::string("implausible entry count in ") + what);
    std::vector<std::string> v;
    v.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(get_string(what));
    return v;
  }

  template <class M>
  void get_matrix(M& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    const std::size_t at = offset_;
    const auto r = get<std::uint64_t>(what);
    const auto c = get<std::uint64_t>(what);
    if (static_cast<Eigen::Index>(r) != rows || static_cast<Eigen::Index>(c) != cols) {
      offset_ = at;
      fail(std::string("shape mismatch for ") + what);
    }
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get<double>(what);
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t offset_ = 0;
};

}  // namespace detail

inline void write_model(std::ostream& out, const Model& m) {
  detail::Writer w(out);
  out.write(kModelMagic, sizeof(kModelMagic));
  w.put<std::uint32_t>(kModelFormatVersion);
  w.put<std::uint8_t>(1);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.system));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.hyper.dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.hyper.hidden));
  w.put<double>(m.hyper.learning_rate);
  w.put<double>(m.hyper.adagrad_eps);
  w.put<double>(m.hyper.l2);
  w.put<double>(m.hyper.init_range);
  w.put_strings(m.labels);
  w.put_strings(m.vocab.words.strings());
  w.put_strings(m.vocab.pos.strings());
  w.put_strings(m.vocab.labels.strings());
  w.put_matrix(m.word_emb);
  w.put_matrix(m.pos_emb);
  w.put_matrix(m.label_emb);
  w.put_matrix(m.w1);
  w.put_matrix(m.b1);
  w.put_matrix(m.w2);
  w.put_matrix(m.g_word_emb);
  w.put_matrix(m.g_pos_emb);
  w.put_matrix(m.g_label_emb);
  w.put_matrix(m.g_w1);
  w.put_matrix(m.g_b1);
  w.put_matrix(m.g_w2);
  if (!out) throw ModelFormatError("failed writing model");
}

inline Model read_model(std::istream& in, const std::string& source = "<stream>",
                        std::optional<SystemId> expected = std::nullopt) {
  detail::Reader r(in, source);
  char magic[sizeof(kModelMagic)];
  r.read_bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw ModelFormatError("model file " + source + ": bad magic at offset 0");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kModelFormatVersion)
    throw ModelFormatError("model file " + source + ": unsupported format version " + std::to_string(version) +
                           " at offset 8 (expected " + std::to_string(kModelFormatVersion) + ")");
  if (r.get<std::uint8_t>("byte order") != 1) r.fail("unsupported byte order marker");
  const auto sys = r.get<std::uint8_t>("system id");
  if (sys > 2) r.fail("unknown system id " + std::to_string(sys));
  Model m;
  m.system = static_cast<SystemId>(sys);
  if (expected && *expected != m.system)
    throw ModelFormatError("model file " + source + " was trained for " + std::string(to_string(m.system)) +
                           ", not " + std::string(to_string(*expected)));
  m.hyper.dim = static_cast<int>(r.get<std::uint32_t>("dim"));
  m.hyper.hidden = static_cast<int>(r.get<std::uint32_t>("hidden"));
  if (m.hyper.dim <= 0 || m.hyper.dim > 4096 || m.hyper.hidden <= 0 || m.hyper.hidden > 65536)
    r.fail("implausible layer sizes");
  m.hyper.learning_rate = r.get<double>("learning rate");
  m.hyper.adagrad_eps = r.get<double>("adagrad eps");
  m.hyper.l2 = r.get<double>("l2");
  m.hyper.init_range = r.get<double>("init range");
  m.labels = r.get_strings("label list");
  if (m.labels.empty()) r.fail("empty label list");
  try {
    m.vocab.words = Vocab(r.get_strings("word vocabulary"));
    m.vocab.pos = Vocab(r.get_strings("pos vocabulary"));
    m.vocab.labels = Vocab(r.get_strings("label vocabulary"));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  const Eigen::Index d = m.hyper.dim, h = m.hyper.hidden;
  const Eigen::Index actions = TransitionSystem(m.system, m.labels).num_actions();
  r.get_matrix(m.word_emb, m.vocab.words.size(), d, "word embeddings");
  r.get_matrix(m.pos_emb, m.vocab.pos.size(), d, "pos embeddings");
  r.get_matrix(m.label_emb, m.vocab.labels.size(), d, "label embeddings");
  r.get_matrix(m.w1, h, kNumFeatures * d, "W1");
  r.get_matrix(m.b1, h, 1, "b1");
  r.get_matrix(m.w2, actions, h, "W2");
  r.get_matrix(m.g_word_emb, m.vocab.words.size(), d, "word embedding accumulator");
  r.get_matrix(m.g_pos_emb, m.vocab.pos.size(), d, "pos embedding accumulator");
  r.get_matrix(m.g_label_emb, m.vocab.labels.size(), d, "label embedding accumulator");
  r.get_matrix(m.g_w1, h, kNumFeatures * d, "W1 accumulator");
  r.get_matrix(m.g_b1, h, 1, "b1 accumulator");
  r.get_matrix(m.g_w2, actions, h, "W2 accumulator");
  return m;
}

inline void save_model(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelFormatError("cannot write model file " + path);
  write_model(out, m);
}

inline Model load_model(const std::string& path, std::optional<SystemId> expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path);
  return read_model(in, path, expected);
}

// Encodes sentences and configurations for one model.
class FeatureContext {
 public:
  explicit FeatureContext(const Model& m) : label_map_(m.label_map()), vocab_(&m.vocab) {}

  SentenceEncoding encode(const Sentence& s) const { return encode_sentence(s, *vocab_); }
  FeatureVector features(const Configuration& c, const SentenceEncoding& e) const {
    return extract_features(c, e, label_map_);
  }

 private:
  std::vector<int> label_map_;
  const Vocabularies* vocab_;
};

}  // namespace redep

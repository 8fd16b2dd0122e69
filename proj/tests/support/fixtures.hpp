#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "redep/model.hpp"
#include "redep/synthetic.hpp"
#include "redep/training.hpp"
#include "support/random_trees.hpp"

namespace redep::testing {

// Small synthetic corpus with realistic forms, tags and labels.
inline std::vector<Sentence> small_corpus(int sentences, unsigned seed, int max_length = 12) {
  SyntheticConfig cfg;
  cfg.sentences = sentences;
  cfg.max_length = max_length;
  cfg.seed = seed;
  return generate_treebank(cfg);
}

inline Model small_model(SystemId system, const std::vector<Sentence>& corpus, int dim, int hidden, unsigned seed,
                         double init_range = 0.01) {
  Hyper h;
  h.dim = dim;
  h.hidden = hidden;
  h.init_range = init_range;
  Rng rng(seed);
  return make_model(system, collect_labels(corpus), build_vocabularies(corpus), h, rng);
}

// Random legal walk of `steps` actions (fewer if a terminal is reached).
template <class R>
Configuration random_prefix(const TransitionSystem& sys, int n, int steps, R& rng) {
  Configuration c = initial_config(n);
  for (int i = 0; i < steps && !is_terminal(sys, c); ++i) {
    const auto legal = legal_actions(sys, c);
    apply_in_place(sys, c, legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
  }
  return c;
}

// Relative error with a floor on the denominator, so that near-zero
// coordinates are judged on round-off scale rather than relative scale.
inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-5});
  return std::abs(a - b) / scale;
}

// Every scalar parameter, in a fixed order, for finite-difference probes.
inline std::vector<double*> parameter_pointers(Model& m) {
  std::vector<double*> out;
  for (auto* mat : {&m.word_emb, &m.pos_emb, &m.label_emb, &m.w1, &m.w2})
    for (Eigen::Index i = 0; i < mat->size(); ++i) out.push_back(mat->data() + i);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i) out.push_back(m.b1.data() + i);
  return out;
}

inline std::vector<const double*> gradient_pointers(const Gradient& g) {
  std::vector<const double*> out;
  for (auto* mat : {&g.word_emb, &g.pos_emb, &g.label_emb, &g.w1, &g.w2})
    for (Eigen::Index i = 0; i < mat->size(); ++i) out.push_back(mat->data() + i);
  for (Eigen::Index i = 0; i < g.b1.size(); ++i) out.push_back(g.b1.data() + i);
  return out;
}

// A random sentence from `corpus` and a random reachable, non-terminal
// configuration over it.
struct Draw {
  Sentence sentence;
  Configuration config;
  FeatureVector features;
  std::vector<char> mask;
};

Draw random_draw(const Model& m, const std::vector<Sentence>& corpus, std::mt19937& rng) {
  Draw d;
  d.sentence = corpus[std::uniform_int_distribution<std::size_t>(0, corpus.size() - 1)(rng)];
  const auto sys = m.transition_system();
  d.config = random_prefix(sys, d.sentence.size(), std::uniform_int_distribution<int>(0, 3 * d.sentence.size())(rng), rng);
  if (is_terminal(sys, d.config)) d.config = initial_config(d.sentence);
  const FeatureContext ctx(m);
  d.features = ctx.features(d.config, ctx.encode(d.sentence));
  d.mask = legal_mask(sys, d.config);
  return d;
}

double weighted_log_prob(const Model& m, const Draw& d, const Vector& coef) {
  const auto p = forward(m, d.features, d.mask).probabilities;
  double f = 0.0;
  for (Eigen::Index a = 0; a < coef.size(); ++a)
    if (d.mask[static_cast<std::size_t>(a)]) f += coef[a] * std::log(p[static_cast<std::size_t>(a)]);
  return f;
}

// Largest relative error between the analytic gradient `g` and central
// differences of `objective` over a sample of coordinates: mostly ones with
// a non-negligible analytic value, plus a few arbitrary ones.
template <class F, class R>
double max_gradient_error(Model& m, const Gradient& g, F&& objective, R& rng, std::size_t nonzero_probes = 25,
                          std::size_t random_probes = 5, double h = 1e-5) {
  auto params = parameter_pointers(m);
  const auto grads = gradient_pointers(g);
  std::vector<std::size_t> probe;
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (std::abs(*grads[i]) > 1e-6) probe.push_back(i);
  std::shuffle(probe.begin(), probe.end(), rng);
  probe.resize(std::min(probe.size(), nonzero_probes));
  for (std::size_t extra = 0; extra < random_probes; ++extra)
    probe.push_back(std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng));
  double worst = 0.0;
  for (std::size_t i : probe) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = objective(m);
    *params[i] = saved - h;
    const double down = objective(m);
    *params[i] = saved;
    worst = std::max(worst, relative_error(*grads[i], (up - down) / (2 * h)));
  }
  return worst;
}

}  // namespace redep::testing

#pragma once

// Supervised training on static-oracle derivations, REINFORCE, and
// approximate policy gradient with oracle / random / memory trajectory sets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "redep/decode_eval.hpp"
#include "redep/model.hpp"
#include "redep/parallel.hpp"
#include "redep/transitions.hpp"
#include "redep/treebank.hpp"

namespace redep {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, a, b).
inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

// Number of correctly attached and labeled non-punctuation tokens.
inline double reward_fn(const DepTree& predicted, const Sentence& gold, PunctConvention punct) {
  if (predicted.size() != gold.size())
    throw std::invalid_argument("reward: sentence " + gold.id + " has " + std::to_string(gold.size()) +
                                " tokens, tree has " + std::to_string(predicted.size()));
  int correct = 0;
  for (int t = 1; t <= gold.size(); ++t) {
    const Token& tok = gold.at(t);
    if (!is_punctuation(tok, punct) && predicted.head(t) == tok.gold_head && predicted.label(t) == tok.gold_label)
      ++correct;
  }
  return correct;
}

inline double reward_fn(const DepTree& predicted, const DepTree& gold, const Sentence& tokens, PunctConvention punct) {
  return reward_fn(predicted, with_tree(tokens, gold), punct);
}

inline double baseline_fn(const Sentence& gold, PunctConvention punct) {
  return 0.5 * count_scored_tokens(gold, punct);
}

// Sentences with a static-oracle derivation under `system`.
inline bool oracle_derivable(SystemId system, const Sentence& s) {
  return system == SystemId::swap_standard || is_projective(gold_tree(s));
}

// ---------------------------------------------------------------------------
// Trajectories

namespace detail {

inline int sample_index(const Vector& probs, const std::vector<char>& mask, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace detail

// One trajectory drawn from the policy, or nullopt when the step cap is hit.
inline std::optional<Trajectory> sample_trajectory(const Model& m, const Sentence& s, Rng& rng,
                                                   PunctConvention punct = PunctConvention::ptb) {
  const auto sys = m.transition_system();
  const FeatureContext ctx(m);
  const auto enc = ctx.encode(s);
  const std::size_t cap = step_cap(sys.id(), s.size());
  Configuration c = initial_config(s);
  Trajectory t;
  ForwardCache cache;
  while (!is_terminal(sys, c)) {
    if (t.actions.size() >= cap) return std::nullopt;
    const auto f = ctx.features(c, enc);
    const auto mask = legal_mask(sys, c);
    forward(m, f, mask, cache);
    const int a = detail::sample_index(cache.probs, mask, rng);
    t.actions.push_back(a);
    t.features.push_back(f);
    t.probabilities.push_back(cache.probs[a]);
    t.log_prob += std::log(cache.probs[a]);
    apply_in_place(sys, c, sys.action(a));
  }
  t.tree = extract_tree(sys, c);
  t.reward = reward_fn(t.tree, s, punct);
  return t;
}

// Up to k distinct trajectories; at most 3k draws.
inline std::vector<Trajectory> sample_trajectories(const Model& m, const Sentence& s, int k, Rng& rng,
                                                   PunctConvention punct = PunctConvention::ptb) {
  if (k < 1) throw std::invalid_argument("sample_trajectories: k must be at least 1");
  std::vector<Trajectory> out;
  for (int attempt = 0; attempt < 3 * k && static_cast<int>(out.size()) < k; ++attempt) {
    auto t = sample_trajectory(m, s, rng, punct);
    if (!t) continue;
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Trajectory& o) { return o.actions == t->actions; });
    if (!seen) out.push_back(std::move(*t));
  }
  return out;
}

inline Trajectory oracle_trajectory(const Model& m, const Sentence& s, PunctConvention punct = PunctConvention::ptb) {
  const auto sys = m.transition_system();
  Trajectory t;
  Configuration c = initial_config(s);
  for (const auto& a : static_oracle(sys, s)) {
    t.actions.push_back(sys.action_id(a));
    apply_in_place(sys, c, a);
  }
  t.tree = extract_tree(sys, c);
  t.reward = reward_fn(t.tree, s, punct);
  return t;
}

// Per-step forward passes of an action sequence under the current parameters.
struct Replay {
  std::vector<FeatureVector> features;
  std::vector<ForwardCache> caches;
  std::vector<int> actions;
  double log_prob = 0.0;
};

inline Replay replay(const Model& m, const Sentence& s, const std::vector<int>& actions) {
  const auto sys = m.transition_system();
  const FeatureContext ctx(m);
  const auto enc = ctx.encode(s);
  Configuration c = initial_config(s);
  Replay r;
  r.actions = actions;
  r.features.reserve(actions.size());
  r.caches.resize(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (is_terminal(sys, c))
      throw std::invalid_argument("trajectory for sentence " + s.id + " continues past a terminal configuration");
    const auto mask = legal_mask(sys, c);
    if (a < 0 || a >= static_cast<int>(mask.size()) || !mask[static_cast<std::size_t>(a)])
      throw std::invalid_argument("trajectory for sentence " + s.id + " has an illegal action at step " +
                                  std::to_string(i));
    r.features.push_back(ctx.features(c, enc));
    forward(m, r.features.back(), mask, r.caches[i]);
    r.log_prob += std::log(r.caches[i].probs[a]);
    apply_in_place(sys, c, sys.action(a));
  }
  if (!is_terminal(sys, c)) throw std::invalid_argument("trajectory for sentence " + s.id + " does not terminate");
  return r;
}

// Adds scale * coefficient * d/dtheta sum_i log p(a_i | s_i).
inline void accumulate_log_prob_gradient(const Model& m, const Replay& r, double coefficient, Gradient& grad,
                                         double scale = 1.0) {
  if (coefficient == 0.0) return;
  Vector dlogp = Vector::Zero(m.num_actions());
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    dlogp.setZero();
    dlogp[r.actions[i]] = coefficient;
    backward(m, r.features[i], r.caches[i], dlogp, grad, scale);
  }
}

enum class WeightMode { normalized, raw };

inline std::string_view to_string(WeightMode w) { return w == WeightMode::normalized ? "normalized" : "raw"; }
inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "normalized") return WeightMode::normalized;
  if (s == "raw") return WeightMode::raw;
  throw std::invalid_argument("unknown weight mode '" + std::string(s) + "' (expected normalized|raw)");
}

struct GradientStats {
  int trajectories = 0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
};

// Approximate policy gradient (ascent direction) over the trajectory set U:
//   sum_j (r_j - b) * w_j * d/dtheta log P_j
// Raw mode uses w_j = P_j, giving the exact gradient of sum_j (r_j - b) P_j.
// Normalized mode uses w_j = P_j / sum_l P_l, held constant.
inline GradientStats apg_gradient(const Model& m, const Sentence& s, const std::vector<Trajectory>& U, double baseline,
                                  WeightMode mode, Gradient& grad, double scale = 1.0) {
  GradientStats st;
  if (U.empty()) return st;
  std::vector<Replay> replays;
  replays.reserve(U.size());
  for (const auto& t : U) replays.push_back(replay(m, s, t.actions));
  std::vector<double> w(U.size());
  if (mode == WeightMode::raw) {
    for (std::size_t j = 0; j < U.size(); ++j) w[j] = std::exp(replays[j].log_prob);
  } else {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& r : replays) mx = std::max(mx, r.log_prob);
    double z = 0.0;
    for (std::size_t j = 0; j < U.size(); ++j) z += (w[j] = std::exp(replays[j].log_prob - mx));
    for (auto& x : w) x /= z;
  }
  for (std::size_t j = 0; j < U.size(); ++j) {
    const double adv = U[j].reward - baseline;
    accumulate_log_prob_gradient(m, replays[j], adv * w[j], grad, scale);
    st.mean_reward += U[j].reward;
    st.mean_advantage += adv;
  }
  st.trajectories = static_cast<int>(U.size());
  st.mean_reward /= st.trajectories;
  st.mean_advantage /= st.trajectories;
  return st;
}

// The objective whose gradient apg_gradient returns, for finite-difference
// checks. In normalized mode `frozen_weights` supplies the constant w_j.
inline double apg_objective(const Model& m, const Sentence& s, const std::vector<Trajectory>& U, double baseline,
                            WeightMode mode, const std::vector<double>& frozen_weights = {}) {
  double total = 0.0;
  for (std::size_t j = 0; j < U.size(); ++j) {
    const double lp = replay(m, s, U[j].actions).log_prob;
    const double adv = U[j].reward - baseline;
    total += mode == WeightMode::raw ? adv * std::exp(lp) : adv * frozen_weights.at(j) * lp;
  }
  return total;
}

inline std::vector<double> normalized_weights(const Model& m, const Sentence& s, const std::vector<Trajectory>& U) {
  std::vector<double> lp;
  for (const auto& t : U) lp.push_back(replay(m, s, t.actions).log_prob);
  const double mx = *std::max_element(lp.begin(), lp.end());
  double z = 0.0;
  for (auto& x : lp) z += (x = std::exp(x - mx));
  for (auto& x : lp) x /= z;
  return lp;
}

// Single-sample REINFORCE: (r - b) * d/dtheta log P of one drawn trajectory.
inline std::optional<Trajectory> reinforce_gradient(const Model& m, const Sentence& s, Rng& rng, double baseline,
                                                    Gradient& grad, double scale = 1.0,
                                                    PunctConvention punct = PunctConvention::ptb) {
  auto t = sample_trajectory(m, s, rng, punct);
  if (!t) return std::nullopt;
  accumulate_log_prob_gradient(m, replay(m, s, t->actions), t->reward - baseline, grad, scale);
  return t;
}

// Forget each stored trajectory with probability rho, then offer each
// candidate: insert while below capacity, else replace the lowest-reward
// entry when the candidate is strictly better.
template <class R>
void update_memory(std::vector<Trajectory>& memory, const std::vector<Trajectory>& candidates, int k, double rho,
                   R& rng) {
  if (k < 1) throw std::invalid_argument("update_memory: k must be at least 1");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("update_memory: rho must be in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Trajectory> kept;
  kept.reserve(memory.size());
  for (auto& t : memory)
    if (!(u(rng) < rho)) kept.push_back(std::move(t));
  memory = std::move(kept);
  for (const auto& q : candidates) {
    if (static_cast<int>(memory.size()) < k) {
      memory.push_back(q);
      continue;
    }
    auto p = std::min_element(memory.begin(), memory.end(),
                              [](const Trajectory& a, const Trajectory& b) { return a.reward < b.reward; });
    if (q.reward > p->reward) *p = q;
  }
}

// Memory keeps action sequences and rewards only.
inline Trajectory strip_for_memory(const Trajectory& t) {
  Trajectory out;
  out.actions = t.actions;
  out.tree = t.tree;
  out.reward = t.reward;
  return out;
}

// ---------------------------------------------------------------------------
// Supervised training

struct SupervisedConfig {
  int epochs = 10;
  int batch_size = 32;  // oracle (state, action) pairs per step
  double dropout = 0.5;
  double l2 = 1e-8;
  std::uint64_t seed = 1;
};

struct OracleExample {
  FeatureVector features;
  std::vector<char> mask;
  int action = 0;
};

inline std::vector<OracleExample> oracle_examples(const Model& m, const std::vector<Sentence>& sentences,
                                                  int* skipped = nullptr) {
  const auto sys = m.transition_system();
  const FeatureContext ctx(m);
  std::vector<OracleExample> out;
  int skip = 0;
  for (const auto& s : sentences) {
    std::vector<Action> seq;
    try {
      seq = static_oracle(sys, s);
    } catch (const NoDerivation&) {
      ++skip;
      continue;
    }
    const auto enc = ctx.encode(s);
    Configuration c = initial_config(s);
    for (const auto& a : seq) {
      out.push_back({ctx.features(c, enc), legal_mask(sys, c), sys.action_id(a)});
      apply_in_place(sys, c, a);
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

// Mean negative log-likelihood of the oracle actions, without dropout.
inline double oracle_nll(const Model& m, const std::vector<OracleExample>& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  ForwardCache cache;
  for (const auto& ex : data) {
    forward(m, ex.features, ex.mask, cache);
    total -= std::log(cache.probs[ex.action]);
  }
  return total / static_cast<double>(data.size());
}

struct SupervisedResult {
  std::vector<double> epoch_loss;  // mean training NLL after each epoch
  int skipped_sentences = 0;
  int examples = 0;
};

inline SupervisedResult train_supervised(Model& m, const std::vector<Sentence>& sentences,
                                         const SupervisedConfig& cfg, std::ostream* log = nullptr) {
  SupervisedResult res;
  const auto data = oracle_examples(m, sentences, &res.skipped_sentences);
  if (data.empty() && cfg.epochs > 0) throw std::invalid_argument("train_supervised: no oracle-derivable sentences");
  res.examples = static_cast<int>(data.size());
  Rng rng = make_rng(cfg.seed, 0x5u);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Gradient grad = Gradient::zeros_like(m);
  ForwardCache cache;
  Vector drop(m.hyper.hidden);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const int batch = std::max(1, cfg.batch_size);
  if (log) *log << "epoch\tloss\n";
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
      grad.set_zero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        const Vector* scale = nullptr;
        if (cfg.dropout > 0.0) {
          for (Eigen::Index h = 0; h < drop.size(); ++h) drop[h] = keep(rng) ? 1.0 / (1.0 - cfg.dropout) : 0.0;
          scale = &drop;
        }
        forward(m, ex.features, ex.mask, cache, scale);
        Vector dlogp = Vector::Zero(m.num_actions());
        dlogp[ex.action] = -1.0;  // d(-log p)/d log p
        backward(m, ex.features, cache, dlogp, grad, 1.0 / static_cast<double>(end - start));
      }
      adagrad_step(m, grad, cfg.l2);
    }
    res.epoch_loss.push_back(oracle_nll(m, data));
    if (log) *log << epoch << '\t' << res.epoch_loss.back() << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// Reinforcement learning

enum class Strategy { reinforce, rl_oracle, rl_random, rl_memory };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::reinforce: return "reinforce";
    case Strategy::rl_oracle: return "rl-oracle";
    case Strategy::rl_random: return "rl-random";
    case Strategy::rl_memory: return "rl-memory";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "reinforce") return Strategy::reinforce;
  if (s == "rl-oracle") return Strategy::rl_oracle;
  if (s == "rl-random") return Strategy::rl_random;
  if (s == "rl-memory") return Strategy::rl_memory;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "' (expected reinforce|rl-oracle|rl-random|rl-memory)");
}

struct RLConfig {
  Strategy strategy = Strategy::rl_memory;
  int k = 8;
  double rho = 0.01;
  int batch_size = 512;
  int updates = 1000;
  int eval_every = 50;
  WeightMode weights = WeightMode::normalized;
  PunctConvention punct = PunctConvention::ptb;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<double> learning_rate;  // replaces the model's rate when set

  void validate() const {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rho must be in [0, 1]");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
    if (updates < 0) throw std::invalid_argument("updates must be non-negative");
    if (eval_every < 1) throw std::invalid_argument("eval interval must be at least 1");
    if (learning_rate && !(*learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }
};

struct RLResult {
  double initial_dev_las = 0.0;
  double best_dev_las = 0.0;
  double best_dev_uas = 0.0;
  int best_update = 0;
  int rejected_steps = 0;
  std::vector<double> mean_rewards;
};

// Gradient of one sentence under the chosen strategy, added (ascent
// direction, times `scale`) into grad.
inline GradientStats rl_sentence_gradient(const Model& m, const Sentence& s, const RLConfig& cfg,
                                          std::vector<Trajectory>* memory, Rng& rng, Gradient& grad, double scale) {
  const double b = baseline_fn(s, cfg.punct);
  switch (cfg.strategy) {
    case Strategy::reinforce: {
      GradientStats st;
      if (auto t = reinforce_gradient(m, s, rng, b, grad, scale, cfg.punct)) {
        st.trajectories = 1;
        st.mean_reward = t->reward;
        st.mean_advantage = t->reward - b;
      }
      return st;
    }
    case Strategy::rl_oracle:
      return apg_gradient(m, s, {oracle_trajectory(m, s, cfg.punct)}, b, cfg.weights, grad, scale);
    case Strategy::rl_random:
      return apg_gradient(m, s, sample_trajectories(m, s, cfg.k, rng, cfg.punct), b, cfg.weights, grad, scale);
    case Strategy::rl_memory: {
      std::vector<Trajectory> fresh;
      for (const auto& t : sample_trajectories(m, s, cfg.k, rng, cfg.punct)) fresh.push_back(strip_for_memory(t));
      update_memory(*memory, fresh, cfg.k, cfg.rho, rng);
      return apg_gradient(m, s, *memory, b, cfg.weights, grad, scale);
    }
  }
  return {};
}

// Runs `updates` APG / REINFORCE steps and leaves the model at the snapshot
// with the best dev LAS among the periodic evaluations.
inline RLResult train_rl(Model& m, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                         const RLConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  std::vector<const Sentence*> pool;
  for (const auto& s : train)
    if (oracle_derivable(m.system, s)) pool.push_back(&s);
  if (pool.empty()) throw std::invalid_argument("train_rl: no usable training sentences");
  if (cfg.learning_rate) m.hyper.learning_rate = *cfg.learning_rate;

  RLResult res;
  auto dev_eval = [&](const Model& model) { return evaluate(dev, parse_corpus(model, dev, cfg.jobs), cfg.punct); };
  const bool has_dev = !dev.empty();
  if (has_dev) res.initial_dev_las = dev_eval(m).las;
  std::optional<Model> best;
  res.best_dev_las = -1.0;

  std::vector<std::vector<Trajectory>> memory(pool.size());
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng batch_rng = make_rng(cfg.seed, 0xba7c4u);

  // Fixed chunking keeps the floating-point summation order independent of jobs.
  constexpr std::size_t kChunks = 8;
  Gradient total = Gradient::zeros_like(m);
  std::vector<Gradient> chunk_grads;

  if (log) *log << "update\tmean_reward\tmean_advantage\tdev_uas\tdev_las\n";
  for (int u = 1; u <= cfg.updates; ++u) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    const std::size_t bsz = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size());
    const std::size_t chunks = std::min(kChunks, bsz);
    if (chunk_grads.size() < chunks) chunk_grads.resize(chunks, Gradient::zeros_like(m));
    std::vector<GradientStats> stats(bsz);
    const Model& snapshot = m;
    parallel_for(chunks, cfg.jobs, [&](std::size_t c) {
      chunk_grads[c].set_zero();
      for (std::size_t i = c; i < bsz; i += chunks) {
        const std::size_t idx = order[i];
        Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(u), idx);
        stats[i] = rl_sentence_gradient(snapshot, *pool[idx], cfg, &memory[idx], rng, chunk_grads[c], 1.0);
      }
    });
    total.set_zero();
    int contributing = 0;
    double reward = 0.0, adv = 0.0;
    for (const auto& st : stats)
      if (st.trajectories > 0) {
        ++contributing;
        reward += st.mean_reward;
        adv += st.mean_advantage;
      }
    if (contributing > 0) {
      for (std::size_t c = 0; c < chunks; ++c) total.add_scaled(chunk_grads[c], -1.0 / contributing);
      if (!adagrad_step(m, total, 0.0)) ++res.rejected_steps;
      reward /= contributing;
      adv /= contributing;
    }
    res.mean_rewards.push_back(reward);

    std::string dev_cols = "\t-\t-";
    if (has_dev && (u % cfg.eval_every == 0 || u == cfg.updates)) {
      const auto r = dev_eval(m);
      std::ostringstream cols;
      cols << std::fixed << std::setprecision(2) << '\t' << r.uas << '\t' << r.las;
      dev_cols = cols.str();
      if (r.las > res.best_dev_las) {
        res.best_dev_las = r.las;
        res.best_dev_uas = r.uas;
        res.best_update = u;
        best = m;
      }
    }
    if (log) *log << u << '\t' << reward << '\t' << adv << dev_cols << '\n';
  }
  if (best) m = std::move(*best);
  if (!has_dev || cfg.updates == 0) {
    res.best_dev_las = res.initial_dev_las;
    res.best_update = cfg.updates;
  }
  return res;
}

}  // namespace redep

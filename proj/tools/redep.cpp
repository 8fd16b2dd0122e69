// redep: train, parse, eval and analyze greedy transition-based parsers.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "redep/redep.hpp"

using namespace redep;

namespace {

struct Common {
  std::string config;
  std::string format;  // empty: pick from the file extension
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct TrainArgs {
  std::string mode = "sl";
  std::string system = "arc-standard";
  std::string treebank, dev, out, pretrained, log;
  int k = 8;
  double rho = 0.01;
  int batch = 512;
  int updates = 1000;
  int eval_every = 50;
  std::string weights = "normalized";
  std::string punct = "ptb";
  double lr = 0.01;
  std::optional<double> rl_lr;
  int dim = 50;
  int hidden = 200;
  int epochs = 10;
  int sl_batch = 32;
  double dropout = 0.5;
  double l2 = 1e-8;
  double init_range = 0.01;
};

struct ParseArgs {
  std::string model, input, output, system;
};

struct EvalArgs {
  std::string gold, pred, punct = "ptb", tsv;
};

struct AnalyzeArgs {
  std::string model, treebank, tsv;
  bool alternative = false;
  int max_depth = 0;
};

ConllFormat format_for(const std::string& flag, const std::string& path) {
  if (!flag.empty()) return parse_conll_format(flag);
  return std::filesystem::path(path).extension() == ".conllu" ? ConllFormat::conllu : ConllFormat::conllx;
}

std::vector<Sentence> read_treebank(const std::string& path, const Common& c) {
  LoadOptions opts;
  opts.format = format_for(c.format, path);
  if (path == "-") return read_conll(std::cin, opts);
  return load_conll(path, opts);
}

std::vector<Sentence> strip_gold(std::vector<Sentence> sentences) {
  for (auto& s : sentences)
    for (auto& t : s.tokens) {
      t.gold_head = 0;
      t.gold_label.clear();
    }
  return sentences;
}

// Output goes to a file when a path is given, otherwise to stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw std::runtime_error("cannot write " + path);
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int run_train(const TrainArgs& a, const Common& c) {
  const bool supervised = a.mode == "sl";
  const auto system = parse_system_id(a.system);
  std::optional<Strategy> strategy;
  RLConfig rl;
  if (!supervised) {
    strategy = parse_strategy(a.mode);
    rl.strategy = *strategy;
    rl.k = a.k;
    rl.rho = a.rho;
    rl.batch_size = a.batch;
    rl.updates = a.updates;
    rl.eval_every = a.eval_every;
    rl.weights = parse_weight_mode(a.weights);
    rl.punct = parse_punct_convention(a.punct);
    rl.seed = c.seed;
    rl.jobs = c.jobs;
    rl.learning_rate = a.rl_lr;
    rl.validate();
    if (a.pretrained.empty()) throw std::invalid_argument("--mode " + a.mode + " needs --pretrained");
  } else if (a.epochs < 0 || a.dim < 1 || a.hidden < 1 || !(a.lr > 0.0) || a.dropout < 0.0 || a.dropout >= 1.0) {
    throw std::invalid_argument("bad supervised settings: need epochs >= 0, dim/hidden >= 1, lr > 0, dropout in [0, 1)");
  }

  const auto train = read_treebank(a.treebank, c);
  const auto dev = a.dev.empty() ? std::vector<Sentence>{} : read_treebank(a.dev, c);
  std::unique_ptr<std::ofstream> log_file;
  if (!a.log.empty()) {
    log_file = std::make_unique<std::ofstream>(a.log, std::ios::app);
    if (!*log_file) throw std::runtime_error("cannot open log " + a.log);
  }

  Model m;
  if (supervised) {
    if (train.empty()) throw std::invalid_argument("treebank " + a.treebank + " has no sentences");
    Hyper hy;
    hy.dim = a.dim;
    hy.hidden = a.hidden;
    hy.learning_rate = a.lr;
    hy.l2 = a.l2;
    hy.init_range = a.init_range;
    Rng rng = make_rng(c.seed, 0x1417u);
    m = make_model(system, collect_labels(train), build_vocabularies(train), hy, rng);
    SupervisedConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.sl_batch;
    cfg.dropout = a.dropout;
    cfg.l2 = a.l2;
    cfg.seed = c.seed;
    const auto r = train_supervised(m, train, cfg, log_file.get());
    if (r.skipped_sentences > 0)
      std::cerr << "skipped " << r.skipped_sentences << " sentences the " << a.system << " oracle cannot derive\n";
  } else {
    m = load_model(a.pretrained, system);
    const auto r = train_rl(m, train, dev, rl, log_file.get());
    if (!dev.empty())
      std::cerr << "dev LAS " << format_fixed(r.initial_dev_las, 2) << " -> " << format_fixed(r.best_dev_las, 2)
                << " (update " << r.best_update << ")\n";
    if (r.rejected_steps > 0) std::cerr << "rejected " << r.rejected_steps << " non-finite updates\n";
  }
  save_model(a.out, m);
  if (!dev.empty()) write_eval_summary(std::cout, evaluate(dev, parse_corpus(m, dev, c.jobs), PunctConvention::ptb));
  return 0;
}

int run_parse(const ParseArgs& a, const Common& c) {
  std::optional<SystemId> expected;
  if (!a.system.empty()) expected = parse_system_id(a.system);
  const Model m = load_model(a.model, expected);
  const auto input = strip_gold(read_treebank(a.input, c));
  const auto trees = parse_corpus(m, input, c.jobs);
  Sink out(a.output);
  write_conll(out.get(), input, trees, format_for(c.format, a.output.empty() ? a.input : a.output));
  return 0;
}

int run_eval(const EvalArgs& a, const Common& c) {
  const auto gold = read_treebank(a.gold, c);
  const auto pred = read_treebank(a.pred, c);
  const auto r = evaluate(gold, pred, parse_punct_convention(a.punct));
  write_eval_summary(std::cout, r);
  if (!a.tsv.empty()) {
    Sink tsv(a.tsv);
    write_eval_tsv(tsv.get(), r);
  }
  return 0;
}

int run_analyze(const AnalyzeArgs& a, const Common& c) {
  if (a.max_depth < 0) throw std::invalid_argument("--max-depth must be non-negative");
  const Model m = load_model(a.model);
  if (m.system != SystemId::arc_standard)
    throw std::invalid_argument("analyze needs an arc-standard model, " + a.model + " is " + std::string(to_string(m.system)));
  const auto sentences = read_treebank(a.treebank, c);
  const auto res = analyze_corpus(m, sentences, c.jobs, a.max_depth);
  write_propagation_summary(std::cout, res.report, a.alternative);
  if (!a.tsv.empty()) {
    Sink tsv(a.tsv);
    write_repair_tsv(tsv.get(), res.records);
  }
  return 0;
}

// The --config file is read before CLI11 sees the arguments so that its
// entries can be appended as ordinary flags.
std::vector<std::string> apply_config(std::vector<std::string> args, const CLI::App& app) {
  std::string path;
  const CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (!sub) {
      for (const auto* s : app.get_subcommands({}))
        if (s->get_name() == args[i]) sub = s;
    }
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || !sub) return args;
  FlagTable flags;
  for (const auto* opt : sub->get_options()) {
    const auto& names = opt->get_lnames();
    if (!names.empty() && names.front() != "config" && names.front() != "help") flags[names.front()] = names.front();
  }
  return merge_config(std::move(args), load_config(path), flags, path);
}

template <class T>
CLI::Option* option(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  return app->add_option("--" + name, value, help)->envname(env_name(name));
}

void add_common(CLI::App* app, Common& c) {
  option(app, "config", c.config, "flat key = value file; flags and REDEP_* variables win");
  option(app, "format", c.format, "conllx|conllu (default: from the file extension)");
  option(app, "seed", c.seed, "random seed")->capture_default_str();
  option(app, "jobs", c.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy transition-based dependency parser with policy-gradient training"};
  app.require_subcommand(1);
  Common common;

  TrainArgs t;
  auto* train = app.add_subcommand("train", "train a model (supervised or reinforcement learning)");
  add_common(train, common);
  option(train, "mode", t.mode, "sl|reinforce|rl-oracle|rl-random|rl-memory")->capture_default_str();
  option(train, "system", t.system, "arc-standard|arc-eager|swap-standard")->capture_default_str();
  option(train, "treebank", t.treebank, "training treebank")->required();
  option(train, "dev", t.dev, "development treebank");
  option(train, "out", t.out, "model file to write")->required();
  option(train, "pretrained", t.pretrained, "starting model for RL modes");
  option(train, "log", t.log, "append the training log here");
  option(train, "k", t.k, "trajectories per sentence")->capture_default_str();
  option(train, "rho", t.rho, "memory forgetting rate")->capture_default_str();
  option(train, "batch", t.batch, "sentences per RL update")->capture_default_str();
  option(train, "updates", t.updates, "RL updates")->capture_default_str();
  option(train, "eval-every", t.eval_every, "dev evaluation interval in updates")->capture_default_str();
  option(train, "weights", t.weights, "normalized|raw trajectory weights")->capture_default_str();
  option(train, "punct", t.punct, "ptb|ud punctuation convention for rewards")->capture_default_str();
  option(train, "lr", t.lr, "AdaGrad learning rate (supervised)")->capture_default_str();
  option(train, "rl-lr", t.rl_lr, "AdaGrad learning rate for RL (default: keep the model's)");
  option(train, "dim", t.dim, "embedding size")->capture_default_str();
  option(train, "hidden", t.hidden, "hidden units")->capture_default_str();
  option(train, "epochs", t.epochs, "supervised epochs")->capture_default_str();
  option(train, "sl-batch", t.sl_batch, "oracle transitions per supervised step")->capture_default_str();
  option(train, "dropout", t.dropout, "hidden-layer dropout (supervised)")->capture_default_str();
  option(train, "l2", t.l2, "L2 regularization")->capture_default_str();
  option(train, "init-range", t.init_range, "uniform initialization half-width")->capture_default_str();

  ParseArgs p;
  auto* parse = app.add_subcommand("parse", "parse a CoNLL file greedily");
  add_common(parse, common);
  option(parse, "model", p.model, "model file")->required();
  option(parse, "input", p.input, "CoNLL input ('-' for stdin)")->required();
  option(parse, "output", p.output, "CoNLL output (default stdout)");
  option(parse, "system", p.system, "refuse models of any other transition system");

  EvalArgs e;
  auto* eval = app.add_subcommand("eval", "score a system file against gold");
  add_common(eval, common);
  option(eval, "gold", e.gold, "gold CoNLL file")->required();
  option(eval, "pred", e.pred, "system CoNLL file")->required();
  option(eval, "punct", e.punct, "ptb|ud")->capture_default_str();
  option(eval, "tsv", e.tsv, "per-sentence TSV report");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "decision-error and error-propagation analysis");
  add_common(analyze, common);
  option(analyze, "model", an.model, "arc-standard model file")->required();
  option(analyze, "treebank", an.treebank, "gold treebank")->required();
  option(analyze, "tsv", an.tsv, "per-sentence TSV report");
  option(analyze, "max-depth", an.max_depth, "cap on forced corrections per sentence (0: none)")->capture_default_str();
  analyze->add_flag("--alternative", an.alternative, "also report the alternative propagation count")
      ->envname(env_name("alternative"));

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = apply_config(std::move(args), app);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const std::exception& err) {
    std::cerr << "redep: " << err.what() << '\n';
    return 2;
  }

  try {
    if (*train) return run_train(t, common);
    if (*parse) return run_parse(p, common);
    if (*eval) return run_eval(e, common);
    return run_analyze(an, common);
  } catch (const std::exception& err) {
    std::cerr << "redep: " << err.what() << '\n';
    return 1;
  }
}

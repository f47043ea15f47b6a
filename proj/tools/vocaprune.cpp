// vocaprune: train small text classifiers, rank vocabularies by selection
// algorithms, sweep accuracy-vocab curves and report the metrics.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vocaprune/baselines.hpp"
#include "vocaprune/checkpoint.hpp"
#include "vocaprune/classifier.hpp"
#include "vocaprune/corpus.hpp"
#include "vocaprune/evalcurve.hpp"
#include "vocaprune/selection.hpp"
#include "vocaprune/vvd.hpp"

namespace fs = std::filesystem;
using namespace vocaprune;

namespace {

struct RunOptions {
  std::string dataset_train, dataset_valid, dataset_test;
  std::string algorithm = "vvd";
  int min_count = 1;
  int embedding_dim = 32;
  int hidden_dim = 64;
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double l2 = 0.0;
  double clip_norm = 0.0;  // 0 = off
  int kl_warmup = 1;
  double kl_scale = 1.0;
  double lambda = 0.5;
  double gamma = 1e-4;
  double alpha_threshold = 0.0;  // 0 = not set
  int budget = -1;               // -1 = not set
  std::string budgets_mode = "log2";
  int mc_samples = 20;
  std::vector<double> drop_percents{3.0, 5.0};
  bool single_thread = false;
  bool refine = false;
  std::string out_dir = "out";
  std::string checkpoint_path, scores_path, vocab_path;
};

std::uint64_t effective_seed(const RunOptions& opt) {
  if (opt.seed_given) return opt.seed;
  if (const char* env = std::getenv("VOCAPRUNE_SEED"))
    return std::strtoull(env, nullptr, 10);
  return opt.seed;
}

TrainConfig to_train_config(const RunOptions& opt) {
  TrainConfig cfg;
  cfg.embedding_dim = opt.embedding_dim;
  cfg.hidden_dim = opt.hidden_dim;
  cfg.learning_rate = opt.learning_rate;
  cfg.batch_size = opt.batch_size;
  cfg.epochs = opt.epochs;
  cfg.optimizer = opt.optimizer == "sgd" ? TrainConfig::Optimizer::kSgd
                                         : TrainConfig::Optimizer::kAdam;
  cfg.seed = effective_seed(opt);
  cfg.l2_coefficient = opt.l2;
  if (opt.clip_norm > 0.0) cfg.gradient_clip_norm = opt.clip_norm;
  return cfg;
}

std::map<std::string, std::string> effective_config(const RunOptions& opt) {
  std::map<std::string, std::string> cfg;
  cfg["algorithm"] = opt.algorithm;
  cfg["min_count"] = std::to_string(opt.min_count);
  cfg["embedding_dim"] = std::to_string(opt.embedding_dim);
  cfg["hidden_dim"] = std::to_string(opt.hidden_dim);
  cfg["optimizer"] = opt.optimizer;
  cfg["learning_rate"] = std::to_string(opt.learning_rate);
  cfg["batch_size"] = std::to_string(opt.batch_size);
  cfg["epochs"] = std::to_string(opt.epochs);
  cfg["seed"] = std::to_string(effective_seed(opt));
  if (opt.algorithm == "vvd") {
    cfg["kl_warmup"] = std::to_string(opt.kl_warmup);
    cfg["kl_scale"] = std::to_string(opt.kl_scale);
  }
  if (opt.algorithm == "group_lasso") cfg["gamma"] = std::to_string(opt.gamma);
  if (opt.algorithm == "tfidf") cfg["lambda"] = std::to_string(opt.lambda);
  return cfg;
}

void echo_config(const RunOptions& opt, const fs::path& dir) {
  std::ofstream out(dir / "config.effective");
  for (const auto& [k, v] : effective_config(opt)) out << k << '=' << v << '\n';
}

void write_train_log(const TrainLog& log, const fs::path& path) {
  std::ofstream out(path);
  out << "epoch,train_loss,val_accuracy\n";
  char buf[40];
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.17g", log.epochs[e].train_loss);
    out << e << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", log.epochs[e].val_accuracy);
    out << buf << '\n';
  }
}

std::vector<int> parse_budgets(const RunOptions& opt, int vocab_size) {
  if (opt.budgets_mode == "log2") return log_spaced_budgets(vocab_size);
  const std::string prefix = "explicit:";
  if (opt.budgets_mode.rfind(prefix, 0) != 0)
    throw Error("--budgets must be 'log2' or 'explicit:<comma list>'");
  std::vector<int> budgets;
  std::string rest = opt.budgets_mode.substr(prefix.size());
  std::size_t pos = 0;
  while (pos < rest.size()) {
    std::size_t comma = rest.find(',', pos);
    if (comma == std::string::npos) comma = rest.size();
    budgets.push_back(std::stoi(rest.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (budgets.empty()) throw Error("empty explicit budget list");
  return budgets;
}

struct LoadedModel {
  Checkpoint cp;
  Vocabulary vocab;
  LabeledCorpus test;
};

LoadedModel load_model(const RunOptions& opt) {
  LoadedModel m;
  m.cp = Checkpoint::load(opt.checkpoint_path);
  fs::path vocab_path = opt.vocab_path.empty()
                            ? fs::path(opt.checkpoint_path).parent_path() / "vocab.txt"
                            : fs::path(opt.vocab_path);
  m.vocab = Vocabulary::load(vocab_path);
  if (m.vocab.content_hash() != m.cp.vocab_hash)
    throw Error("vocabulary hash mismatch between " + vocab_path.string() +
                " and checkpoint " + opt.checkpoint_path);
  if (!opt.dataset_test.empty()) {
    std::vector<std::int64_t> labels;
    if (auto it = m.cp.config.find("label_table"); it != m.cp.config.end()) {
      std::size_t pos = 0;
      const std::string& s = it->second;
      while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        labels.push_back(std::stoll(s.substr(pos, comma - pos)));
        pos = comma + 1;
      }
    }
    auto raw = load_tsv(opt.dataset_test, "test", labels.empty() ? nullptr : &labels);
    m.test = encode_corpus(raw, m.vocab);
  }
  return m;
}

int cmd_train(const RunOptions& opt) {
  auto train_raw = load_tsv(opt.dataset_train, "train");
  std::optional<RawCorpus> valid_raw;
  if (!opt.dataset_valid.empty())
    valid_raw = load_tsv(opt.dataset_valid, "validation", &train_raw.label_table);

  std::vector<std::vector<Token>> token_docs;
  for (const auto& [tokens, label] : train_raw.documents) token_docs.push_back(tokens);
  auto vocab = build_vocabulary(token_docs, opt.min_count);
  auto train = encode_corpus(train_raw, vocab);
  std::optional<LabeledCorpus> valid;
  if (valid_raw) valid = encode_corpus(*valid_raw, vocab);

  fs::create_directories(opt.out_dir);
  vocab.save(fs::path(opt.out_dir) / "vocab.txt");
  echo_config(opt, opt.out_dir);

  TrainConfig cfg = to_train_config(opt);
  Checkpoint cp;
  cp.algorithm = opt.algorithm;
  cp.vocab_hash = vocab.content_hash();
  cp.config = effective_config(opt);
  {
    std::string labels;
    for (std::size_t i = 0; i < train_raw.label_table.size(); ++i) {
      if (i) labels += ',';
      labels += std::to_string(train_raw.label_table[i]);
    }
    cp.config["label_table"] = labels;
  }

  TrainLog log;
  if (opt.algorithm == "vvd") {
    ElboConfig elbo;
    elbo.warmup_epochs = opt.kl_warmup;
    elbo.kl_scale = opt.kl_scale;
    elbo.dataset_size = train.documents.size();
    elbo.noise_seed = cfg.seed;
    auto result = train_vvd(train, valid ? &*valid : nullptr, vocab.size(), cfg, elbo);
    cp.embedding = std::move(result.ve.mu);
    cp.log_alpha = std::move(result.ve.log_alpha);
    cp.params = std::move(result.params);
    log = std::move(result.log);
  } else if (opt.algorithm == "group_lasso") {
    auto result =
        train_group_lasso(train, valid ? &*valid : nullptr, vocab, opt.gamma, cfg);
    cp.embedding = std::move(result.embedding);
    cp.params = std::move(result.params);
    log = std::move(result.log);
  } else if (opt.algorithm == "frequency" || opt.algorithm == "tfidf") {
    Rng rng(mix_seed(cfg.seed, 0x1217ULL));
    cp.embedding = init_embedding(vocab.size(), cfg.embedding_dim, rng);
    cp.params = init_params(cfg.embedding_dim, cfg.hidden_dim, train.num_classes, rng);
    log = train_classifier(train, valid ? &*valid : nullptr, cp.embedding, cp.params,
                           cfg);
  } else {
    throw Error("unknown algorithm: " + opt.algorithm);
  }

  cp.save(fs::path(opt.out_dir) / "checkpoint.txt");
  write_train_log(log, fs::path(opt.out_dir) / "train_log.csv");
  double final_val = log.epochs.empty() ? 0.0 : log.epochs.back().val_accuracy;
  std::printf("trained %s: vocab=%d epochs=%zu final_val_accuracy=%.4f\n",
              opt.algorithm.c_str(), vocab.size(), log.epochs.size(), final_val);
  return 0;
}

SelectionScores compute_scores(const RunOptions& opt, const Checkpoint& cp,
                               const Vocabulary& vocab) {
  if (opt.algorithm != cp.algorithm)
    throw Error("algorithm mismatch: checkpoint was trained with '" + cp.algorithm +
                "', requested '" + opt.algorithm + "'");
  if (opt.algorithm == "vvd") {
    VariationalEmbedding ve;
    ve.mu = cp.embedding;
    ve.log_alpha = cp.log_alpha;
    if (ve.log_alpha.empty()) throw Error("checkpoint has no log_alpha vector");
    return scores_from_alpha(ve, vocab);
  }
  if (opt.algorithm == "frequency") return frequency_scores(vocab);
  if (opt.algorithm == "tfidf") {
    if (opt.dataset_train.empty())
      throw Error("tfidf scoring needs --dataset-train");
    auto raw = load_tsv(opt.dataset_train, "train");
    std::vector<std::vector<Token>> docs;
    for (const auto& [tokens, label] : raw.documents) docs.push_back(tokens);
    return tfidf_scores(docs, vocab, opt.lambda);
  }
  if (opt.algorithm == "group_lasso") {
    std::vector<double> norms(cp.embedding.rows, 0.0);
    for (std::size_t i = 1; i < cp.embedding.rows; ++i) {
      double sq = 0.0;
      for (double w : cp.embedding.row(i)) sq += w * w;
      norms[i] = std::sqrt(sq);
    }
    return make_selection_scores("group_lasso", std::move(norms), vocab);
  }
  throw Error("unknown algorithm: " + opt.algorithm);
}

int cmd_select(const RunOptions& opt) {
  auto m = load_model(opt);
  auto scores = compute_scores(opt, m.cp, m.vocab);
  fs::create_directories(opt.out_dir);
  write_scores_file(fs::path(opt.out_dir) / "scores.txt", scores, m.vocab,
                    m.cp.vocab_hash);

  std::optional<std::vector<std::uint8_t>> active;
  if (opt.algorithm == "vvd" && opt.alpha_threshold > 0.0) {
    VariationalEmbedding ve;
    ve.mu = m.cp.embedding;
    ve.log_alpha = m.cp.log_alpha;
    active = select_vocab(ve, opt.alpha_threshold);
  } else if (opt.budget >= 0) {
    if (opt.budget == 0)
      std::fprintf(stderr, "warning: budget 0 selects the empty vocabulary\n");
    active = prefix_budget(scores, opt.budget);
  }
  if (active) {
    std::ofstream out(fs::path(opt.out_dir) / "active_set.txt");
    for (int i = 1; i <= m.vocab.size(); ++i)
      if ((*active)[static_cast<std::size_t>(i)]) out << m.vocab.word(i) << '\n';
  }
  std::printf("wrote scores for %s over %d words\n", scores.algorithm.c_str(),
              m.vocab.size());
  return 0;
}

int cmd_curve(const RunOptions& opt) {
  auto m = load_model(opt);
  if (m.test.documents.empty()) throw Error("curve needs --dataset-test");
  auto scores = read_scores_file(opt.scores_path, m.vocab, m.cp.vocab_hash);

  EvalFn eval = [&](const std::vector<std::uint8_t>& active) {
    return evaluate(m.test, m.cp.embedding, m.cp.params, &active);
  };
  auto budgets = parse_budgets(opt, m.vocab.size());
  auto curve =
      build_curve(scores, eval, budgets, m.vocab.size(), !opt.single_thread);

  fs::create_directories(opt.out_dir);
  write_curve_csv(fs::path(opt.out_dir) / (scores.algorithm + "_curve.csv"), curve);

  double auc_value = auc(curve);
  std::printf("%s: full_accuracy=%.4f auc=%.4f", scores.algorithm.c_str(),
              curve.full_accuracy, auc_value);
  for (double x : opt.drop_percents) {
    auto v = vocab_at_drop(curve, x);
    int budget = v.value_or(-1);
    if (v && opt.refine && *v > 1) {
      // dense binary search between the bracketing sampled budgets
      const double floor_acc = (1.0 - x / 100.0) * curve.full_accuracy;
      int lo = 1;
      for (const auto& p : curve.points) {
        if (p.budget >= *v) break;
        lo = p.budget;
      }
      int hi = *v;
      while (lo + 1 < hi) {
        int mid = lo + (hi - lo) / 2;
        if (eval(prefix_budget(scores, mid)) >= floor_acc)
          hi = mid;
        else
          lo = mid;
      }
      budget = hi;
    }
    if (budget >= 0)
      std::printf(" vocab@-%g%%=%d", x, budget);
    else
      std::printf(" vocab@-%g%%=not_reached", x);
  }
  std::printf("\n");

  std::vector<AlgorithmResult> results{{scores.algorithm, curve}};
  write_summary_csv(fs::path(opt.out_dir) / (scores.algorithm + "_summary.csv"),
                    results);
  return 0;
}

int cmd_simulate(const RunOptions& opt) {
  auto m = load_model(opt);
  if (m.test.documents.empty()) throw Error("simulate needs --dataset-test");
  EvalFn eval = [&](const std::vector<std::uint8_t>& active) {
    return evaluate(m.test, m.cp.embedding, m.cp.params, &active);
  };
  auto budgets = parse_budgets(opt, m.vocab.size());
  auto env = simulate_bounds(eval, m.vocab.size(), budgets, opt.mc_samples,
                             effective_seed(opt), !opt.single_thread);
  fs::create_directories(opt.out_dir);
  write_envelope_csv(fs::path(opt.out_dir) / "envelope.csv", env);

  // mean line plotted over the min/max band
  AccuracyVocabCurve mean_curve;
  for (const auto& r : env.rows) mean_curve.points.push_back({r.budget, r.mean});
  mean_curve.full_accuracy = env.rows.back().mean;
  mean_curve.vocab_size = m.vocab.size();
  std::vector<AlgorithmResult> results{{"monte_carlo_mean", mean_curve}};
  write_plot_svg(fs::path(opt.out_dir) / "envelope.svg", results, &env);
  std::printf("simulated %d subsets at %zu budgets\n", opt.mc_samples,
              env.rows.size());
  return 0;
}

int cmd_report(const RunOptions& opt) {
  std::vector<AlgorithmResult> results;
  std::optional<McEnvelope> env;
  if (!fs::is_directory(opt.out_dir)) throw Error("not a directory: " + opt.out_dir);
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(opt.out_dir))
    entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    std::string name = path.filename().string();
    const std::string suffix = "_curve.csv";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      results.push_back({name.substr(0, name.size() - suffix.size()),
                         read_curve_csv(path)});
    } else if (name == "envelope.csv") {
      env = read_envelope_csv(path);
    }
  }
  if (results.empty()) throw Error("no *_curve.csv files in " + opt.out_dir);
  report(results, env ? &*env : nullptr, opt.out_dir);
  std::printf("report: %zu curves -> %s/summary.csv, %s/plot.svg\n", results.size(),
              opt.out_dir.c_str(), opt.out_dir.c_str());
  return 0;
}

// Flat key=value config file; flags always override because the file is
// applied before the command line is parsed. Unknown keys are an error.
void apply_config_file(RunOptions& opt, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "algorithm") opt.algorithm = value;
    else if (key == "min_count") opt.min_count = std::stoi(value);
    else if (key == "embedding_dim") opt.embedding_dim = std::stoi(value);
    else if (key == "hidden_dim") opt.hidden_dim = std::stoi(value);
    else if (key == "optimizer") opt.optimizer = value;
    else if (key == "learning_rate") opt.learning_rate = std::stod(value);
    else if (key == "batch_size") opt.batch_size = std::stoi(value);
    else if (key == "epochs") opt.epochs = std::stoi(value);
    else if (key == "seed") { opt.seed = std::stoull(value); opt.seed_given = true; }
    else if (key == "l2") opt.l2 = std::stod(value);
    else if (key == "clip_norm") opt.clip_norm = std::stod(value);
    else if (key == "kl_warmup") opt.kl_warmup = std::stoi(value);
    else if (key == "kl_scale") opt.kl_scale = std::stod(value);
    else if (key == "lambda") opt.lambda = std::stod(value);
    else if (key == "gamma") opt.gamma = std::stod(value);
    else if (key == "alpha_threshold") opt.alpha_threshold = std::stod(value);
    else if (key == "budget") opt.budget = std::stoi(value);
    else if (key == "budgets") opt.budgets_mode = value;
    else if (key == "mc_samples") opt.mc_samples = std::stoi(value);
    else if (key == "single_thread") opt.single_thread = value != "0";
    else if (key == "out") opt.out_dir = value;
    else throw Error(path + ":" + std::to_string(line_no) +
                     ": unknown config key: " + key);
  }
}

void add_common(CLI::App* cmd, RunOptions& opt, std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "flat key=value config file (flags override it)");
  cmd->add_option("--seed", opt.seed, "RNG seed (env VOCAPRUNE_SEED as fallback)")
      ->each([&opt](const std::string&) { opt.seed_given = true; });
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_flag("--single-thread", opt.single_thread,
                "disable parallel evaluation for bit-exact reproducibility");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vocabulary selection toolkit"};
  app.require_subcommand(1);
  RunOptions opt;
  std::string config_path;

  // the config file must be applied before flags so flags win; find it early
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) config_path = arg.substr(9);
  }
  try {
    if (!config_path.empty()) apply_config_file(opt, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, opt, config_path);
  train->add_option("--dataset-train", opt.dataset_train)->required();
  train->add_option("--dataset-valid", opt.dataset_valid);
  train->add_option("--algorithm", opt.algorithm)
      ->check(CLI::IsMember({"vvd", "frequency", "tfidf", "group_lasso"}));
  train->add_option("--min-count", opt.min_count, "frequency pre-cutoff");
  train->add_option("--embedding-dim", opt.embedding_dim);
  train->add_option("--hidden-dim", opt.hidden_dim);
  train->add_option("--optimizer", opt.optimizer)
      ->check(CLI::IsMember({"sgd", "adam"}));
  train->add_option("--lr", opt.learning_rate);
  train->add_option("--batch", opt.batch_size);
  train->add_option("--epochs", opt.epochs);
  train->add_option("--l2", opt.l2);
  train->add_option("--clip-norm", opt.clip_norm);
  train->add_option("--kl-warmup", opt.kl_warmup);
  train->add_option("--kl-scale", opt.kl_scale);
  train->add_option("--gamma", opt.gamma);

  auto* select = app.add_subcommand("select", "write ranked scores and active set");
  add_common(select, opt, config_path);
  select->add_option("--checkpoint", opt.checkpoint_path)->required();
  select->add_option("--vocab", opt.vocab_path);
  select->add_option("--algorithm", opt.algorithm)
      ->check(CLI::IsMember({"vvd", "frequency", "tfidf", "group_lasso"}));
  select->add_option("--alpha-threshold", opt.alpha_threshold);
  select->add_option("--budget", opt.budget);
  select->add_option("--lambda", opt.lambda);
  select->add_option("--dataset-train", opt.dataset_train);

  auto* curve = app.add_subcommand("curve", "accuracy-vocab curve and metrics");
  add_common(curve, opt, config_path);
  curve->add_option("--checkpoint", opt.checkpoint_path)->required();
  curve->add_option("--vocab", opt.vocab_path);
  curve->add_option("--scores", opt.scores_path)->required();
  curve->add_option("--dataset-test", opt.dataset_test)->required();
  curve->add_option("--budgets", opt.budgets_mode, "log2 or explicit:<list>");
  curve->add_flag("--refine", opt.refine,
                  "binary-search the exact vocab@-X% between sampled budgets");

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo selection envelope");
  add_common(simulate, opt, config_path);
  simulate->add_option("--checkpoint", opt.checkpoint_path)->required();
  simulate->add_option("--vocab", opt.vocab_path);
  simulate->add_option("--dataset-test", opt.dataset_test)->required();
  simulate->add_option("--budgets", opt.budgets_mode);
  simulate->add_option("--mc-samples", opt.mc_samples);

  auto* rep = app.add_subcommand("report", "aggregate curves into summary and plot");
  add_common(rep, opt, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(opt);
    if (select->parsed()) return cmd_select(opt);
    if (curve->parsed()) return cmd_curve(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (rep->parsed()) return cmd_report(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

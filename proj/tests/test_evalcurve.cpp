#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vocaprune/classifier.hpp"
#include "vocaprune/corpus.hpp"
#include "vocaprune/evalcurve.hpp"

using namespace vocaprune;

TEST_CASE("log_spaced_budgets") {
  CHECK(log_spaced_budgets(16) == std::vector<int>{1, 2, 4, 8, 16});
  CHECK(log_spaced_budgets(1) == std::vector<int>{1});
  auto big = log_spaced_budgets(60000);
  CHECK(big.size() == 17);
  CHECK(big.front() == 1);
  CHECK(big[15] == 32768);
  CHECK(big.back() == 60000);
  CHECK_THROWS(log_spaced_budgets(0));
}

namespace {
SelectionScores identity_scores(int V) {
  std::vector<std::vector<Token>> docs;
  std::vector<Token> doc;
  for (int w = 0; w < V; ++w)
    for (int r = 0; r < V - w + 1; ++r)
      doc.push_back("w" + std::string(1, static_cast<char>('a' + w)));
  docs.push_back(doc);
  auto vocab = build_vocabulary(docs, 1);
  std::vector<double> scores(static_cast<std::size_t>(V) + 1, 0.0);
  for (int i = 1; i <= V; ++i) scores[static_cast<std::size_t>(i)] = -i;
  return make_selection_scores("identity", std::move(scores), vocab);
}

// accuracy = fraction of active indices; monotone in the budget
EvalFn coverage_eval(int V) {
  return [V](const std::vector<std::uint8_t>& active) {
    int n = 0;
    for (int i = 1; i <= V; ++i) n += active[static_cast<std::size_t>(i)];
    return 0.2 + 0.8 * static_cast<double>(n) / V;
  };
}
}  // namespace

TEST_CASE("build_curve basics") {
  const int V = 8;
  auto scores = identity_scores(V);
  auto eval = coverage_eval(V);
  auto curve = build_curve(scores, eval, {V}, V, false);
  CHECK(curve.points.size() == 1);
  CHECK(curve.full_accuracy == doctest::Approx(1.0));

  auto full = build_curve(scores, eval, {1, 2, 4}, V, false);
  CHECK(full.points.back().budget == V);  // V appended automatically
  CHECK(full.points.size() == 4);
  for (std::size_t i = 1; i < full.points.size(); ++i)
    CHECK(full.points[i].budget > full.points[i - 1].budget);
}

TEST_CASE("build_curve depends only on the induced ranking") {
  const int V = 8;
  auto a = identity_scores(V);
  SelectionScores b = a;
  for (auto& s : b.scores) s = s * 3.0 + 10.0;  // same order, different values
  auto eval = coverage_eval(V);
  auto budgets = log_spaced_budgets(V);
  auto ca = build_curve(a, eval, budgets, V, false);
  auto cb = build_curve(b, eval, budgets, V, false);
  for (std::size_t i = 0; i < ca.points.size(); ++i)
    CHECK(ca.points[i].accuracy == cb.points[i].accuracy);
}

TEST_CASE("build_curve parallel equals single-threaded") {
  const int V = 32;
  auto scores = identity_scores(V);
  // V=32 needs more distinct words than letters; rebuild scores manually
  std::vector<std::vector<Token>> docs;
  std::vector<Token> doc;
  for (int w = 0; w < V; ++w)
    for (int r = 0; r < 2; ++r) doc.push_back("word" + std::to_string(w));
  docs.push_back(doc);
  auto vocab = build_vocabulary(docs, 1);
  std::vector<double> raw(static_cast<std::size_t>(V) + 1, 0.0);
  for (int i = 1; i <= V; ++i) raw[static_cast<std::size_t>(i)] = -i;
  auto s = make_selection_scores("identity", std::move(raw), vocab);
  auto eval = coverage_eval(V);
  auto budgets = log_spaced_budgets(V);
  auto serial = build_curve(s, eval, budgets, V, false);
  auto parallel = build_curve(s, eval, budgets, V, true);
  for (std::size_t i = 0; i < serial.points.size(); ++i)
    CHECK(serial.points[i].accuracy == parallel.points[i].accuracy);
}

TEST_CASE("auc of a constant curve is exactly 1") {
  AccuracyVocabCurve curve;
  curve.points = {{1, 0.8}, {4, 0.8}, {16, 0.8}};
  curve.full_accuracy = 0.8;
  curve.vocab_size = 16;
  CHECK(std::fabs(auc(curve) - 1.0) <= 1e-12);
}

TEST_CASE("auc hand-computed two-point example") {
  // trapezoid (0+0.5)/2 * ln2 over a normalizer 0.5 * ln2 -> exactly 0.5
  AccuracyVocabCurve curve;
  curve.points = {{1, 0.0}, {2, 0.5}};
  curve.full_accuracy = 0.5;
  curve.vocab_size = 2;
  CHECK(std::fabs(auc(curve) - 0.5) <= 1e-12);
}

TEST_CASE("auc preserves values above 1 and orders dominating curves") {
  AccuracyVocabCurve hi, lo;
  hi.points = {{1, 0.9}, {8, 0.7}, {64, 0.5}};
  hi.full_accuracy = 0.5;
  hi.vocab_size = 64;
  CHECK(auc(hi) > 1.0);  // exceeds Acc(V) at small budgets, not clipped

  lo.points = {{1, 0.1}, {8, 0.3}, {64, 0.5}};
  lo.full_accuracy = 0.5;
  lo.vocab_size = 64;
  CHECK(auc(hi) >= auc(lo));

  AccuracyVocabCurve single;
  single.points = {{4, 0.5}};
  single.full_accuracy = 0.5;
  CHECK_THROWS(auc(single));
  AccuracyVocabCurve zero;
  zero.points = {{1, 0.0}, {2, 0.0}};
  zero.full_accuracy = 0.0;
  CHECK_THROWS(auc(zero));
}

TEST_CASE("vocab_at_drop") {
  AccuracyVocabCurve curve;
  curve.points = {{10, 0.90}, {100, 0.95}, {1000, 1.00}};
  curve.full_accuracy = 1.00;
  curve.vocab_size = 1000;
  CHECK(vocab_at_drop(curve, 5.0) == 100);
  CHECK(vocab_at_drop(curve, 0.0) == 1000);
  CHECK(vocab_at_drop(curve, 100.0) == 10);
  CHECK(vocab_at_drop(curve, 12.0) == 10);
  CHECK_THROWS(vocab_at_drop(curve, -1.0));
}

TEST_CASE("vocab_at_drop is monotone non-increasing in X") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    AccuracyVocabCurve curve;
    int budget = 1;
    int n = 3 + static_cast<int>(rng.uniform_below(8));
    for (int i = 0; i < n; ++i) {
      curve.points.push_back({budget, rng.next_double()});
      budget *= 2;
    }
    curve.full_accuracy = curve.points.back().accuracy;
    if (curve.full_accuracy <= 0.0) continue;
    curve.vocab_size = curve.points.back().budget;
    std::optional<int> prev;
    for (double x = 0.0; x <= 100.0; x += 7.0) {
      auto v = vocab_at_drop(curve, x);
      if (prev && v) CHECK(*v <= *prev);
      if (v) prev = v;
    }
  }
}

TEST_CASE("simulate_bounds collapses at the full budget") {
  const int V = 12;
  auto eval = coverage_eval(V);
  auto env = simulate_bounds(eval, V, {4, V}, 5, 99, false);
  const auto& last = env.rows.back();
  CHECK(last.budget == V);
  CHECK(last.min == last.mean);
  CHECK(last.mean == last.max);
  CHECK(last.mean == doctest::Approx(1.0));
  for (const auto& r : env.rows) {
    CHECK(r.min <= r.mean);
    CHECK(r.mean <= r.max);
  }
}

TEST_CASE("simulate_bounds: N=1 collapses, fixed seed reproduces") {
  const int V = 10;
  // evaluation depends on WHICH indices are active, not just how many
  EvalFn eval = [V](const std::vector<std::uint8_t>& active) {
    double acc = 0.0;
    for (int i = 1; i <= V; ++i)
      if (active[static_cast<std::size_t>(i)]) acc += 1.0 / (i + 1.0);
    return acc / 3.0;
  };
  auto one = simulate_bounds(eval, V, {3, 7}, 1, 5, false);
  for (const auto& r : one.rows) {
    CHECK(r.min == r.mean);
    CHECK(r.mean == r.max);
  }
  auto a = simulate_bounds(eval, V, {3, 7}, 20, 5, false);
  auto b = simulate_bounds(eval, V, {3, 7}, 20, 5, true);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].min == b.rows[i].min);
    CHECK(a.rows[i].mean == b.rows[i].mean);
    CHECK(a.rows[i].max == b.rows[i].max);
  }
  auto c = simulate_bounds(eval, V, {3, 7}, 20, 6, false);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (a.rows[i].mean != c.rows[i].mean) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("envelope band is wide at small budgets on a planted corpus") {
  SyntheticSpec spec;
  spec.num_classes = 5;
  spec.keywords_per_class = 10;
  spec.noise_vocab = 1000;
  spec.docs_per_class = 200;
  spec.doc_len = 10;
  spec.noise_rate = 0.5;
  auto synth = make_synthetic(spec, 1);
  std::vector<std::vector<Token>> token_docs;
  for (const auto& [tokens, label] : synth.corpus.documents)
    token_docs.push_back(tokens);
  auto vocab = build_vocabulary(token_docs, 1);
  auto train = encode_corpus(synth.corpus, vocab);
  TrainConfig cfg;
  cfg.embedding_dim = 16;
  cfg.hidden_dim = 32;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 20;
  cfg.seed = 1;
  Rng rng(mix_seed(1, 0x1217ULL));
  Matrix emb = init_embedding(vocab.size(), cfg.embedding_dim, rng);
  auto params = init_params(cfg.embedding_dim, cfg.hidden_dim, train.num_classes, rng);
  train_classifier(train, nullptr, emb, params, cfg);
  EvalFn eval = [&](const std::vector<std::uint8_t>& active) {
    return evaluate(train, emb, params, &active);
  };
  // random 50-word subsets of ~800 words: mostly noise, occasionally several
  // signature words, so accuracy spreads far more than 10 points
  auto env = simulate_bounds(eval, vocab.size(), {50, vocab.size()}, 50, 7, true);
  CHECK(env.rows.front().budget == 50);
  CHECK(env.rows.front().max - env.rows.front().min >= 0.10);
}

TEST_CASE("report writes deterministic files") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "vocaprune_report_test";
  fs::remove_all(dir);

  AccuracyVocabCurve curve;
  curve.points = {{1, 0.5}, {4, 0.75}, {16, 0.9}};
  curve.full_accuracy = 0.9;
  curve.vocab_size = 16;
  AccuracyVocabCurve constant;
  constant.points = {{1, 0.7}, {16, 0.7}};
  constant.full_accuracy = 0.7;
  constant.vocab_size = 16;
  std::vector<AlgorithmResult> results{{"rising", curve}, {"flat", constant}};

  report(results, nullptr, dir);
  CHECK(fs::exists(dir / "rising_curve.csv"));
  CHECK(fs::exists(dir / "flat_curve.csv"));
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "plot.svg"));

  // constant curve -> AUC exactly 1; summary sorted by AUC descending
  std::ifstream in(dir / "summary.csv");
  std::string header, first;
  std::getline(in, header);
  CHECK(header == "algorithm,auc,vocab_at_3,vocab_at_5,full_accuracy");
  std::getline(in, first);
  CHECK(first.rfind("flat,1,", 0) == 0);

  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  std::string before = slurp(dir / "rising_curve.csv");
  report(results, nullptr, dir);
  CHECK(slurp(dir / "rising_curve.csv") == before);

  // round trip
  auto back = read_curve_csv(dir / "rising_curve.csv");
  CHECK(back.points.size() == curve.points.size());
  CHECK(back.full_accuracy == curve.full_accuracy);
  fs::remove_all(dir);
}

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_util.hpp"
#include "vocaprune/baselines.hpp"
#include "vocaprune/corpus.hpp"
#include "vocaprune/evalcurve.hpp"
#include "vocaprune/vvd.hpp"

using namespace vocaprune;
using namespace vocaprune::testutil;

TEST_CASE("alpha_from_p") {
  CHECK(alpha_from_p(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(alpha_from_p(0.0) == 0.0);
  CHECK(alpha_from_p(0.95) == doctest::Approx(19.0).epsilon(1e-12));
  CHECK_THROWS(alpha_from_p(1.0));
  CHECK_THROWS(alpha_from_p(-0.1));
  // strictly increasing
  double prev = -1.0;
  for (double p = 0.0; p < 1.0; p += 0.05) {
    double a = alpha_from_p(p);
    CHECK(a > prev);
    prev = a;
  }
}

TEST_CASE("kl_per_weight reference values") {
  // independent long-double evaluation of the printed formula at alpha=1
  const long double k1 = 0.63576L, k2 = 1.87320L, k3 = 1.48695L;
  long double ref = -k1 / (1.0L + std::exp(-(k2 + k3 * 0.0L))) +
                    0.5L * std::log(2.0L) + k1;
  CHECK(kl_per_weight(0.0) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
  // 0.43124, not the commonly-quoted 0.43128: the latter disagrees with a
  // direct evaluation of the formula by 4e-5
  CHECK(kl_per_weight(0.0) == doctest::Approx(0.4312390).epsilon(1e-5));
  CHECK(kl_per_weight(8.0) <= 2e-3);
  CHECK(kl_per_weight(-8.0) >= 3.9);
}

TEST_CASE("kl_per_weight strictly decreasing and non-negative on the grid") {
  double prev = kl_per_weight(-8.0);
  CHECK(prev >= 0.0);
  for (double la = -8.0 + 1e-3; la <= 8.0 + 1e-12; la += 1e-3) {
    double v = kl_per_weight(la);
    CHECK(v >= 0.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("kl_per_weight_grad matches finite differences") {
  for (double la : {-7.5, -3.0, -1.0, 0.0, 0.5, 2.0, 6.0}) {
    double x = la;
    double fd = central_diff(&x, [&] { return kl_per_weight(x); });
    CHECK(rel_err(kl_per_weight_grad(la), fd) <= 1e-6);
  }
}

namespace {
VariationalEmbedding small_ve(std::uint64_t seed, int V = 6, int D = 4) {
  Rng rng(seed);
  VariationalEmbedding ve;
  ve.mu = init_embedding(V, D, rng);
  ve.log_alpha.assign(static_cast<std::size_t>(V) + 1, 0.0);
  for (std::size_t i = 1; i < ve.log_alpha.size(); ++i)
    ve.log_alpha[i] = -4.0 + 8.0 * rng.next_double();
  return ve;
}
}  // namespace

TEST_CASE("sample_embedding with zero noise returns mu exactly") {
  auto ve = small_ve(3);
  Matrix eps(ve.mu.rows, ve.mu.cols);
  auto b = sample_embedding(ve, eps);
  CHECK(b.data == ve.mu.data);
}

TEST_CASE("sample_embedding: zero mu row stays zero regardless of alpha") {
  auto ve = small_ve(4);
  std::fill(ve.mu.row(2).begin(), ve.mu.row(2).end(), 0.0);
  ve.log_alpha[2] = 8.0;
  Matrix eps(ve.mu.rows, ve.mu.cols);
  Rng rng(9);
  for (double& v : eps.data) v = rng.next_normal();
  auto b = sample_embedding(ve, eps);
  for (double v : b.row(2)) CHECK(v == 0.0);
  for (double v : b.row(0)) CHECK(v == 0.0);
}

TEST_CASE("sample_embedding Monte-Carlo moments") {
  VariationalEmbedding ve;
  ve.mu = Matrix(2, 1);
  ve.mu(1, 0) = 0.7;
  ve.log_alpha = {0.0, std::log(0.5)};  // alpha = 0.5
  const int n = 100000;
  Rng rng(123);
  double sum = 0.0, sumsq = 0.0;
  Matrix eps(2, 1);
  for (int k = 0; k < n; ++k) {
    eps(1, 0) = rng.next_normal();
    double b = sample_embedding(ve, eps)(1, 0);
    sum += b;
    sumsq += b * b;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  double true_var = 0.5 * 0.7 * 0.7;
  double se = std::sqrt(true_var / n);
  CHECK(std::fabs(mean - 0.7) <= 4.0 * se);
  CHECK(std::fabs(var - true_var) / true_var <= 0.05);
}

TEST_CASE("elbo with kl_scale=0 and zero noise equals plain cross-entropy") {
  auto inst = random_instance(12);
  VariationalEmbedding ve;
  ve.mu = inst.emb;
  ve.log_alpha.assign(ve.mu.rows, -3.0);
  Matrix eps(ve.mu.rows, ve.mu.cols);
  double loss = elbo_loss(inst.docs, ve, inst.params, eps, 0.0, 100, nullptr);
  double expected = batch_ce(inst.docs, inst.emb, inst.params) /
                    static_cast<double>(inst.docs.size());
  CHECK(loss == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("elbo gradients match finite differences with a fixed noise draw") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto inst = random_instance(seed);
    VariationalEmbedding ve;
    ve.mu = inst.emb;
    ve.log_alpha.assign(ve.mu.rows, 0.0);
    Rng lrng(seed * 31);
    for (std::size_t i = 1; i < ve.log_alpha.size(); ++i)
      ve.log_alpha[i] = -3.0 + 5.0 * lrng.next_double();
    Matrix eps(ve.mu.rows, ve.mu.cols);
    Rng nrng(seed * 17);
    for (double& v : eps.data) v = nrng.next_normal();
    const double kl_scale = 0.7;
    const std::size_t N = 50;

    ElboGradients g;
    elbo_loss(inst.docs, ve, inst.params, eps, kl_scale, N, &g);
    auto loss = [&] {
      return elbo_loss(inst.docs, ve, inst.params, eps, kl_scale, N, nullptr);
    };

    double worst = 0.0;
    auto check = [&](double* p, double analytic) {
      worst = std::max(worst, rel_err(analytic, central_diff(p, loss)));
    };
    for (std::size_t i = ve.mu.cols; i < ve.mu.data.size(); ++i)
      check(&ve.mu.data[i], g.d_mu.data[i]);
    for (std::size_t i = 1; i < ve.log_alpha.size(); ++i)
      check(&ve.log_alpha[i], g.d_log_alpha[i]);
    for (std::size_t i = 0; i < inst.params.hidden_w.data.size(); ++i)
      check(&inst.params.hidden_w.data[i], g.d_params.d_hidden_w.data[i]);
    for (std::size_t i = 0; i < inst.params.hidden_b.size(); ++i)
      check(&inst.params.hidden_b[i], g.d_params.d_hidden_b[i]);
    for (std::size_t i = 0; i < inst.params.output_w.data.size(); ++i)
      check(&inst.params.output_w.data[i], g.d_params.d_output_w.data[i]);
    for (std::size_t i = 0; i < inst.params.output_b.size(); ++i)
      check(&inst.params.output_b[i], g.d_params.d_output_b[i]);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("select_vocab thresholds and monotonicity") {
  auto ve = small_ve(6);
  auto full = select_vocab(ve, std::exp(9.0));
  for (std::size_t i = 1; i < full.size(); ++i) CHECK(full[i] == 1);
  CHECK(full[0] == 0);
  auto none = select_vocab(ve, std::exp(-8.0));
  for (std::size_t i = 0; i < none.size(); ++i) CHECK(none[i] == 0);
  CHECK_THROWS(select_vocab(ve, 0.0));

  // monotone in the threshold
  auto prev = select_vocab(ve, std::exp(-8.0));
  for (double t = -7.5; t <= 8.5; t += 0.5) {
    auto cur = select_vocab(ve, std::exp(t));
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (prev[i]) CHECK(cur[i]);
    prev = cur;
  }
}

TEST_CASE("scores_from_alpha ranking and threshold equivalence") {
  std::vector<std::vector<Token>> docs{{"aa", "bb", "bb", "cc", "dd"}};
  auto vocab = build_vocabulary(docs, 1);
  VariationalEmbedding ve;
  ve.mu = Matrix(5, 1);
  ve.log_alpha = {0.0, -5.0, 3.0, 1.0, -2.0};
  auto scores = scores_from_alpha(ve, vocab);
  // lowest log_alpha first
  CHECK(scores.ranking.front() == vocab.index_of("bb"));

  // budget-k prefixes equal threshold sweeps at the k-th smallest alpha
  std::vector<double> sorted_la;
  for (std::size_t i = 1; i < ve.log_alpha.size(); ++i)
    sorted_la.push_back(ve.log_alpha[i]);
  std::sort(sorted_la.begin(), sorted_la.end());
  for (int k = 1; k <= 4; ++k) {
    auto prefix = prefix_budget(scores, k);
    double threshold = k < 4 ? 0.5 * (sorted_la[k - 1] + sorted_la[k]) : 9.0;
    auto swept = select_vocab(ve, std::exp(threshold));
    CHECK(prefix == swept);
  }
}

namespace {
struct TinyPlanted {
  LabeledCorpus train;
  Vocabulary vocab;
  std::vector<std::uint8_t> is_signature;  // by index
};

TinyPlanted tiny_planted(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.keywords_per_class = 2;
  spec.noise_vocab = 20;
  spec.docs_per_class = 40;
  spec.doc_len = 10;
  spec.noise_rate = 0.5;
  auto synth = make_synthetic(spec, seed);
  std::vector<std::vector<Token>> token_docs;
  for (const auto& [tokens, label] : synth.corpus.documents)
    token_docs.push_back(tokens);
  TinyPlanted out;
  out.vocab = build_vocabulary(token_docs, 1);
  out.train = encode_corpus(synth.corpus, out.vocab);
  out.is_signature.assign(static_cast<std::size_t>(out.vocab.size()) + 1, 0);
  for (const auto& cls : synth.signature_words)
    for (const auto& w : cls) {
      int idx = out.vocab.index_of(w);
      if (idx > 0) out.is_signature[static_cast<std::size_t>(idx)] = 1;
    }
  return out;
}
}  // namespace

TEST_CASE("train_vvd: zero epochs keeps log_alpha at the initial -3") {
  auto data = tiny_planted(5);
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 8;
  cfg.epochs = 0;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  for (std::size_t i = 1; i < result.ve.log_alpha.size(); ++i)
    CHECK(result.ve.log_alpha[i] == -3.0);
  CHECK(result.log.epochs.empty());
}

TEST_CASE("train_vvd is deterministic given seeds") {
  auto data = tiny_planted(5);
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 8;
  cfg.epochs = 3;
  cfg.seed = 13;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  elbo.noise_seed = 13;
  auto a = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  auto b = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  CHECK(a.ve.mu.data == b.ve.mu.data);
  CHECK(a.ve.log_alpha == b.ve.log_alpha);
}

TEST_CASE("train_vvd keeps log_alpha clamped and null row zero") {
  auto data = tiny_planted(6);
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 8;
  cfg.epochs = 6;
  cfg.seed = 1;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  for (std::size_t i = 1; i < result.ve.log_alpha.size(); ++i) {
    CHECK(result.ve.log_alpha[i] >= VariationalEmbedding::kLogAlphaMin);
    CHECK(result.ve.log_alpha[i] <= VariationalEmbedding::kLogAlphaMax);
  }
  for (double v : result.ve.mu.row(0)) CHECK(v == 0.0);
}

TEST_CASE("train_vvd separates signature words from noise words") {
  auto data = tiny_planted(7);
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 16;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 16;
  cfg.epochs = 40;
  cfg.seed = 7;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  elbo.noise_seed = 7;
  auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  double sig_sum = 0.0, noise_sum = 0.0;
  int sig_n = 0, noise_n = 0;
  for (int i = 1; i <= data.vocab.size(); ++i) {
    if (data.is_signature[static_cast<std::size_t>(i)]) {
      sig_sum += result.ve.log_alpha[static_cast<std::size_t>(i)];
      ++sig_n;
    } else {
      noise_sum += result.ve.log_alpha[static_cast<std::size_t>(i)];
      ++noise_n;
    }
  }
  CHECK(sig_sum / sig_n < noise_sum / noise_n);
}

namespace {
struct BigPlanted {
  LabeledCorpus train;
  Vocabulary vocab;
  std::vector<std::uint8_t> is_signature;
};

BigPlanted big_planted(std::uint64_t seed, int doc_len) {
  SyntheticSpec spec;
  spec.num_classes = 5;
  spec.keywords_per_class = 10;
  spec.noise_vocab = 1000;
  spec.docs_per_class = 200;
  spec.doc_len = doc_len;
  spec.noise_rate = 0.5;
  auto synth = make_synthetic(spec, seed);
  std::vector<std::vector<Token>> token_docs;
  for (const auto& [tokens, label] : synth.corpus.documents)
    token_docs.push_back(tokens);
  BigPlanted out;
  out.vocab = build_vocabulary(token_docs, 1);
  out.train = encode_corpus(synth.corpus, out.vocab);
  out.is_signature.assign(static_cast<std::size_t>(out.vocab.size()) + 1, 0);
  for (const auto& cls : synth.signature_words)
    for (const auto& w : cls)
      if (int idx = out.vocab.index_of(w); idx > 0)
        out.is_signature[static_cast<std::size_t>(idx)] = 1;
  return out;
}
}  // namespace

TEST_CASE("sustained KL pressure opens a >=2 nat signature/noise gap") {
  auto data = big_planted(2, 10);
  TrainConfig cfg;
  cfg.embedding_dim = 16;
  cfg.hidden_dim = 32;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 16;
  cfg.epochs = 150;
  cfg.seed = 2;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  elbo.noise_seed = 2;
  elbo.kl_scale = 0.3;
  elbo.warmup_epochs = 50;
  auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  double sig = 0.0, noise = 0.0;
  int sig_n = 0, noise_n = 0;
  for (int i = 1; i <= data.vocab.size(); ++i) {
    double la = result.ve.log_alpha[static_cast<std::size_t>(i)];
    if (data.is_signature[static_cast<std::size_t>(i)]) {
      sig += la;
      ++sig_n;
    } else {
      noise += la;
      ++noise_n;
    }
  }
  CHECK(noise / noise_n - sig / sig_n >= 2.0);
}

TEST_CASE("vvd curve dominates the frequency curve at budget K*C") {
  auto data = big_planted(1, 30);
  TrainConfig cfg;
  cfg.embedding_dim = 16;
  cfg.hidden_dim = 32;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 64;
  cfg.epochs = 60;
  cfg.seed = 1;
  ElboConfig elbo;
  elbo.dataset_size = data.train.documents.size();
  elbo.noise_seed = 1;
  elbo.kl_scale = 0.3;
  auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
  auto eval = [&](const std::vector<std::uint8_t>& active) {
    return evaluate(data.train, result.ve.mu, result.params, &active);
  };
  auto vvd_scores = scores_from_alpha(result.ve, data.vocab);
  auto freq_scores = frequency_scores(data.vocab);
  const int budget = 50;  // K*C
  CHECK(eval(prefix_budget(vvd_scores, budget)) >
        eval(prefix_budget(freq_scores, budget)));
}

TEST_CASE("stronger KL pressure raises the mean of log_alpha") {
  auto run = [&](double kl_scale, std::uint64_t seed) {
    auto data = tiny_planted(seed);
    TrainConfig cfg;
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 8;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 16;
    cfg.epochs = 30;
    cfg.seed = seed;
    ElboConfig elbo;
    elbo.dataset_size = data.train.documents.size();
    elbo.noise_seed = seed;
    elbo.kl_scale = kl_scale;
    auto result = train_vvd(data.train, nullptr, data.vocab.size(), cfg, elbo);
    return std::accumulate(result.ve.log_alpha.begin() + 1,
                           result.ve.log_alpha.end(), 0.0);
  };
  double weak = 0.0, strong = 0.0;
  for (std::uint64_t seed : {31, 32, 33}) {
    weak += run(0.0, seed);  // no KL pressure: log_alpha only drifts
    strong += run(1.0, seed);
  }
  CHECK(strong / 3.0 > weak / 3.0);
}

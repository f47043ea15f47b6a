#include "vocaprune/vvd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vocaprune {

namespace {
constexpr double kK1 = 0.63576;
constexpr double kK2 = 1.87320;
constexpr double kK3 = 1.48695;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace

double alpha_from_p(double p) {
  if (p < 0.0 || p >= 1.0) throw Error("alpha_from_p: p must be in [0, 1)");
  return p / (1.0 - p);
}

double kl_per_weight(double log_alpha) {
  // 0.5*log(1 + 1/alpha) = 0.5*log1p(exp(-log_alpha))
  return -kK1 * sigmoid(kK2 + kK3 * log_alpha) +
         0.5 * std::log1p(std::exp(-log_alpha)) + kK1;
}

double kl_per_weight_grad(double log_alpha) {
  double s = sigmoid(kK2 + kK3 * log_alpha);
  return -kK1 * kK3 * s * (1.0 - s) - 0.5 * sigmoid(-log_alpha);
}

Matrix sample_embedding(const VariationalEmbedding& ve, const Matrix& eps) {
  if (eps.rows != ve.mu.rows || eps.cols != ve.mu.cols)
    throw Error("sample_embedding: eps shape mismatch");
  Matrix b(ve.mu.rows, ve.mu.cols);
  for (std::size_t i = 1; i < ve.mu.rows; ++i) {
    const double sd = std::sqrt(std::exp(ve.log_alpha[i]));
    auto mu = ve.mu.row(i);
    auto e = eps.row(i);
    auto out = b.row(i);
    for (std::size_t j = 0; j < ve.mu.cols; ++j)
      out[j] = mu[j] + sd * std::fabs(mu[j]) * e[j];
  }
  return b;
}

double elbo_loss(const std::vector<std::pair<std::vector<int>, int>>& batch,
                 const VariationalEmbedding& ve, const ClassifierParams& params,
                 const Matrix& eps, double kl_scale, std::size_t dataset_size,
                 ElboGradients* grads) {
  if (batch.empty()) throw Error("elbo_loss: empty batch");
  if (dataset_size == 0) throw Error("elbo_loss: dataset_size must be positive");
  const std::size_t m = batch.size();
  const std::size_t D = ve.mu.cols;
  const int V = ve.vocab_size();

  Matrix b = sample_embedding(ve, eps);
  Matrix d_b;
  if (grads) {
    d_b = Matrix(ve.mu.rows, D);
    grads->d_mu = Matrix(ve.mu.rows, D);
    grads->d_log_alpha.assign(ve.log_alpha.size(), 0.0);
    grads->d_params.d_hidden_w = Matrix(params.hidden_w.rows, params.hidden_w.cols);
    grads->d_params.d_hidden_b.assign(params.hidden_b.size(), 0.0);
    grads->d_params.d_output_w = Matrix(params.output_w.rows, params.output_w.cols);
    grads->d_params.d_output_b.assign(params.output_b.size(), 0.0);
  }

  double data_loss = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (const auto& [doc, label] : batch) {
    ForwardCache cache = forward(doc, b, params);
    data_loss += cross_entropy_loss(cache.logits, label);
    if (grads) {
      Gradients g = backward(cache, label, params);
      for (double& v : g.d_pooled) v *= inv_m;
      accumulate_embedding_grad(cache, g.d_pooled, d_b);
      for (std::size_t i = 0; i < g.d_hidden_w.data.size(); ++i)
        grads->d_params.d_hidden_w.data[i] += g.d_hidden_w.data[i] * inv_m;
      for (std::size_t i = 0; i < g.d_hidden_b.size(); ++i)
        grads->d_params.d_hidden_b[i] += g.d_hidden_b[i] * inv_m;
      for (std::size_t i = 0; i < g.d_output_w.data.size(); ++i)
        grads->d_params.d_output_w.data[i] += g.d_output_w.data[i] * inv_m;
      for (std::size_t i = 0; i < g.d_output_b.size(); ++i)
        grads->d_params.d_output_b[i] += g.d_output_b[i] * inv_m;
    }
  }
  data_loss *= inv_m;

  const double kl_coeff = kl_scale * static_cast<double>(m) /
                          static_cast<double>(dataset_size) *
                          static_cast<double>(D);
  double kl_sum = 0.0;
  for (int i = 1; i <= V; ++i)
    kl_sum += kl_per_weight(ve.log_alpha[static_cast<std::size_t>(i)]);

  if (grads) {
    for (std::size_t i = 1; i < ve.mu.rows; ++i) {
      const double sd = std::sqrt(std::exp(ve.log_alpha[i]));
      auto mu = ve.mu.row(i);
      auto e = eps.row(i);
      auto db = d_b.row(i);
      auto dmu = grads->d_mu.row(i);
      double dla = 0.0;
      for (std::size_t j = 0; j < D; ++j) {
        // B = mu + sd*|mu|*eps; dB/dmu = 1 + sd*sign(mu)*eps,
        // dB/dlog_alpha = 0.5*sd*|mu|*eps.
        dmu[j] = db[j] * (1.0 + sd * sign(mu[j]) * e[j]);
        dla += db[j] * 0.5 * sd * std::fabs(mu[j]) * e[j];
      }
      grads->d_log_alpha[i] = dla + kl_coeff * kl_per_weight_grad(ve.log_alpha[i]);
    }
  }
  return data_loss + kl_coeff * kl_sum;
}

VvdResult train_vvd(const LabeledCorpus& train, const LabeledCorpus* valid,
                    int vocab_size, const TrainConfig& cfg, const ElboConfig& elbo,
                    const Matrix* init) {
  if (train.documents.empty()) throw Error("train split is empty");
  const std::size_t N =
      elbo.dataset_size ? elbo.dataset_size : train.documents.size();

  VvdResult out;
  Rng init_rng(mix_seed(cfg.seed, 0x1217ULL));
  if (init) {
    if (static_cast<int>(init->rows) != vocab_size + 1)
      throw Error("train_vvd: init embedding has wrong row count");
    out.ve.mu = *init;
  } else {
    out.ve.mu = init_embedding(vocab_size, cfg.embedding_dim, init_rng);
  }
  out.ve.log_alpha.assign(static_cast<std::size_t>(vocab_size) + 1,
                          VariationalEmbedding::kLogAlphaInit);
  out.params = init_params(static_cast<int>(out.ve.mu.cols), cfg.hidden_dim,
                           train.num_classes, init_rng);

  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  std::vector<std::size_t> order(train.documents.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch =
      (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::uint64_t global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x50FF1EULL, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    std::size_t step_in_epoch = 0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++step_in_epoch, ++global_step) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::pair<std::vector<int>, int>> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k)
        batch.push_back(train.documents[order[k]]);

      Rng noise_rng(mix_seed(elbo.noise_seed, 0xE125ULL, global_step));
      Matrix eps(out.ve.mu.rows, out.ve.mu.cols);
      for (double& v : eps.data) v = noise_rng.next_normal();

      double warm = 1.0;
      if (elbo.warmup_epochs > 0) {
        double progress = (static_cast<double>(epoch) +
                           static_cast<double>(step_in_epoch) /
                               static_cast<double>(steps_per_epoch)) /
                          static_cast<double>(elbo.warmup_epochs);
        warm = std::min(1.0, progress);
      }

      ElboGradients g;
      double loss = elbo_loss(batch, out.ve, out.params, eps,
                              elbo.kl_scale * warm, N, &g);
      if (!std::isfinite(loss)) throw Error("VVD training diverged: non-finite loss");
      if (cfg.gradient_clip_norm) {
        double sq = 0.0;
        for (double v : g.d_mu.data) sq += v * v;
        for (double v : g.d_log_alpha) sq += v * v;
        for (double v : g.d_params.d_hidden_w.data) sq += v * v;
        for (double v : g.d_params.d_hidden_b) sq += v * v;
        for (double v : g.d_params.d_output_w.data) sq += v * v;
        for (double v : g.d_params.d_output_b) sq += v * v;
        double norm = std::sqrt(sq);
        if (norm > *cfg.gradient_clip_norm && norm > 0.0) {
          double scale = *cfg.gradient_clip_norm / norm;
          for (double& v : g.d_mu.data) v *= scale;
          for (double& v : g.d_log_alpha) v *= scale;
          for (double& v : g.d_params.d_hidden_w.data) v *= scale;
          for (double& v : g.d_params.d_hidden_b) v *= scale;
          for (double& v : g.d_params.d_output_w.data) v *= scale;
          for (double& v : g.d_params.d_output_b) v *= scale;
        }
      }

      opt.step(out.ve.mu.data, g.d_mu.data, 0);
      opt.step(out.ve.log_alpha, g.d_log_alpha, 1);
      opt.step(out.params.hidden_w.data, g.d_params.d_hidden_w.data, 2);
      opt.step(out.params.hidden_b, g.d_params.d_hidden_b, 3);
      opt.step(out.params.output_w.data, g.d_params.d_output_w.data, 4);
      opt.step(out.params.output_b, g.d_params.d_output_b, 5);

      for (std::size_t i = 1; i < out.ve.log_alpha.size(); ++i)
        out.ve.log_alpha[i] =
            std::clamp(out.ve.log_alpha[i], VariationalEmbedding::kLogAlphaMin,
                       VariationalEmbedding::kLogAlphaMax);

      epoch_loss += loss * static_cast<double>(end - start);
      seen += end - start;
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(seen);
    stats.val_accuracy = valid ? evaluate(*valid, out.ve.mu, out.params) : 0.0;
    out.log.epochs.push_back(stats);
  }
  return out;
}

std::vector<std::uint8_t> select_vocab(const VariationalEmbedding& ve,
                                       double alpha_threshold) {
  if (!(alpha_threshold > 0.0)) throw Error("select_vocab: threshold must be > 0");
  const double log_t = std::log(alpha_threshold);
  std::vector<std::uint8_t> active(ve.log_alpha.size(), 0);
  for (std::size_t i = 1; i < ve.log_alpha.size(); ++i)
    active[i] = ve.log_alpha[i] < log_t ? 1 : 0;
  return active;
}

SelectionScores scores_from_alpha(const VariationalEmbedding& ve,
                                  const Vocabulary& vocab) {
  std::vector<double> scores(ve.log_alpha.size(), 0.0);
  for (std::size_t i = 1; i < scores.size(); ++i) scores[i] = -ve.log_alpha[i];
  return make_selection_scores("vvd", std::move(scores), vocab);
}

}  // namespace vocaprune

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vocaprune/classifier.hpp"
#include "vocaprune/common.hpp"
#include "vocaprune/corpus.hpp"
#include "vocaprune/selection.hpp"

namespace vocaprune {

// Variational vocabulary dropout: each embedding row i carries a learned
// Gaussian multiplicative noise with tied variance/mean ratio alpha_i.
// Rows with large alpha are expendable and get pruned first.

struct VariationalEmbedding {
  Matrix mu;                      // (V+1) x D, row 0 zero
  std::vector<double> log_alpha;  // V+1, entry 0 ignored

  static constexpr double kLogAlphaMin = -8.0;
  static constexpr double kLogAlphaMax = 8.0;
  static constexpr double kLogAlphaInit = -3.0;

  int vocab_size() const { return static_cast<int>(mu.rows) - 1; }
};

struct ElboConfig {
  int warmup_epochs = 1;     // linear KL ramp from 0 over this many epochs
  double kl_scale = 1.0;     // final KL coefficient
  std::size_t dataset_size = 0;
  std::uint64_t noise_seed = 0;
};

// alpha = p / (1 - p); the variance/mean ratio equivalent to Bernoulli
// dropout probability p. Throws for p outside [0, 1).
double alpha_from_p(double p);

// Per-weight KL(posterior || log-uniform prior), the sigmoid-polynomial fit
//   -k1*sigmoid(k2 + k3*log a) + 0.5*log(1 + 1/a) + k1
// with k1=0.63576, k2=1.87320, k3=1.48695. Non-negative and strictly
// decreasing in log alpha on the clamped domain. Total KL for row i is
// D * kl_per_weight(log_alpha[i]) since alpha is tied across the row.
double kl_per_weight(double log_alpha);
double kl_per_weight_grad(double log_alpha);

// Reparameterized rows: B_ij = mu_ij + sqrt(alpha_i)*|mu_ij|*eps_ij with the
// given standard-normal eps. Row 0 stays zero.
Matrix sample_embedding(const VariationalEmbedding& ve, const Matrix& eps);

struct ElboGradients {
  Matrix d_mu;
  std::vector<double> d_log_alpha;
  Gradients d_params;  // d_pooled unused
};

// Negative-ELBO batch loss under ONE fixed noise draw:
//   mean cross-entropy at B(eps)  +  kl_scale * (m/N) * D * sum_i kl(log_alpha_i)
// Gradients reach mu through both the mean and noise paths and log_alpha
// through the noise path and the KL term.
double elbo_loss(const std::vector<std::pair<std::vector<int>, int>>& batch,
                 const VariationalEmbedding& ve, const ClassifierParams& params,
                 const Matrix& eps, double kl_scale, std::size_t dataset_size,
                 ElboGradients* grads);

struct VvdResult {
  VariationalEmbedding ve;
  ClassifierParams params;
  TrainLog log;
};

// ELBO training with the classifier's optimizer. log_alpha starts at -3
// everywhere and is clamped to [-8, 8] after every step. `init` seeds mu from
// a pretrained embedding when given.
VvdResult train_vvd(const LabeledCorpus& train, const LabeledCorpus* valid,
                    int vocab_size, const TrainConfig& cfg, const ElboConfig& elbo,
                    const Matrix* init = nullptr);

// Active mask over [0, V]: rows with alpha_i < alpha_threshold. Index 0 is
// never active.
std::vector<std::uint8_t> select_vocab(const VariationalEmbedding& ve,
                                       double alpha_threshold);

// score_i = -log_alpha_i, so a budget-k prefix of the ranking equals a
// threshold sweep over alpha. Ties fall back to corpus frequency then word.
SelectionScores scores_from_alpha(const VariationalEmbedding& ve,
                                  const Vocabulary& vocab);

}  // namespace vocaprune

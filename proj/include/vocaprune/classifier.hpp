#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocaprune/common.hpp"
#include "vocaprune/corpus.hpp"

namespace vocaprune {

// Mean-pooled embeddings -> ReLU hidden layer -> softmax. Gradients are
// hand-derived; no autodiff anywhere in this project.

struct ClassifierParams {
  Matrix hidden_w;             // H x D
  std::vector<double> hidden_b;  // H
  Matrix output_w;             // C x H
  std::vector<double> output_b;  // C
};

struct TrainConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  enum class Optimizer { kSgd, kAdam } optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;
  double l2_coefficient = 0.0;
  std::optional<double> gradient_clip_norm;
};

struct ForwardCache {
  std::vector<int> doc;
  std::vector<double> pooled;      // D
  std::vector<double> hidden_pre;  // H
  std::vector<double> hidden;      // H, post-ReLU
  std::vector<double> logits;      // C
};

struct Gradients {
  Matrix d_hidden_w;
  std::vector<double> d_hidden_b;
  Matrix d_output_w;
  std::vector<double> d_output_b;
  // Gradient to the pooled mean; callers scatter it to embedding rows.
  std::vector<double> d_pooled;
};

// Embedding rows are looked up in `emb` ((V+1) x D, row 0 the null row).
ForwardCache forward(std::span<const int> doc, const Matrix& emb,
                     const ClassifierParams& params);

double cross_entropy_loss(std::span<const double> logits, int label);

// Exact gradients of cross_entropy_loss(forward(...), label).
Gradients backward(const ForwardCache& cache, int label,
                   const ClassifierParams& params);

// Scatters d_pooled into per-row embedding gradients; row 0 is skipped so the
// null row never trains.
void accumulate_embedding_grad(const ForwardCache& cache,
                               std::span<const double> d_pooled, Matrix& d_emb);

// (V+1) x D, row 0 zero, uniform in [-1/sqrt(D), 1/sqrt(D)].
Matrix init_embedding(int vocab_size, int embedding_dim, Rng& rng);
ClassifierParams init_params(int embedding_dim, int hidden_dim, int num_classes,
                             Rng& rng);

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};
struct TrainLog {
  std::vector<EpochStats> epochs;
};

// Per-tensor Adam state; SGD uses none.
struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

class Optimizer {
 public:
  Optimizer(TrainConfig::Optimizer kind, double lr) : kind_(kind), lr_(lr) {}
  // Applies one update to `w` given gradient `g`. `slot` selects the Adam
  // state for this tensor; states are created on first use.
  void step(std::span<double> w, std::span<const double> g, int slot);

 private:
  TrainConfig::Optimizer kind_;
  double lr_;
  std::vector<AdamState> states_;
};

// Plain cross-entropy training; with group_lasso_gamma > 0 adds
// gamma * sum_i ||emb_row_i||_2 over vocabulary rows to every batch loss.
// Deterministic given cfg.seed. Throws on non-finite loss.
TrainLog train_classifier(const LabeledCorpus& train, const LabeledCorpus* valid,
                          Matrix& emb, ClassifierParams& params,
                          const TrainConfig& cfg, double group_lasso_gamma = 0.0);

// Fraction of documents whose argmax logit equals the label; ties broken by
// lowest class index. Documents are re-encoded under `active` when given.
double evaluate(const LabeledCorpus& split, const Matrix& emb,
                const ClassifierParams& params,
                const std::vector<std::uint8_t>* active = nullptr);

// Group-lasso penalty value and subgradient (0 for exactly-zero rows),
// over rows 1..V of the embedding.
double group_lasso_penalty(const Matrix& emb);
void add_group_lasso_grad(const Matrix& emb, double gamma, Matrix& d_emb);

}  // namespace vocaprune

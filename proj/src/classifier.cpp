#include "vocaprune/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vocaprune {

ForwardCache forward(std::span<const int> doc, const Matrix& emb,
                     const ClassifierParams& params) {
  const std::size_t D = emb.cols;
  const std::size_t H = params.hidden_w.rows;
  const std::size_t C = params.output_w.rows;
  if (params.hidden_w.cols != D || params.output_w.cols != H)
    throw Error("forward: dimension mismatch");

  ForwardCache cache;
  cache.doc.assign(doc.begin(), doc.end());
  cache.pooled.assign(D, 0.0);
  if (!doc.empty()) {
    for (int idx : doc) {
      auto row = emb.row(static_cast<std::size_t>(idx));
      for (std::size_t d = 0; d < D; ++d) cache.pooled[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(doc.size());
    for (std::size_t d = 0; d < D; ++d) cache.pooled[d] *= inv;
  }

  cache.hidden_pre.assign(H, 0.0);
  cache.hidden.assign(H, 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    double acc = params.hidden_b[i];
    auto wrow = params.hidden_w.row(i);
    for (std::size_t d = 0; d < D; ++d) acc += wrow[d] * cache.pooled[d];
    cache.hidden_pre[i] = acc;
    cache.hidden[i] = acc > 0.0 ? acc : 0.0;
  }

  cache.logits.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = params.output_b[c];
    auto wrow = params.output_w.row(c);
    for (std::size_t i = 0; i < H; ++i) acc += wrow[i] * cache.hidden[i];
    cache.logits[c] = acc;
  }
  return cache;
}

double cross_entropy_loss(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw Error("cross_entropy_loss: label out of range");
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return std::log(sum) + mx - logits[label];
}

Gradients backward(const ForwardCache& cache, int label,
                   const ClassifierParams& params) {
  const std::size_t D = params.hidden_w.cols;
  const std::size_t H = params.hidden_w.rows;
  const std::size_t C = params.output_w.rows;

  Gradients g;
  g.d_hidden_w = Matrix(H, D);
  g.d_hidden_b.assign(H, 0.0);
  g.d_output_w = Matrix(C, H);
  g.d_output_b.assign(C, 0.0);
  g.d_pooled.assign(D, 0.0);

  // dL/dz = softmax(z) - onehot(y)
  std::vector<double> dz(C);
  double mx = *std::max_element(cache.logits.begin(), cache.logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    dz[c] = std::exp(cache.logits[c] - mx);
    sum += dz[c];
  }
  for (std::size_t c = 0; c < C; ++c) dz[c] /= sum;
  dz[static_cast<std::size_t>(label)] -= 1.0;

  std::vector<double> dh(H, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    auto gw = g.d_output_w.row(c);
    auto w = params.output_w.row(c);
    for (std::size_t i = 0; i < H; ++i) {
      gw[i] = dz[c] * cache.hidden[i];
      dh[i] += dz[c] * w[i];
    }
    g.d_output_b[c] = dz[c];
  }

  for (std::size_t i = 0; i < H; ++i) {
    double dpre = cache.hidden_pre[i] > 0.0 ? dh[i] : 0.0;
    g.d_hidden_b[i] = dpre;
    auto gw = g.d_hidden_w.row(i);
    auto w = params.hidden_w.row(i);
    for (std::size_t d = 0; d < D; ++d) {
      gw[d] = dpre * cache.pooled[d];
      g.d_pooled[d] += dpre * w[d];
    }
  }
  return g;
}

void accumulate_embedding_grad(const ForwardCache& cache,
                               std::span<const double> d_pooled, Matrix& d_emb) {
  if (cache.doc.empty()) return;
  const double inv = 1.0 / static_cast<double>(cache.doc.size());
  for (int idx : cache.doc) {
    if (idx == Vocabulary::kNullIndex) continue;
    auto row = d_emb.row(static_cast<std::size_t>(idx));
    for (std::size_t d = 0; d < d_pooled.size(); ++d) row[d] += d_pooled[d] * inv;
  }
}

Matrix init_embedding(int vocab_size, int embedding_dim, Rng& rng) {
  Matrix emb(static_cast<std::size_t>(vocab_size) + 1,
             static_cast<std::size_t>(embedding_dim));
  const double bound = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
  for (std::size_t i = 1; i < emb.rows; ++i) {
    auto row = emb.row(i);
    for (auto& w : row) w = (2.0 * rng.next_double() - 1.0) * bound;
  }
  return emb;
}

ClassifierParams init_params(int embedding_dim, int hidden_dim, int num_classes,
                             Rng& rng) {
  ClassifierParams p;
  p.hidden_w = Matrix(hidden_dim, embedding_dim);
  p.hidden_b.assign(hidden_dim, 0.0);
  p.output_w = Matrix(num_classes, hidden_dim);
  p.output_b.assign(num_classes, 0.0);
  const double hb = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
  for (auto& w : p.hidden_w.data) w = (2.0 * rng.next_double() - 1.0) * hb;
  const double ob = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& w : p.output_w.data) w = (2.0 * rng.next_double() - 1.0) * ob;
  return p;
}

void Optimizer::step(std::span<double> w, std::span<const double> g, int slot) {
  if (kind_ == TrainConfig::Optimizer::kSgd) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
    return;
  }
  if (slot >= static_cast<int>(states_.size()))
    states_.resize(static_cast<std::size_t>(slot) + 1);
  AdamState& s = states_[static_cast<std::size_t>(slot)];
  if (s.m.empty()) {
    s.m.assign(w.size(), 0.0);
    s.v.assign(w.size(), 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++s.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr_ * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + eps);
  }
}

double group_lasso_penalty(const Matrix& emb) {
  double total = 0.0;
  for (std::size_t i = 1; i < emb.rows; ++i) {
    double sq = 0.0;
    for (double w : emb.row(i)) sq += w * w;
    total += std::sqrt(sq);
  }
  return total;
}

void add_group_lasso_grad(const Matrix& emb, double gamma, Matrix& d_emb) {
  for (std::size_t i = 1; i < emb.rows; ++i) {
    double sq = 0.0;
    auto row = emb.row(i);
    for (double w : row) sq += w * w;
    if (sq == 0.0) continue;  // subgradient 0 at the kink
    const double inv_norm = 1.0 / std::sqrt(sq);
    auto grow = d_emb.row(i);
    for (std::size_t d = 0; d < emb.cols; ++d) grow[d] += gamma * row[d] * inv_norm;
  }
}

namespace {

void clip_global_norm(std::vector<std::span<double>> grads, double max_norm) {
  double sq = 0.0;
  for (auto g : grads)
    for (double v : g) sq += v * v;
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (auto g : grads)
    for (double& v : g) v *= scale;
}

}  // namespace

TrainLog train_classifier(const LabeledCorpus& train, const LabeledCorpus* valid,
                          Matrix& emb, ClassifierParams& params,
                          const TrainConfig& cfg, double group_lasso_gamma) {
  if (train.documents.empty()) throw Error("train split is empty");
  TrainLog log;
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  Matrix d_emb(emb.rows, emb.cols);

  std::vector<std::size_t> order(train.documents.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x50FF1EULL, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::size_t m = end - start;
      d_emb.fill(0.0);
      Gradients acc;
      acc.d_hidden_w = Matrix(params.hidden_w.rows, params.hidden_w.cols);
      acc.d_hidden_b.assign(params.hidden_b.size(), 0.0);
      acc.d_output_w = Matrix(params.output_w.rows, params.output_w.cols);
      acc.d_output_b.assign(params.output_b.size(), 0.0);
      double batch_loss = 0.0;

      for (std::size_t k = start; k < end; ++k) {
        const auto& [doc, label] = train.documents[order[k]];
        ForwardCache cache = forward(doc, emb, params);
        batch_loss += cross_entropy_loss(cache.logits, label);
        Gradients g = backward(cache, label, params);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < g.d_pooled.size(); ++i) g.d_pooled[i] *= inv_m;
        accumulate_embedding_grad(cache, g.d_pooled, d_emb);
        for (std::size_t i = 0; i < acc.d_hidden_w.data.size(); ++i)
          acc.d_hidden_w.data[i] += g.d_hidden_w.data[i] * inv_m;
        for (std::size_t i = 0; i < acc.d_hidden_b.size(); ++i)
          acc.d_hidden_b[i] += g.d_hidden_b[i] * inv_m;
        for (std::size_t i = 0; i < acc.d_output_w.data.size(); ++i)
          acc.d_output_w.data[i] += g.d_output_w.data[i] * inv_m;
        for (std::size_t i = 0; i < acc.d_output_b.size(); ++i)
          acc.d_output_b[i] += g.d_output_b[i] * inv_m;
      }
      batch_loss /= static_cast<double>(m);
      if (group_lasso_gamma > 0.0) {
        batch_loss += group_lasso_gamma * group_lasso_penalty(emb);
        add_group_lasso_grad(emb, group_lasso_gamma, d_emb);
      }
      if (cfg.l2_coefficient > 0.0) {
        for (std::size_t i = 0; i < params.hidden_w.data.size(); ++i)
          acc.d_hidden_w.data[i] += cfg.l2_coefficient * params.hidden_w.data[i];
        for (std::size_t i = 0; i < params.output_w.data.size(); ++i)
          acc.d_output_w.data[i] += cfg.l2_coefficient * params.output_w.data[i];
      }
      if (!std::isfinite(batch_loss))
        throw Error("training diverged: non-finite loss");
      // Row 0 never accumulates gradient, so the null row stays exactly zero.
      if (cfg.gradient_clip_norm)
        clip_global_norm({std::span<double>(d_emb.data),
                          std::span<double>(acc.d_hidden_w.data),
                          std::span<double>(acc.d_hidden_b),
                          std::span<double>(acc.d_output_w.data),
                          std::span<double>(acc.d_output_b)},
                         *cfg.gradient_clip_norm);

      opt.step(emb.data, d_emb.data, 0);
      opt.step(params.hidden_w.data, acc.d_hidden_w.data, 1);
      opt.step(params.hidden_b, acc.d_hidden_b, 2);
      opt.step(params.output_w.data, acc.d_output_w.data, 3);
      opt.step(params.output_b, acc.d_output_b, 4);

      epoch_loss += batch_loss * static_cast<double>(m);
      seen += m;
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(seen);
    stats.val_accuracy = valid ? evaluate(*valid, emb, params) : 0.0;
    log.epochs.push_back(stats);
  }
  return log;
}

double evaluate(const LabeledCorpus& split, const Matrix& emb,
                const ClassifierParams& params,
                const std::vector<std::uint8_t>* active) {
  if (split.documents.empty()) throw Error("evaluate: empty split");
  std::size_t correct = 0;
  std::vector<int> masked;
  for (const auto& [doc, label] : split.documents) {
    const std::vector<int>* use = &doc;
    if (active) {
      masked.assign(doc.begin(), doc.end());
      for (int& idx : masked)
        if (idx != 0 && !(*active)[static_cast<std::size_t>(idx)]) idx = 0;
      use = &masked;
    }
    ForwardCache cache = forward(*use, emb, params);
    int best = 0;
    for (std::size_t c = 1; c < cache.logits.size(); ++c)
      if (cache.logits[c] > cache.logits[best]) best = static_cast<int>(c);
    if (best == label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.documents.size());
}

}  // namespace vocaprune

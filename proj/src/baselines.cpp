#include "vocaprune/baselines.hpp"

#include <cmath>
#include <unordered_set>

namespace vocaprune {

SelectionScores frequency_scores(const Vocabulary& vocab) {
  const int V = vocab.size();
  if (V == 0) throw Error("frequency_scores: empty vocabulary");
  std::vector<double> scores(static_cast<std::size_t>(V) + 1, 0.0);
  for (int i = 1; i <= V; ++i)
    scores[static_cast<std::size_t>(i)] = static_cast<double>(vocab.count(i));
  return make_selection_scores("frequency", std::move(scores), vocab);
}

SelectionScores tfidf_scores(const std::vector<std::vector<Token>>& documents,
                             const Vocabulary& vocab, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw Error("tfidf_scores: lambda outside [0,1]");
  if (documents.empty()) throw Error("tfidf_scores: no documents");
  const int V = vocab.size();
  const double N = static_cast<double>(documents.size());

  std::vector<std::int64_t> tf(static_cast<std::size_t>(V) + 1, 0);
  std::vector<std::int64_t> df(static_cast<std::size_t>(V) + 1, 0);
  std::unordered_set<int> in_doc;
  for (const auto& doc : documents) {
    in_doc.clear();
    for (const auto& tok : doc) {
      int idx = vocab.index_of(tok);
      if (idx == 0) continue;
      ++tf[static_cast<std::size_t>(idx)];
      in_doc.insert(idx);
    }
    for (int idx : in_doc) ++df[static_cast<std::size_t>(idx)];
  }

  std::vector<double> scores(static_cast<std::size_t>(V) + 1, 0.0);
  for (int i = 1; i <= V; ++i) {
    auto ui = static_cast<std::size_t>(i);
    if (lambda == 1.0) {
      scores[ui] = static_cast<double>(tf[ui]);
    } else if (df[ui] == 0) {
      scores[ui] = 0.0;  // never seen: rank last rather than log(inf)
    } else {
      double idf = std::log(N / static_cast<double>(df[ui]));
      scores[ui] = std::pow(static_cast<double>(tf[ui]), lambda) *
                   std::pow(idf, 1.0 - lambda);
    }
  }
  return make_selection_scores("tfidf", std::move(scores), vocab);
}

GroupLassoResult train_group_lasso(const LabeledCorpus& train,
                                   const LabeledCorpus* valid,
                                   const Vocabulary& vocab, double gamma,
                                   const TrainConfig& cfg) {
  if (!(gamma > 0.0)) throw Error("train_group_lasso: gamma must be > 0");
  GroupLassoResult out;
  Rng rng(mix_seed(cfg.seed, 0x1217ULL));
  out.embedding = init_embedding(vocab.size(), cfg.embedding_dim, rng);
  out.params = init_params(cfg.embedding_dim, cfg.hidden_dim, train.num_classes, rng);
  out.log = train_classifier(train, valid, out.embedding, out.params, cfg, gamma);

  std::vector<double> norms(out.embedding.rows, 0.0);
  for (std::size_t i = 1; i < out.embedding.rows; ++i) {
    double sq = 0.0;
    for (double w : out.embedding.row(i)) sq += w * w;
    norms[i] = std::sqrt(sq);
  }
  out.scores = make_selection_scores("group_lasso", std::move(norms), vocab);
  return out;
}

}  // namespace vocaprune

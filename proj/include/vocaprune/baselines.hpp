#pragma once

#include "vocaprune/classifier.hpp"
#include "vocaprune/corpus.hpp"
#include "vocaprune/selection.hpp"

namespace vocaprune {

// score_i = corpus count of word i.
SelectionScores frequency_scores(const Vocabulary& vocab);

// score = tf(w)^lambda * (ln(N/n_w))^(1-lambda), tf = total count in the
// scoring corpus, N = number of documents, n_w = documents containing w.
// Words absent from the scoring corpus score 0.
SelectionScores tfidf_scores(const std::vector<std::vector<Token>>& documents,
                             const Vocabulary& vocab, double lambda);

struct GroupLassoResult {
  Matrix embedding;
  ClassifierParams params;
  SelectionScores scores;  // score_i = ||W_i||_2
  TrainLog log;
};

// Cross-entropy training with a row-norm penalty on the embedding; the row
// norms after training rank words for selection.
GroupLassoResult train_group_lasso(const LabeledCorpus& train,
                                   const LabeledCorpus* valid,
                                   const Vocabulary& vocab, double gamma,
                                   const TrainConfig& cfg);

}  // namespace vocaprune

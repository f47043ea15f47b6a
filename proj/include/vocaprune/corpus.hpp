#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vocaprune/common.hpp"

namespace vocaprune {

using Token = std::string;

struct EmptyVocabulary : Error {
  using Error::Error;
};
struct EmptyCorpus : Error {
  using Error::Error;
};
struct MalformedLine : Error {
  MalformedLine(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line_number;
};

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation.
// Total and deterministic; pieces that become empty are dropped.
std::vector<Token> tokenize(std::string_view text);

// Word <-> index map with frequency counts. Index 0 is the null token and is
// never assigned to a word; OOV and deselected words both map there.
class Vocabulary {
 public:
  static constexpr int kNullIndex = 0;

  int size() const { return static_cast<int>(index_to_word_.size()) - 1; }

  // 0 when the word is not in the vocabulary.
  int index_of(const std::string& word) const;
  const std::string& word(int index) const { return index_to_word_.at(index); }
  std::int64_t count(int index) const { return counts_.at(index); }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  // FNV-1a over the serialized index/word/count lines; stored in artifact
  // headers so mismatched vocabularies are caught instead of silently
  // mis-indexing.
  std::uint64_t content_hash() const;

  friend Vocabulary build_vocabulary(const std::vector<std::vector<Token>>& docs,
                                     std::int64_t min_count);

 private:
  std::unordered_map<std::string, int> word_to_index_;
  std::vector<std::string> index_to_word_{""};  // slot 0 reserved
  std::vector<std::int64_t> counts_{0};
};

// Indices assigned in descending count order, ties lexicographic.
// Throws EmptyVocabulary if nothing survives min_count.
Vocabulary build_vocabulary(const std::vector<std::vector<Token>>& docs,
                            std::int64_t min_count);

// In-vocabulary tokens map to their index, everything else to 0. When an
// active mask (size V+1) is given, indices outside it also map to 0.
std::vector<int> encode(const std::vector<Token>& doc, const Vocabulary& vocab,
                        const std::vector<std::uint8_t>* active = nullptr);

// Tokenized documents with dense class labels; produced by load_tsv or
// make_synthetic, before vocabulary encoding.
struct RawCorpus {
  std::vector<std::pair<std::vector<Token>, int>> documents;
  int num_classes = 0;
  std::vector<std::int64_t> label_table;  // dense index -> original label
  std::string split = "train";
};

// Encoded documents ready for training/evaluation.
struct LabeledCorpus {
  std::vector<std::pair<std::vector<int>, int>> documents;
  int num_classes = 0;
  std::string split = "train";
};

LabeledCorpus encode_corpus(const RawCorpus& raw, const Vocabulary& vocab,
                            const std::vector<std::uint8_t>* active = nullptr);

// One record per line: <integer label> TAB <text>. Labels are remapped to a
// dense [0, C) range (ascending original order); the table is retained.
// When label_table is given, it is used as-is and unknown labels are an error.
RawCorpus load_tsv(const std::filesystem::path& path, std::string split = "train",
                   const std::vector<std::int64_t>* label_table = nullptr);

struct SyntheticSpec {
  int num_classes = 2;
  int keywords_per_class = 1;
  int noise_vocab = 0;
  int docs_per_class = 10;
  int doc_len = 10;
  double noise_rate = 0.0;
};

struct SyntheticCorpus {
  RawCorpus corpus;
  std::vector<std::vector<Token>> signature_words;  // per class
};

// Planted-keyword generator. Each class-c document mixes class-c signature
// tokens with shared noise tokens (expected fraction noise_rate). The noise
// distribution is head-heavy and bursty: 90% of noise mass falls on the first
// min(30, M) noise words, and each document draws its head noise from a small
// per-document subset. Head noise words therefore out-rank signature words by
// raw frequency (fooling count-based selection) and carry high tf with
// inflated idf (fooling tf-idf), while staying label-independent.
SyntheticCorpus make_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               std::string split = "train");

}  // namespace vocaprune

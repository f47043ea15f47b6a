#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vocaprune/common.hpp"
#include "vocaprune/corpus.hpp"

namespace vocaprune {

// Per-word keep-priority scores produced by any selection algorithm.
// The ranking (score desc, corpus frequency desc, lexicographic) is fixed at
// construction so every prefix is a total deterministic function of the scores.
struct SelectionScores {
  std::string algorithm;
  std::vector<double> scores;  // size V+1, entry 0 unused
  std::vector<int> ranking;    // indices 1..V in keep order
};

SelectionScores make_selection_scores(std::string algorithm,
                                      std::vector<double> scores,
                                      const Vocabulary& vocab);

// Active mask for the top-`budget` indices of the ranking.
std::vector<std::uint8_t> prefix_budget(const SelectionScores& scores, int budget);

// Scores file: one `index TAB word TAB value` line per word in keep order,
// preceded by a header carrying the algorithm and vocabulary hash. For the
// vvd algorithm the value column is log_alpha (ascending); for everything
// else it is the raw score (descending).
void write_scores_file(const std::filesystem::path& path,
                       const SelectionScores& scores, const Vocabulary& vocab,
                       std::uint64_t vocab_hash);

// Throws when the stored vocabulary hash differs from expected_hash.
SelectionScores read_scores_file(const std::filesystem::path& path,
                                 const Vocabulary& vocab,
                                 std::uint64_t expected_hash);

}  // namespace vocaprune

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vocaprune/classifier.hpp"
#include "vocaprune/common.hpp"

namespace vocaprune {

// Self-describing textual model container. Doubles are written with 17
// significant digits so the write/read round trip is value-exact.
struct Checkpoint {
  std::string algorithm;  // vvd | frequency | tfidf | group_lasso
  std::uint64_t vocab_hash = 0;
  Matrix embedding;               // mu for vvd
  std::vector<double> log_alpha;  // empty unless algorithm == vvd
  ClassifierParams params;
  std::map<std::string, std::string> config;  // effective run config, echoed

  int vocab_size() const { return static_cast<int>(embedding.rows) - 1; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace vocaprune

#include "vocaprune/selection.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace vocaprune {

SelectionScores make_selection_scores(std::string algorithm,
                                      std::vector<double> scores,
                                      const Vocabulary& vocab) {
  const int V = vocab.size();
  if (static_cast<int>(scores.size()) != V + 1)
    throw Error("make_selection_scores: scores size must be V+1");
  for (int i = 1; i <= V; ++i)
    if (!std::isfinite(scores[static_cast<std::size_t>(i)]))
      throw Error("make_selection_scores: non-finite score for index " +
                  std::to_string(i));

  SelectionScores out;
  out.algorithm = std::move(algorithm);
  out.scores = std::move(scores);
  out.ranking.resize(static_cast<std::size_t>(V));
  std::iota(out.ranking.begin(), out.ranking.end(), 1);
  std::sort(out.ranking.begin(), out.ranking.end(), [&](int a, int b) {
    double sa = out.scores[static_cast<std::size_t>(a)];
    double sb = out.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    if (vocab.count(a) != vocab.count(b)) return vocab.count(a) > vocab.count(b);
    return vocab.word(a) < vocab.word(b);
  });
  return out;
}

std::vector<std::uint8_t> prefix_budget(const SelectionScores& scores, int budget) {
  const int V = static_cast<int>(scores.ranking.size());
  if (budget < 0 || budget > V) throw Error("prefix_budget: budget out of range");
  std::vector<std::uint8_t> active(static_cast<std::size_t>(V) + 1, 0);
  for (int k = 0; k < budget; ++k)
    active[static_cast<std::size_t>(scores.ranking[static_cast<std::size_t>(k)])] = 1;
  return active;
}

void write_scores_file(const std::filesystem::path& path,
                       const SelectionScores& scores, const Vocabulary& vocab,
                       std::uint64_t vocab_hash) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, vocab_hash);
  out << "# vocaprune-scores algorithm=" << scores.algorithm << " vocab_hash="
      << hash << '\n';
  const bool as_log_alpha = scores.algorithm == "vvd";
  char buf[40];
  for (int idx : scores.ranking) {
    double value = scores.scores[static_cast<std::size_t>(idx)];
    if (as_log_alpha) value = -value;
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << idx << '\t' << vocab.word(idx) << '\t' << buf << '\n';
  }
}

SelectionScores read_scores_file(const std::filesystem::path& path,
                                 const Vocabulary& vocab,
                                 std::uint64_t expected_hash) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vocaprune-scores ", 0) != 0)
    throw Error("not a vocaprune scores file: " + path.string());

  std::string algorithm;
  std::uint64_t stored_hash = 0;
  std::size_t apos = line.find("algorithm=");
  std::size_t hpos = line.find("vocab_hash=");
  if (apos == std::string::npos || hpos == std::string::npos)
    throw Error("bad scores header in " + path.string());
  algorithm = line.substr(apos + 10, line.find(' ', apos + 10) - apos - 10);
  stored_hash = std::stoull(line.substr(hpos + 11), nullptr, 16);
  if (stored_hash != expected_hash) {
    char want[24], got[24];
    std::snprintf(want, sizeof(want), "%016" PRIx64, expected_hash);
    std::snprintf(got, sizeof(got), "%016" PRIx64, stored_hash);
    throw Error("vocabulary hash mismatch: scores file " + path.string() +
                " has " + got + ", expected " + want);
  }

  const bool as_log_alpha = algorithm == "vvd";
  std::vector<double> scores(static_cast<std::size_t>(vocab.size()) + 1, 0.0);
  std::vector<std::uint8_t> seen(scores.size(), 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = line.rfind('\t');
    if (t1 == std::string::npos || t2 == t1)
      throw Error("bad scores row in " + path.string());
    int idx = std::stoi(line.substr(0, t1));
    if (idx < 1 || idx > vocab.size())
      throw Error("scores index out of range in " + path.string());
    double value = std::stod(line.substr(t2 + 1));
    scores[static_cast<std::size_t>(idx)] = as_log_alpha ? -value : value;
    seen[static_cast<std::size_t>(idx)] = 1;
  }
  for (int i = 1; i <= vocab.size(); ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw Error("scores file missing index " + std::to_string(i) + ": " +
                  path.string());
  return make_selection_scores(algorithm, std::move(scores), vocab);
}

}  // namespace vocaprune

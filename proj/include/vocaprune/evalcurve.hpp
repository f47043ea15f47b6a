#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vocaprune/common.hpp"
#include "vocaprune/selection.hpp"

namespace vocaprune {

struct CurvePoint {
  int budget;
  double accuracy;
};

// Accuracy against retained vocabulary size for a fixed trained model.
// Budgets strictly ascending; the last point is the full vocabulary.
struct AccuracyVocabCurve {
  std::vector<CurvePoint> points;
  double full_accuracy = 0.0;
  int vocab_size = 0;
};

// Accuracy closure over an active mask (size V+1). Must be pure: curve points
// and Monte-Carlo repetitions may evaluate it concurrently.
using EvalFn = std::function<double(const std::vector<std::uint8_t>& active)>;

// 1, 2, 4, ..., largest power of two below V, then V. O(log V) points.
std::vector<int> log_spaced_budgets(int V);

AccuracyVocabCurve build_curve(const SelectionScores& scores, const EvalFn& eval,
                               std::vector<int> budgets, int vocab_size,
                               bool parallel = true);

// Trapezoidal area of accuracy over ln(budget), normalized by
// full_accuracy * (ln V - ln first_budget). Not clipped: curves above the
// full-vocabulary accuracy at small budgets may exceed 1.
double auc(const AccuracyVocabCurve& curve);

// Smallest sampled budget whose accuracy is within X% (relative) of the
// full-vocabulary accuracy; nullopt when no sampled point qualifies.
std::optional<int> vocab_at_drop(const AccuracyVocabCurve& curve, double x_percent);

struct McEnvelope {
  struct Row {
    int budget;
    double min, mean, max;
  };
  std::vector<Row> rows;
  int samples = 0;
  std::uint64_t seed = 0;
};

// N uniform random size-V subsets per budget, seeds derived per
// (budget, repetition) so results are reproducible under any schedule.
McEnvelope simulate_bounds(const EvalFn& eval, int vocab_size,
                           const std::vector<int>& budgets, int samples,
                           std::uint64_t seed, bool parallel = true);

struct AlgorithmResult {
  std::string name;
  AccuracyVocabCurve curve;
};

void write_curve_csv(const std::filesystem::path& path,
                     const AccuracyVocabCurve& curve);
AccuracyVocabCurve read_curve_csv(const std::filesystem::path& path);
void write_envelope_csv(const std::filesystem::path& path, const McEnvelope& env);
McEnvelope read_envelope_csv(const std::filesystem::path& path);

// Summary rows sorted by AUC descending:
// algorithm,auc,vocab_at_3,vocab_at_5,full_accuracy
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<AlgorithmResult>& results);

// Standalone SVG, log-scaled x axis, one polyline per curve and an optional
// min/max band for the Monte-Carlo envelope.
void write_plot_svg(const std::filesystem::path& path,
                    const std::vector<AlgorithmResult>& results,
                    const McEnvelope* envelope = nullptr);

// Emits per-algorithm curve CSVs, the summary CSV and the SVG plot.
void report(const std::vector<AlgorithmResult>& results, const McEnvelope* envelope,
            const std::filesystem::path& out_dir);

}  // namespace vocaprune

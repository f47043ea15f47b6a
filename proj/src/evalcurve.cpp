#include "vocaprune/evalcurve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

namespace vocaprune {

std::vector<int> log_spaced_budgets(int V) {
  if (V < 1) throw Error("log_spaced_budgets: V must be >= 1");
  std::vector<int> out;
  for (long long b = 1; b < V; b *= 2) out.push_back(static_cast<int>(b));
  out.push_back(V);
  return out;
}

namespace {

std::vector<int> normalize_budgets(std::vector<int> budgets, int V) {
  if (budgets.empty()) throw Error("budgets must be non-empty");
  for (int b : budgets)
    if (b < 1 || b > V) throw Error("budget out of range: " + std::to_string(b));
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
  if (budgets.back() != V) budgets.push_back(V);
  return budgets;
}

template <typename Fn>
std::vector<std::invoke_result_t<Fn, std::size_t>> map_indexed(std::size_t n, Fn fn,
                                                               bool parallel) {
  using R = std::invoke_result_t<Fn, std::size_t>;
  std::vector<R> out(n);
  if (!parallel || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<R>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    futures.push_back(std::async(std::launch::async, fn, i));
  for (std::size_t i = 0; i < n; ++i) out[i] = futures[i].get();
  return out;
}

}  // namespace

AccuracyVocabCurve build_curve(const SelectionScores& scores, const EvalFn& eval,
                               std::vector<int> budgets, int vocab_size,
                               bool parallel) {
  budgets = normalize_budgets(std::move(budgets), vocab_size);
  AccuracyVocabCurve curve;
  curve.vocab_size = vocab_size;
  auto accs = map_indexed(
      budgets.size(),
      [&](std::size_t i) { return eval(prefix_budget(scores, budgets[i])); },
      parallel);
  for (std::size_t i = 0; i < budgets.size(); ++i)
    curve.points.push_back({budgets[i], accs[i]});
  curve.full_accuracy = curve.points.back().accuracy;
  return curve;
}

double auc(const AccuracyVocabCurve& curve) {
  if (curve.points.size() < 2) throw Error("auc: need at least 2 curve points");
  if (curve.full_accuracy <= 0.0) throw Error("auc: full-vocabulary accuracy is 0");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    double dx = std::log(static_cast<double>(b.budget)) -
                std::log(static_cast<double>(a.budget));
    area += 0.5 * (a.accuracy + b.accuracy) * dx;
  }
  double span = std::log(static_cast<double>(curve.points.back().budget)) -
                std::log(static_cast<double>(curve.points.front().budget));
  if (span <= 0.0) throw Error("auc: degenerate budget range");
  return area / (curve.full_accuracy * span);
}

std::optional<int> vocab_at_drop(const AccuracyVocabCurve& curve, double x_percent) {
  if (x_percent < 0.0) throw Error("vocab_at_drop: X must be >= 0");
  if (curve.points.empty()) throw Error("vocab_at_drop: empty curve");
  const double floor_acc = (1.0 - x_percent / 100.0) * curve.full_accuracy;
  for (const auto& p : curve.points)
    if (p.accuracy >= floor_acc) return p.budget;
  return std::nullopt;
}

McEnvelope simulate_bounds(const EvalFn& eval, int vocab_size,
                           const std::vector<int>& budgets, int samples,
                           std::uint64_t seed, bool parallel) {
  if (samples < 1) throw Error("simulate_bounds: need samples >= 1");
  auto normalized = normalize_budgets(budgets, vocab_size);
  McEnvelope env;
  env.samples = samples;
  env.seed = seed;

  std::vector<int> all(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) all[static_cast<std::size_t>(i)] = i + 1;

  auto rows = map_indexed(
      normalized.size(),
      [&](std::size_t bi) {
        const int budget = normalized[bi];
        McEnvelope::Row row{budget, 0.0, 0.0, 0.0};
        if (budget == vocab_size) {
          // Only one subset of full size exists.
          std::vector<std::uint8_t> active(static_cast<std::size_t>(vocab_size) + 1, 1);
          active[0] = 0;
          double acc = eval(active);
          row.min = row.mean = row.max = acc;
          return row;
        }
        double sum = 0.0, mn = 1e300, mx = -1e300;
        std::vector<int> pool = all;
        for (int rep = 0; rep < samples; ++rep) {
          Rng rng(mix_seed(seed, static_cast<std::uint64_t>(budget),
                           static_cast<std::uint64_t>(rep)));
          // partial Fisher-Yates: first `budget` entries form the subset
          for (int k = 0; k < budget; ++k) {
            std::size_t j = static_cast<std::size_t>(k) +
                            static_cast<std::size_t>(rng.uniform_below(
                                static_cast<std::uint64_t>(vocab_size - k)));
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
          }
          std::vector<std::uint8_t> active(static_cast<std::size_t>(vocab_size) + 1, 0);
          for (int k = 0; k < budget; ++k)
            active[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
          double acc = eval(active);
          sum += acc;
          mn = std::min(mn, acc);
          mx = std::max(mx, acc);
        }
        row.min = mn;
        row.mean = sum / static_cast<double>(samples);
        row.max = mx;
        return row;
      },
      parallel);
  env.rows = std::move(rows);
  return env;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_curve_csv(const std::filesystem::path& path,
                     const AccuracyVocabCurve& curve) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "budget,accuracy\n";
  for (const auto& p : curve.points)
    out << p.budget << ',' << fmt_double(p.accuracy) << '\n';
}

AccuracyVocabCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "budget,accuracy")
    throw Error("bad curve CSV header in " + path.string());
  AccuracyVocabCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) throw Error("bad curve CSV row in " + path.string());
    curve.points.push_back({std::stoi(fields[0]), std::stod(fields[1])});
  }
  if (curve.points.empty()) throw Error("empty curve CSV: " + path.string());
  curve.vocab_size = curve.points.back().budget;
  curve.full_accuracy = curve.points.back().accuracy;
  return curve;
}

void write_envelope_csv(const std::filesystem::path& path, const McEnvelope& env) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "budget,min,mean,max\n";
  for (const auto& r : env.rows)
    out << r.budget << ',' << fmt_double(r.min) << ',' << fmt_double(r.mean) << ','
        << fmt_double(r.max) << '\n';
}

McEnvelope read_envelope_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "budget,min,mean,max")
    throw Error("bad envelope CSV header in " + path.string());
  McEnvelope env;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) throw Error("bad envelope CSV row in " + path.string());
    env.rows.push_back({std::stoi(fields[0]), std::stod(fields[1]),
                        std::stod(fields[2]), std::stod(fields[3])});
  }
  return env;
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<AlgorithmResult>& results) {
  if (results.empty()) throw Error("write_summary_csv: no results");
  struct Row {
    std::string name;
    double auc_value;
    std::optional<int> v3, v5;
    double full;
  };
  std::vector<Row> rows;
  for (const auto& r : results)
    rows.push_back({r.name, auc(r.curve), vocab_at_drop(r.curve, 3.0),
                    vocab_at_drop(r.curve, 5.0), r.curve.full_accuracy});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.auc_value > b.auc_value; });
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "algorithm,auc,vocab_at_3,vocab_at_5,full_accuracy\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fmt_double(r.auc_value) << ',';
    if (r.v3) out << *r.v3;
    out << ',';
    if (r.v5) out << *r.v5;
    out << ',' << fmt_double(r.full) << '\n';
  }
}

void write_plot_svg(const std::filesystem::path& path,
                    const std::vector<AlgorithmResult>& results,
                    const McEnvelope* envelope) {
  if (results.empty()) throw Error("write_plot_svg: no curves");
  const double W = 800, H = 500, ml = 70, mr = 180, mt = 30, mb = 60;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmax = 1.0;
  for (const auto& r : results)
    for (const auto& p : r.curve.points)
      xmax = std::max(xmax, std::log(static_cast<double>(p.budget)));
  if (envelope)
    for (const auto& r : envelope->rows)
      xmax = std::max(xmax, std::log(static_cast<double>(r.budget)));
  if (xmax <= 0.0) xmax = 1.0;

  auto px = [&](int budget) {
    return ml + std::log(static_cast<double>(budget)) / xmax * pw;
  };
  auto py = [&](double acc) { return mt + (1.0 - acc) * ph; };

  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  if (envelope && !envelope->rows.empty()) {
    out << "<polygon fill=\"#c8d8f0\" stroke=\"none\" points=\"";
    for (const auto& r : envelope->rows)
      out << fmt_double(px(r.budget)) << ',' << fmt_double(py(r.max)) << ' ';
    for (auto it = envelope->rows.rbegin(); it != envelope->rows.rend(); ++it)
      out << fmt_double(px(it->budget)) << ',' << fmt_double(py(it->min)) << ' ';
    out << "\"/>\n";
  }

  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const char* color = kColors[i % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : results[i].curve.points)
      out << fmt_double(px(p.budget)) << ',' << fmt_double(py(p.accuracy)) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - mr + 15 << "\" y=\"" << mt + 20 * (i + 1)
        << "\" fill=\"" << color << "\" font-size=\"13\" font-family=\"sans-serif\">"
        << results[i].name << "</text>\n";
  }

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  for (int budget = 1; std::log(static_cast<double>(budget)) <= xmax + 1e-9; budget *= 8) {
    double x = px(budget);
    out << "<line x1=\"" << fmt_double(x) << "\" y1=\"" << mt + ph << "\" x2=\""
        << fmt_double(x) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt_double(x) << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << budget << "</text>\n";
  }
  for (int tick = 0; tick <= 10; tick += 2) {
    double acc = tick / 10.0;
    out << "<text x=\"" << ml - 10 << "\" y=\"" << fmt_double(py(acc) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt_double(acc) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 15
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << "vocabulary size (log scale)</text>\n";
  out << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">accuracy</text>\n";
  out << "</svg>\n";
}

void report(const std::vector<AlgorithmResult>& results, const McEnvelope* envelope,
            const std::filesystem::path& out_dir) {
  if (results.empty()) throw Error("report: no curves");
  std::filesystem::create_directories(out_dir);
  for (const auto& r : results)
    write_curve_csv(out_dir / (r.name + "_curve.csv"), r.curve);
  if (envelope) write_envelope_csv(out_dir / "envelope.csv", *envelope);
  write_summary_csv(out_dir / "summary.csv", results);
  write_plot_svg(out_dir / "plot.svg", results, envelope);
}

}  // namespace vocaprune

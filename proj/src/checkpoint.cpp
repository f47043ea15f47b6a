#include "vocaprune/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vocaprune {

namespace {

void write_vector(std::ofstream& out, const std::string& tag,
                  const std::vector<double>& v) {
  out << tag << ' ' << v.size() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    out << buf << (i + 1 == v.size() ? '\n' : ' ');
  }
  if (v.empty()) out << '\n';
}

void write_matrix(std::ofstream& out, const std::string& tag, const Matrix& m) {
  out << tag << ' ' << m.rows << ' ' << m.cols << '\n';
  char buf[40];
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      out << buf << (j + 1 == m.cols ? '\n' : ' ');
    }
  }
}

std::string expect_tag(std::istream& in, const std::string& tag) {
  std::string line;
  if (!std::getline(in, line)) throw Error("checkpoint: unexpected end of file");
  if (line.rfind(tag + " ", 0) != 0 && line != tag)
    throw Error("checkpoint: expected '" + tag + "', got '" + line + "'");
  return line.size() > tag.size() ? line.substr(tag.size() + 1) : std::string();
}

std::vector<double> read_vector(std::istream& in, const std::string& tag) {
  std::size_t n = std::stoull(expect_tag(in, tag));
  std::string line;
  if (!std::getline(in, line)) throw Error("checkpoint: missing vector data");
  std::istringstream ss(line);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!(ss >> v[i])) throw Error("checkpoint: short vector for " + tag);
  return v;
}

Matrix read_matrix(std::istream& in, const std::string& tag) {
  std::istringstream head(expect_tag(in, tag));
  std::size_t rows = 0, cols = 0;
  if (!(head >> rows >> cols)) throw Error("checkpoint: bad matrix header for " + tag);
  Matrix m(rows, cols);
  std::string line;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw Error("checkpoint: missing matrix row");
    std::istringstream ss(line);
    auto row = m.row(i);
    for (std::size_t j = 0; j < cols; ++j)
      if (!(ss >> row[j])) throw Error("checkpoint: short matrix row for " + tag);
  }
  return m;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, vocab_hash);
  out << "vocaprune-checkpoint v1\n";
  out << "algorithm " << algorithm << '\n';
  out << "vocab_hash " << hash << '\n';
  out << "config " << config.size() << '\n';
  for (const auto& [k, v] : config) out << k << '=' << v << '\n';
  write_matrix(out, "embedding", embedding);
  write_vector(out, "log_alpha", log_alpha);
  write_matrix(out, "hidden_w", params.hidden_w);
  write_vector(out, "hidden_b", params.hidden_b);
  write_matrix(out, "output_w", params.output_w);
  write_vector(out, "output_b", params.output_b);
  if (!out) throw Error("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "vocaprune-checkpoint v1")
    throw Error("not a vocaprune checkpoint: " + path.string());
  Checkpoint cp;
  cp.algorithm = expect_tag(in, "algorithm");
  cp.vocab_hash = std::stoull(expect_tag(in, "vocab_hash"), nullptr, 16);
  std::size_t nconfig = std::stoull(expect_tag(in, "config"));
  for (std::size_t i = 0; i < nconfig; ++i) {
    if (!std::getline(in, line)) throw Error("checkpoint: missing config line");
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error("checkpoint: bad config line: " + line);
    cp.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  cp.embedding = read_matrix(in, "embedding");
  cp.log_alpha = read_vector(in, "log_alpha");
  cp.params.hidden_w = read_matrix(in, "hidden_w");
  cp.params.hidden_b = read_vector(in, "hidden_b");
  cp.params.output_w = read_matrix(in, "output_w");
  cp.params.output_b = read_vector(in, "output_b");
  return cp;
}

}  // namespace vocaprune

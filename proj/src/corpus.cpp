#include "vocaprune/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vocaprune {

MalformedLine::MalformedLine(const std::string& path, std::size_t line,
                             const std::string& what)
    : Error(path + ":" + std::to_string(line) + ": " + what), line_number(line) {}

namespace {

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Whitespace split point for UTF-8 input: ASCII whitespace plus the common
// Unicode space code points. Returns the byte length of the whitespace
// sequence starting at pos, or 0.
std::size_t whitespace_len(std::string_view s, std::size_t pos) {
  unsigned char c = s[pos];
  if (is_space_byte(c)) return 1;
  if (c == 0xc2 && pos + 1 < s.size()) {
    unsigned char d = s[pos + 1];
    if (d == 0xa0 || d == 0x85) return 2;  // NBSP, NEL
  }
  if (c == 0xe2 && pos + 2 < s.size()) {
    unsigned char d = s[pos + 1];
    unsigned char e = s[pos + 2];
    if (d == 0x80 && ((e >= 0x80 && e <= 0x8a) || e == 0xa8 || e == 0xa9 || e == 0xaf))
      return 3;                            // U+2000..200A, LS, PS, NNBSP
    if (d == 0x81 && e == 0x9f) return 3;  // U+205F
  }
  if (c == 0xe3 && pos + 2 < s.size() &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80 &&
      static_cast<unsigned char>(s[pos + 2]) == 0x80)
    return 3;  // ideographic space
  return 0;
}

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

void push_piece(std::vector<Token>& out, std::string_view piece) {
  std::size_t b = 0, e = piece.size();
  while (b < e && is_ascii_punct(static_cast<unsigned char>(piece[b]))) ++b;
  while (e > b && is_ascii_punct(static_cast<unsigned char>(piece[e - 1]))) --e;
  if (b == e) return;
  Token t;
  t.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    char c = piece[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    t.push_back(c);
  }
  out.push_back(std::move(t));
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t start = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t ws = whitespace_len(text, pos);
    if (ws > 0) {
      if (pos > start) push_piece(out, text.substr(start, pos - start));
      pos += ws;
      start = pos;
    } else {
      ++pos;
    }
  }
  if (pos > start) push_piece(out, text.substr(start, pos - start));
  return out;
}

int Vocabulary::index_of(const std::string& word) const {
  auto it = word_to_index_.find(word);
  return it == word_to_index_.end() ? kNullIndex : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  for (int i = 1; i <= size(); ++i)
    out << i << '\t' << index_to_word_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw MalformedLine(path.string(), lineno, "expected index\\tword\\tcount");
    int index = 0;
    std::int64_t count = 0;
    auto r1 = std::from_chars(line.data(), line.data() + t1, index);
    auto r2 = std::from_chars(line.data() + t2 + 1, line.data() + line.size(), count);
    if (r1.ec != std::errc() || r2.ec != std::errc())
      throw MalformedLine(path.string(), lineno, "bad index or count");
    if (index != static_cast<int>(v.index_to_word_.size()))
      throw MalformedLine(path.string(), lineno, "indices must be 1,2,... in order");
    std::string word = line.substr(t1 + 1, t2 - t1 - 1);
    v.word_to_index_.emplace(word, index);
    v.index_to_word_.push_back(std::move(word));
    v.counts_.push_back(count);
  }
  if (v.size() == 0) throw EmptyVocabulary("empty vocabulary file: " + path.string());
  return v;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 1; i <= size(); ++i) {
    std::string line = std::to_string(i) + "\t" + index_to_word_[i] + "\t" +
                       std::to_string(counts_[i]) + "\n";
    h = fnv1a64(line, h);
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<std::vector<Token>>& docs,
                            std::int64_t min_count) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++counts[tok];

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [word, count] : counts)
    if (count >= min_count) kept.emplace_back(word, count);
  if (kept.empty()) throw EmptyVocabulary("no token reaches min_count");

  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (auto& [word, count] : kept) {
    int index = static_cast<int>(v.index_to_word_.size());
    v.word_to_index_.emplace(word, index);
    v.index_to_word_.push_back(word);
    v.counts_.push_back(count);
  }
  return v;
}

std::vector<int> encode(const std::vector<Token>& doc, const Vocabulary& vocab,
                        const std::vector<std::uint8_t>* active) {
  std::vector<int> out;
  out.reserve(doc.size());
  for (const auto& tok : doc) {
    int idx = vocab.index_of(tok);
    if (idx != 0 && active && !(*active)[idx]) idx = 0;
    out.push_back(idx);
  }
  return out;
}

LabeledCorpus encode_corpus(const RawCorpus& raw, const Vocabulary& vocab,
                            const std::vector<std::uint8_t>* active) {
  LabeledCorpus out;
  out.num_classes = raw.num_classes;
  out.split = raw.split;
  out.documents.reserve(raw.documents.size());
  for (const auto& [tokens, label] : raw.documents)
    out.documents.emplace_back(encode(tokens, vocab, active), label);
  return out;
}

RawCorpus load_tsv(const std::filesystem::path& path, std::string split,
                   const std::vector<std::int64_t>* label_table) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::vector<std::pair<std::vector<Token>, std::int64_t>> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw MalformedLine(path.string(), lineno, "missing TAB separator");
    std::int64_t label = 0;
    auto r = std::from_chars(line.data(), line.data() + tab, label);
    if (r.ec != std::errc() || r.ptr != line.data() + tab)
      throw MalformedLine(path.string(), lineno, "non-integer label");
    records.emplace_back(tokenize(std::string_view(line).substr(tab + 1)), label);
  }
  if (records.empty()) throw EmptyCorpus("no records in " + path.string());

  RawCorpus out;
  out.split = std::move(split);
  if (label_table) {
    out.label_table = *label_table;
  } else {
    for (const auto& [tokens, label] : records) out.label_table.push_back(label);
    std::sort(out.label_table.begin(), out.label_table.end());
    out.label_table.erase(std::unique(out.label_table.begin(), out.label_table.end()),
                          out.label_table.end());
  }
  out.num_classes = static_cast<int>(out.label_table.size());
  for (auto& [tokens, label] : records) {
    auto it = std::lower_bound(out.label_table.begin(), out.label_table.end(), label);
    if (it == out.label_table.end() || *it != label)
      throw Error("label " + std::to_string(label) + " not in label table (" +
                  path.string() + ")");
    out.documents.emplace_back(std::move(tokens),
                               static_cast<int>(it - out.label_table.begin()));
  }
  return out;
}

SyntheticCorpus make_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               std::string split) {
  if (spec.num_classes < 2) throw Error("num_classes must be >= 2");
  if (spec.keywords_per_class < 1) throw Error("keywords_per_class must be >= 1");
  if (spec.noise_vocab < 0) throw Error("noise_vocab must be >= 0");
  if (spec.docs_per_class < 1) throw Error("docs_per_class must be >= 1");
  if (spec.doc_len < 1) throw Error("doc_len must be >= 1");
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0)
    throw Error("noise_rate must be in [0,1]");
  if (spec.noise_rate > 0.0 && spec.noise_vocab == 0)
    throw Error("noise_rate > 0 requires noise_vocab >= 1");

  SyntheticCorpus out;
  out.corpus.split = std::move(split);
  out.corpus.num_classes = spec.num_classes;
  for (int c = 0; c < spec.num_classes; ++c) out.corpus.label_table.push_back(c);

  char buf[32];
  out.signature_words.resize(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c)
    for (int k = 0; k < spec.keywords_per_class; ++k) {
      std::snprintf(buf, sizeof(buf), "sig%02dw%03d", c, k);
      out.signature_words[c].push_back(buf);
    }
  std::vector<Token> noise_words;
  for (int m = 0; m < spec.noise_vocab; ++m) {
    std::snprintf(buf, sizeof(buf), "noise%05d", m);
    noise_words.push_back(buf);
  }

  const int head = std::min(30, spec.noise_vocab);
  const bool has_tail = spec.noise_vocab > head;
  const int burst = std::min(6, head);

  Rng rng(mix_seed(seed, fnv1a64(out.corpus.split)));
  std::vector<int> head_order(static_cast<std::size_t>(head));
  for (int i = 0; i < head; ++i) head_order[static_cast<std::size_t>(i)] = i;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int d = 0; d < spec.docs_per_class; ++d) {
      std::vector<Token> doc;
      doc.reserve(spec.doc_len);
      // Head noise words are bursty: each document draws its head noise from a
      // small per-document subset, so a head word is very frequent overall yet
      // concentrated in a minority of documents. That keeps its marginal
      // frequency above the signature words (fooling raw counts) while its
      // high tf and inflated idf also fool tf-idf.
      if (spec.noise_rate > 0.0 && head > 0) rng.shuffle(head_order);
      for (int t = 0; t < spec.doc_len; ++t) {
        if (rng.next_double() < spec.noise_rate) {
          int m;
          if (has_tail && rng.next_double() >= 0.9) {
            m = head + static_cast<int>(rng.uniform_below(spec.noise_vocab - head));
          } else {
            m = head_order[rng.uniform_below(burst)];
          }
          doc.push_back(noise_words[m]);
        } else {
          int k = static_cast<int>(rng.uniform_below(spec.keywords_per_class));
          doc.push_back(out.signature_words[c][k]);
        }
      }
      out.corpus.documents.emplace_back(std::move(doc), c);
    }
  }
  return out;
}

}  // namespace vocaprune

#pragma once

// BIO-labelled column corpora and raw-text vocabularies.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"

namespace reprner {

struct Token {
  std::string surface;
  std::optional<std::string> pos;
  std::string label = "O";

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

/// "O" or "(B|I)-CLASS" with a non-empty CLASS.
inline bool is_valid_label(std::string_view label) {
  if (label == "O") return true;
  return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-';
}

/// Entity class of a BIO label, empty for "O".
inline std::string_view label_class(std::string_view label) {
  return label.size() > 2 ? label.substr(2) : std::string_view{};
}

class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Sentence> sentences, std::string source_name = {})
      : sentences_(std::move(sentences)), source_name_(std::move(source_name)) {
    for (std::size_t s = 0; s < sentences_.size(); ++s) {
      if (sentences_[s].tokens.empty())
        fail_data("sentence " + std::to_string(s) + " is empty");
      for (const auto& tok : sentences_[s].tokens) {
        if (tok.surface.empty() ||
            tok.surface.find_first_of(" \t\r\n") != std::string::npos)
          fail_data("sentence " + std::to_string(s) + ": invalid token surface '" +
                    tok.surface + "'");
        if (!is_valid_label(tok.label))
          fail_data("sentence " + std::to_string(s) + ": invalid label '" + tok.label + "'");
        tagset_.insert(tok.label);
      }
    }
  }

  const std::vector<Sentence>& sentences() const { return sentences_; }
  const std::set<std::string>& tagset() const { return tagset_; }
  const std::string& source_name() const { return source_name_; }
  std::size_t size() const { return sentences_.size(); }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences_) n += s.size();
    return n;
  }

  bool has_pos() const {
    for (const auto& s : sentences_)
      for (const auto& t : s.tokens)
        if (t.pos) return true;
    return false;
  }

  bool operator==(const Corpus& o) const { return sentences_ == o.sentences_; }

 private:
  std::vector<Sentence> sentences_;
  std::set<std::string> tagset_;
  std::string source_name_;
};

struct ColumnSpec {
  std::size_t token_col = 0;
  std::optional<std::size_t> label_col = 1;
  std::optional<std::size_t> pos_col;
};

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Parses whitespace-separated columns; a blank line ends a sentence.
inline Corpus parse_conll(std::string_view text, const ColumnSpec& cols = {},
                          std::string source_name = {}) {
  std::size_t max_col = cols.token_col;
  if (cols.label_col) max_col = std::max(max_col, *cols.label_col);
  if (cols.pos_col) max_col = std::max(max_col, *cols.pos_col);

  std::vector<Sentence> sentences;
  Sentence current;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    if (start == text.size() && line.empty()) break;
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) {
      if (!current.tokens.empty()) sentences.push_back(std::move(current));
      current = Sentence{};
    } else {
      if (fields.size() <= max_col)
        fail_data("line " + std::to_string(line_no) + ": missing column " +
                  std::to_string(max_col));
      Token tok;
      tok.surface = std::string(fields[cols.token_col]);
      if (cols.pos_col) tok.pos = std::string(fields[*cols.pos_col]);
      if (cols.label_col) tok.label = std::string(fields[*cols.label_col]);
      if (!is_valid_label(tok.label))
        fail_data("line " + std::to_string(line_no) + ": invalid label '" + tok.label + "'");
      current.tokens.push_back(std::move(tok));
    }
    start = end + 1;
  }
  if (!current.tokens.empty()) sentences.push_back(std::move(current));
  if (sentences.empty()) fail_data("empty corpus");
  return Corpus(std::move(sentences), std::move(source_name));
}

/// Writes "surface[\tpos]\tlabel" rows; the POS column is present iff any token has one.
inline std::string serialize_conll(const Corpus& corpus) {
  const bool pos = corpus.has_pos();
  std::string out;
  for (const auto& s : corpus.sentences()) {
    for (const auto& t : s.tokens) {
      out += t.surface;
      if (pos) {
        out += '\t';
        out += t.pos.value_or("_");
      }
      out += '\t';
      out += t.label;
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

/// First ceil(n/2) sentences, then the rest.
inline std::pair<Corpus, Corpus> split_dev_half(const Corpus& corpus) {
  const auto& s = corpus.sentences();
  if (s.size() < 2) fail_data("split_dev_half needs at least 2 sentences");
  const std::size_t half = (s.size() + 1) / 2;
  std::vector<Sentence> first(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<Sentence> second(s.begin() + static_cast<std::ptrdiff_t>(half), s.end());
  return {Corpus(std::move(first), corpus.source_name() + ":dev"),
          Corpus(std::move(second), corpus.source_name() + ":test")};
}

struct VocabStats {
  std::map<std::string, std::size_t> counts;  // retained words only
  std::size_t total_tokens = 0;               // every token in the stream
  std::size_t retained_tokens = 0;            // sum of counts
  std::size_t type_count = 0;                 // counts.size()
};

/// Raw text as lines of whitespace-separated tokens.
inline std::vector<std::vector<std::string>> tokenize_lines(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto fields = split_whitespace(text.substr(start, end - start));
    if (!fields.empty()) {
      auto& line = lines.emplace_back();
      line.reserve(fields.size());
      for (auto f : fields) line.emplace_back(f);
    }
    start = end + 1;
  }
  return lines;
}

/// Words with count >= freq_threshold, optionally capped to the max_types
/// most frequent (ties broken by the word's byte order).
inline VocabStats build_vocab(const std::vector<std::vector<std::string>>& lines,
                              std::size_t freq_threshold,
                              std::optional<std::size_t> max_types = std::nullopt) {
  if (max_types && *max_types == 0) fail_usage("max_types must be positive");
  std::unordered_map<std::string, std::size_t> raw;
  VocabStats stats;
  for (const auto& line : lines)
    for (const auto& w : line) {
      ++raw[w];
      ++stats.total_tokens;
    }
  if (stats.total_tokens == 0) fail_data("empty token stream");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : raw)
    if (c >= freq_threshold) kept.emplace_back(w, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_types && kept.size() > *max_types) kept.resize(*max_types);
  for (auto& [w, c] : kept) {
    stats.retained_tokens += c;
    stats.counts.emplace(std::move(w), c);
  }
  stats.type_count = stats.counts.size();
  return stats;
}

inline VocabStats build_vocab(std::string_view raw_text, std::size_t freq_threshold,
                              std::optional<std::size_t> max_types = std::nullopt) {
  return build_vocab(tokenize_lines(raw_text), freq_threshold, max_types);
}

struct BioViolation {
  std::size_t sentence = 0;
  std::size_t token = 0;
  std::string label;

  bool operator==(const BioViolation&) const = default;
};

struct BioCheck {
  Corpus corpus;
  std::vector<BioViolation> violations;
};

/// Flags every I-X not preceded by B-X or I-X; with repair, rewrites it to B-X.
inline BioCheck validate_bio(const Corpus& corpus, bool repair) {
  std::vector<Sentence> sentences = corpus.sentences();
  std::vector<BioViolation> violations;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto& toks = sentences[s].tokens;
    std::string_view prev = "O";
    for (std::size_t t = 0; t < toks.size(); ++t) {
      auto& label = toks[t].label;
      if (label[0] == 'I') {
        const bool continues = prev != "O" && label_class(prev) == label_class(label);
        if (!continues) {
          violations.push_back({s, t, label});
          if (repair) label[0] = 'B';
        }
      }
      prev = label;
    }
  }
  return {Corpus(std::move(sentences), corpus.source_name()), std::move(violations)};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path);
  out << content;
  if (!out) fail_data("write failed for " + path);
}

}  // namespace reprner

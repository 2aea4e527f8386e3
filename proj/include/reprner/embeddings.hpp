#pragma once

// Word embedding tables read from word2vec/GloVe text dumps.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"

namespace reprner {

enum class EmbeddingFormat { word2vec_text, glove_text };

inline EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "word2vec" || name == "word2vec_text") return EmbeddingFormat::word2vec_text;
  if (name == "glove" || name == "glove_text") return EmbeddingFormat::glove_text;
  fail_usage("unknown embedding format '" + std::string(name) + "'");
}

/// Vocabulary -> dim-length vectors. Values are kept in single precision,
/// which is what the embedding tools write, so a 9-digit text dump round-trips.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) fail_data("embedding dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }

  /// Inserts or overwrites. Returns false when the word already existed.
  bool set(const std::string& word, std::span<const float> vec) {
    if (vec.size() != dim_)
      fail_data("vector for '" + word + "' has length " + std::to_string(vec.size()) +
                ", expected " + std::to_string(dim_));
    for (float v : vec)
      if (!std::isfinite(v)) fail_data("non-finite value in vector for '" + word + "'");
    auto [it, inserted] = index_.try_emplace(word, words_.size());
    if (inserted) {
      words_.push_back(word);
      data_.insert(data_.end(), vec.begin(), vec.end());
    } else {
      std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    }
    return inserted;
  }

  std::optional<std::span<const float>> lookup(std::string_view word) const {
    if (word.empty()) return std::nullopt;
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return row(it->second);
  }

  bool contains(std::string_view word) const { return lookup(word).has_value(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  bool operator==(const EmbeddingTable& o) const {
    return dim_ == o.dim_ && words_ == o.words_ && data_ == o.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
  std::map<std::string, std::string> metadata_;
};

inline std::optional<std::span<const float>> lookup(const EmbeddingTable& table,
                                                    std::string_view word) {
  return table.lookup(word);
}

namespace detail {

inline float parse_float(std::string_view field, std::size_t line_no) {
  float v = 0.0f;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    fail_data("line " + std::to_string(line_no) + ": non-numeric field '" +
              std::string(field) + "'");
  return v;
}

}  // namespace detail

/// Parses an embedding dump. Duplicate words keep the last row and emit a
/// warning on `warn` (if non-null).
inline EmbeddingTable parse_embeddings(std::string_view text, EmbeddingFormat format,
                                       std::ostream* warn = &std::cerr) {
  std::size_t dim = 0;
  std::optional<EmbeddingTable> table;
  std::vector<float> buf;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_pending = format == EmbeddingFormat::word2vec_text;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_whitespace(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (fields.empty()) continue;
    if (header_pending) {
      if (fields.size() != 2)
        fail_data("line " + std::to_string(line_no) + ": expected '<count> <dim>' header");
      std::size_t count = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), dim);
      if (r1.ec != std::errc() || r2.ec != std::errc() || dim == 0)
        fail_data("line " + std::to_string(line_no) + ": malformed header");
      table.emplace(dim);
      header_pending = false;
      continue;
    }
    if (fields.size() < 2)
      fail_data("line " + std::to_string(line_no) + ": row has no vector values");
    if (!table) {
      dim = fields.size() - 1;
      table.emplace(dim);
    }
    if (fields.size() - 1 != dim)
      fail_data("line " + std::to_string(line_no) + ": row has " +
                std::to_string(fields.size() - 1) + " values, expected " + std::to_string(dim));
    buf.clear();
    for (std::size_t j = 1; j < fields.size(); ++j)
      buf.push_back(detail::parse_float(fields[j], line_no));
    const std::string word(fields[0]);
    if (!table->set(word, buf) && warn)
      *warn << "warning: line " << line_no << ": duplicate word '" << word
            << "', keeping the last occurrence\n";
  }
  if (!table || table->empty()) fail_data("embedding file has no rows");
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::string& path, EmbeddingFormat format,
                                      std::ostream* warn = &std::cerr) {
  auto table = parse_embeddings(read_file(path), format, warn);
  table.metadata()["source"] = path;
  return table;
}

/// word2vec text with 9 significant digits.
inline std::string serialize_word2vec(const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.words()[i];
    for (float v : table.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

/// Cosine similarity clamped to [-1, 1]. Zero-norm inputs are an error.
template <typename T, typename U>
double cosine(std::span<const T> u, std::span<const U> v) {
  if (u.size() != v.size()) fail_data("cosine: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = static_cast<double>(u[i]);
    const double b = static_cast<double>(v[i]);
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) fail_data("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

}  // namespace reprner

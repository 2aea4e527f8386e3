#pragma once

// Distributional prototypes: words most associated (by NPMI) with each label
// in annotated data, attached to other words through embedding similarity.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"

namespace reprner {

struct NpmiTable {
  std::map<std::pair<std::string, std::string>, std::size_t> joint;  // (class, word)
  std::map<std::string, std::size_t> class_totals;
  std::map<std::string, std::size_t> word_totals;
  std::size_t N = 0;
  std::map<std::pair<std::string, std::string>, double> npmi;
};

/// PMI(c,w) = ln(p(c,w) / (p(c) p(w))), NPMI = PMI / -ln p(c,w). Pairs never
/// seen together are absent.
inline double npmi_value(std::size_t joint, std::size_t class_total, std::size_t word_total,
                         std::size_t N) {
  const double n = static_cast<double>(N);
  const double pj = static_cast<double>(joint) / n;
  const double pc = static_cast<double>(class_total) / n;
  const double pw = static_cast<double>(word_total) / n;
  // Perfect association is assigned exactly, not through rounding; this also
  // covers p(c,w) = 1 where the ratio is 0/0.
  if (joint == class_total && joint == word_total) return 1.0;
  const double pmi = std::log(pj / (pc * pw));
  return std::clamp(pmi / -std::log(pj), -1.0, 1.0);
}

/// Classes are full BIO labels (B-LOC and I-LOC are distinct).
inline NpmiTable compute_npmi(const Corpus& train) {
  NpmiTable t;
  for (const auto& s : train.sentences())
    for (const auto& tok : s.tokens) {
      ++t.joint[{tok.label, tok.surface}];
      ++t.class_totals[tok.label];
      ++t.word_totals[tok.surface];
      ++t.N;
    }
  if (t.N == 0) fail_data("compute_npmi: empty corpus");
  for (const auto& [key, c] : t.joint)
    t.npmi[key] = npmi_value(c, t.class_totals.at(key.first), t.word_totals.at(key.second), t.N);
  return t;
}

struct PrototypeTable {
  std::size_t m = 60;
  double threshold = 0.5;
  /// class -> words by descending NPMI (ties by byte order)
  std::map<std::string, std::vector<std::string>> prototypes;
  std::map<std::string, std::vector<double>> scores;  // parallel to prototypes
};

/// Top m words per class. The outside label "O" is not a target class and is
/// skipped unless include_outside is set.
inline PrototypeTable select_prototypes(const NpmiTable& table, std::size_t m,
                                        double threshold = 0.5, bool include_outside = false) {
  if (m < 1) fail_usage("select_prototypes: m must be >= 1");
  std::map<std::string, std::vector<std::pair<double, std::string>>> by_class;
  for (const auto& [key, v] : table.npmi) {
    if (!include_outside && key.first == "O") continue;
    by_class[key.first].emplace_back(v, key.second);
  }
  PrototypeTable out;
  out.m = m;
  out.threshold = threshold;
  for (auto& [cls, list] : by_class) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (list.size() > m) list.resize(m);
    auto& words = out.prototypes[cls];
    auto& scores = out.scores[cls];
    for (auto& [v, w] : list) {
      words.push_back(w);
      scores.push_back(v);
    }
  }
  return out;
}

/// `proto=<p>` for every prototype p (any class) whose embedding has cosine
/// strictly above the threshold with the word's. Unknown words, unknown
/// prototypes and zero vectors are skipped. A prototype listed under several
/// classes is emitted once.
inline std::vector<std::string> assign_prototypes(const PrototypeTable& table,
                                                  const EmbeddingTable& embeddings,
                                                  std::string_view word) {
  std::vector<std::string> out;
  const auto vec = embeddings.lookup(word);
  if (!vec) return out;
  auto nonzero = [](std::span<const float> v) {
    return std::any_of(v.begin(), v.end(), [](float x) { return x != 0.0f; });
  };
  if (!nonzero(*vec)) return out;
  std::vector<std::string> seen;
  for (const auto& [cls, words] : table.prototypes)
    for (const auto& p : words) {
      const auto pv = embeddings.lookup(p);
      if (!pv || !nonzero(*pv)) continue;
      if (cosine(*vec, *pv) > table.threshold) seen.push_back(p);
    }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (auto& p : seen) out.push_back("proto=" + p);
  return out;
}

/// "<class>\t<word>\t<npmi>" rows, descending NPMI within each class.
inline std::string serialize_prototypes(const PrototypeTable& table) {
  std::string out;
  char buf[40];
  for (const auto& [cls, words] : table.prototypes) {
    const auto& sc = table.scores.at(cls);
    for (std::size_t i = 0; i < words.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", sc[i]);
      out += cls + "\t" + words[i] + "\t" + buf + "\n";
    }
  }
  return out;
}

inline PrototypeTable parse_prototypes(std::string_view text, double threshold = 0.5) {
  PrototypeTable table;
  table.threshold = threshold;
  table.m = 0;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_whitespace(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (fields.empty()) continue;
    if (fields.size() != 3)
      fail_data("line " + std::to_string(line_no) + ": expected '<class>\\t<word>\\t<npmi>'");
    double v = 0.0;
    auto r = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), v);
    if (r.ec != std::errc() || !std::isfinite(v))
      fail_data("line " + std::to_string(line_no) + ": bad NPMI value");
    const std::string cls(fields[0]);
    table.prototypes[cls].emplace_back(fields[1]);
    table.scores[cls].push_back(v);
    table.m = std::max(table.m, table.prototypes[cls].size());
  }
  if (table.prototypes.empty()) fail_data("prototype file has no rows");
  return table;
}

}  // namespace reprner

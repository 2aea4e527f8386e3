#pragma once

// Phrase-level scoring with conlleval chunk semantics.

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"

namespace reprner {

struct ClassScores {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_count = 0;
  std::size_t pred_count = 0;
  std::size_t correct_count = 0;
};

struct EvalReport {
  std::map<std::string, ClassScores> per_class;
  ClassScores overall;
  double token_accuracy = 0.0;  // percent
  std::size_t token_count = 0;
};

struct Chunk {
  std::size_t begin = 0, end = 0;  // [begin, end)
  std::string type;

  auto operator<=>(const Chunk&) const = default;
};

namespace detail {

inline std::pair<char, std::string_view> split_tag(std::string_view label) {
  if (label == "O" || label.size() < 3) return {'O', {}};
  return {label[0], label.substr(2)};
}

}  // namespace detail

/// Maximal B-X (I-X)* spans; an I-X after O or after another class opens a
/// new chunk, as conlleval does.
inline std::vector<Chunk> extract_chunks(const std::vector<std::string>& labels) {
  std::vector<Chunk> out;
  char prev_tag = 'O';
  std::string_view prev_type;
  bool open = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [tag, type] = detail::split_tag(labels[i]);
    const bool ends = open && (tag == 'O' || tag == 'B' || type != prev_type);
    if (ends) {
      out.back().end = i;
      open = false;
    }
    const bool starts = tag == 'B' || (tag == 'I' && (prev_tag == 'O' || type != prev_type));
    if (starts) {
      out.push_back({i, i + 1, std::string(type)});
      open = true;
    }
    prev_tag = tag;
    prev_type = type;
  }
  if (open) out.back().end = labels.size();
  return out;
}

namespace detail {

inline void finish(ClassScores& c) {
  c.precision = c.pred_count ? 100.0 * static_cast<double>(c.correct_count) /
                                   static_cast<double>(c.pred_count)
                             : 0.0;
  c.recall = c.gold_count ? 100.0 * static_cast<double>(c.correct_count) /
                                static_cast<double>(c.gold_count)
                          : 0.0;
  c.f1 = c.precision + c.recall > 0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
                                    : 0.0;
}

}  // namespace detail

inline EvalReport score(const std::vector<std::vector<std::string>>& gold,
                        const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size())
    fail_data("score: " + std::to_string(gold.size()) + " gold sentences but " +
              std::to_string(pred.size()) + " predicted");
  EvalReport r;
  std::size_t token_correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size())
      fail_data("score: sentence " + std::to_string(s) + " has " +
                std::to_string(gold[s].size()) + " gold tokens but " +
                std::to_string(pred[s].size()) + " predicted");
    for (std::size_t t = 0; t < gold[s].size(); ++t) token_correct += gold[s][t] == pred[s][t];
    r.token_count += gold[s].size();
    const auto gc = extract_chunks(gold[s]);
    const auto pc = extract_chunks(pred[s]);
    const std::set<Chunk> gset(gc.begin(), gc.end());
    for (const auto& c : gc) ++r.per_class[c.type].gold_count;
    for (const auto& c : pc) {
      auto& cls = r.per_class[c.type];
      ++cls.pred_count;
      if (gset.count(c)) ++cls.correct_count;
    }
  }
  for (auto& [_, c] : r.per_class) {
    detail::finish(c);
    r.overall.gold_count += c.gold_count;
    r.overall.pred_count += c.pred_count;
    r.overall.correct_count += c.correct_count;
  }
  detail::finish(r.overall);
  r.token_accuracy = r.token_count ? 100.0 * static_cast<double>(token_correct) /
                                         static_cast<double>(r.token_count)
                                   : 0.0;
  return r;
}

inline std::vector<std::vector<std::string>> corpus_labels(const Corpus& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) {
    auto& v = out.emplace_back();
    for (const auto& t : s.tokens) v.push_back(t.label);
  }
  return out;
}

inline EvalReport score(const Corpus& gold, const std::vector<std::vector<std::string>>& pred) {
  return score(corpus_labels(gold), pred);
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// conlleval-like aligned text report.
inline std::string report_text(const EvalReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "processed %zu tokens with %zu phrases; found: %zu phrases; correct: %zu.\n",
                r.token_count, r.overall.gold_count, r.overall.pred_count,
                r.overall.correct_count);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "accuracy: %6.2f%%; precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f\n",
                r.token_accuracy, r.overall.precision, r.overall.recall, r.overall.f1);
  out += buf;
  for (const auto& [cls, c] : r.per_class) {
    std::snprintf(buf, sizeof buf, "%17s: precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f  %zu\n",
                  cls.c_str(), c.precision, c.recall, c.f1, c.pred_count);
    out += buf;
  }
  return out;
}

inline nlohmann::json to_json(const ClassScores& c) {
  return {{"precision", c.precision}, {"recall", c.recall},        {"f1", c.f1},
          {"gold_count", c.gold_count}, {"pred_count", c.pred_count}, {"correct_count", c.correct_count}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["overall"] = to_json(r.overall);
  j["per_class"] = nlohmann::json::object();
  for (const auto& [cls, c] : r.per_class) j["per_class"][cls] = to_json(c);
  j["token_accuracy"] = r.token_accuracy;
  j["token_count"] = r.token_count;
  return j;
}

}  // namespace reprner

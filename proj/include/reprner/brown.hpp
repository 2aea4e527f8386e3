#pragma once

// Brown clustering with the bounded active-set greedy algorithm: words enter
// in frequency order, and after each arrival the pair of active clusters
// whose merge loses the least average mutual information (AMI) is merged.
// Once every word is placed, the remaining clusters are merged to a single
// root; a cluster's bit-string is its path from that root.
//
// Probabilities follow the usual formulation of this algorithm: cluster
// marginals come from unigram counts, p(c) = n(c)/T, and the class bigram
// term is p(c,d) = n(c,d)/B over adjacent retained token pairs within a line.
//   AMI = sum_{c,d} p(c,d) ln(p(c,d) / (p(c) p(d)))
// Bigrams with a not-yet-placed word do not contribute.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"

namespace reprner {

struct BrownMerge {
  std::size_t left = 0;    // cluster id (smaller)
  std::size_t right = 0;   // cluster id (larger)
  std::size_t merged = 0;  // id of the new cluster
  double ami = 0.0;        // AMI after the merge
  bool final_phase = false;
};

struct BrownModel {
  std::map<std::string, std::string> paths;
  std::map<std::string, std::size_t> counts;
  std::size_t num_clusters = 0;
  /// Merge history, empty when the model was read from a file.
  std::vector<BrownMerge> merges;
  /// Words in frequency order; index == initial cluster id.
  std::vector<std::string> vocabulary;

  /// Path of a word, "UNK" when unknown.
  std::string path_of(std::string_view word) const {
    auto it = paths.find(std::string(word));
    return it == paths.end() ? "UNK" : it->second;
  }
};

namespace detail {

class BrownInducer {
 public:
  BrownInducer(const std::vector<std::vector<std::string>>& lines, std::size_t C,
               std::size_t min_count)
      : C_(C) {
    std::unordered_map<std::string, std::size_t> raw;
    for (const auto& line : lines)
      for (const auto& w : line) ++raw[w];
    if (raw.empty()) fail_data("brown: empty token stream");
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : raw)
      if (c >= min_count) kept.emplace_back(w, c);
    if (kept.empty()) fail_data("brown: no word reaches min_count");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (C < 1) fail_usage("brown: number of clusters must be >= 1");
    if (C > kept.size())
      fail_data("brown: " + std::to_string(C) + " clusters requested but only " +
                std::to_string(kept.size()) + " word types retained");

    std::unordered_map<std::string, std::size_t> id;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      id.emplace(kept[i].first, i);
      words_.push_back(kept[i].first);
      unigram_.push_back(static_cast<double>(kept[i].second));
      T_ += static_cast<double>(kept[i].second);
    }
    std::unordered_map<std::uint64_t, std::size_t> pairs;
    for (const auto& line : lines) {
      std::size_t prev = npos;
      for (const auto& w : line) {
        auto it = id.find(w);
        const std::size_t cur = it == id.end() ? npos : it->second;
        if (prev != npos && cur != npos) {
          ++pairs[(static_cast<std::uint64_t>(prev) << 32) | cur];
          B_ += 1.0;
        }
        prev = cur;
      }
    }
    right_.resize(words_.size());
    left_.resize(words_.size());
    for (const auto& [key, c] : pairs) {
      const std::size_t a = key >> 32, b = key & 0xffffffffu;
      right_[a].emplace_back(b, static_cast<double>(c));
      if (a != b) left_[b].emplace_back(a, static_cast<double>(c));
    }
  }

  BrownModel run() {
    const std::size_t V = words_.size();
    const std::size_t slots = C_ + 1;
    n2_.assign(slots * slots, 0.0);
    q_.assign(slots * slots, 0.0);
    loss_.assign(slots * slots, 0.0);
    p1_.assign(slots, 0.0);
    slot_cluster_.assign(slots, npos);
    rep_.assign(slots, npos);
    parent_.resize(V);
    for (std::size_t w = 0; w < V; ++w) parent_[w] = w;
    size_.assign(V, 1);
    root_slot_.assign(V, npos);
    for (std::size_t s = slots; s-- > 0;) free_.push_back(s);
    next_id_ = V;

    BrownModel model;
    model.vocabulary = words_;
    std::vector<std::pair<std::size_t, std::size_t>> tree;  // children per merged id - V

    for (std::size_t w = 0; w < V; ++w) {
      add_word(w);
      if (active_.size() > C_) model.merges.push_back(merge_best(false, tree));
    }
    const std::vector<std::size_t> leaves = [&] {
      std::vector<std::size_t> ids;
      for (std::size_t s : active_) ids.push_back(slot_cluster_[s]);
      return ids;
    }();
    std::map<std::size_t, std::vector<std::size_t>> leaf_words;
    for (std::size_t w = 0; w < V; ++w) leaf_words[slot_cluster_[slot_of(w)]].push_back(w);
    while (active_.size() > 1) model.merges.push_back(merge_best(true, tree));

    // Paths from the root over the final-phase tree.
    std::map<std::size_t, std::string> path;
    const std::size_t root = slot_cluster_[active_.front()];
    path[root] = leaves.size() == 1 ? "0" : "";
    for (std::size_t m = tree.size(); m-- > 0;) {
      const std::size_t id = V + m;
      auto it = path.find(id);
      if (it == path.end()) continue;
      path[tree[m].first] = it->second + "0";
      path[tree[m].second] = it->second + "1";
    }
    for (std::size_t leaf : leaves)
      for (std::size_t w : leaf_words[leaf]) {
        model.paths[words_[w]] = path.at(leaf);
        model.counts[words_[w]] = static_cast<std::size_t>(unigram_[w]);
      }
    model.num_clusters = leaves.size();
    return model;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  double& n2(std::size_t a, std::size_t b) { return n2_[a * (C_ + 1) + b]; }
  double& q(std::size_t a, std::size_t b) { return q_[a * (C_ + 1) + b]; }
  double& loss(std::size_t a, std::size_t b) {
    return a < b ? loss_[a * (C_ + 1) + b] : loss_[b * (C_ + 1) + a];
  }

  std::size_t find(std::size_t w) {
    while (parent_[w] != w) {
      parent_[w] = parent_[parent_[w]];
      w = parent_[w];
    }
    return w;
  }

  std::size_t slot_of(std::size_t w) { return root_slot_[find(w)]; }

  double qv(double n, double pa, double pb) const {
    if (n <= 0.0) return 0.0;
    const double p = n / B_;
    return p * std::log(p / (pa * pb));
  }

  void refresh_q(std::size_t s) {
    for (std::size_t e : active_) {
      q(s, e) = qv(n2(s, e), p1_[s], p1_[e]);
      q(e, s) = qv(n2(e, s), p1_[e], p1_[s]);
    }
  }

  std::vector<double> side_sums() {
    std::vector<double> S(C_ + 1, 0.0);
    for (std::size_t s : active_) {
      double acc = -q(s, s);
      for (std::size_t e : active_) acc += q(s, e) + q(e, s);
      S[s] = acc;
    }
    return S;
  }

  double full_loss(std::size_t s, std::size_t t, const std::vector<double>& S) {
    const double before = S[s] + S[t] - q(s, t) - q(t, s);
    const double pm = p1_[s] + p1_[t];
    double after = qv(n2(s, s) + n2(s, t) + n2(t, s) + n2(t, t), pm, pm);
    for (std::size_t e : active_) {
      if (e == s || e == t) continue;
      after += qv(n2(s, e) + n2(t, e), pm, p1_[e]) + qv(n2(e, s) + n2(e, t), p1_[e], pm);
    }
    return before - after;
  }

  // Terms of L(s,t) that involve a third cluster e.
  double pair_terms(std::size_t s, std::size_t t, std::size_t e) {
    const double pm = p1_[s] + p1_[t];
    return q(s, e) + q(e, s) + q(t, e) + q(e, t) - qv(n2(s, e) + n2(t, e), pm, p1_[e]) -
           qv(n2(e, s) + n2(e, t), p1_[e], pm);
  }

  void add_word(std::size_t w) {
    const std::size_t k = free_.back();
    free_.pop_back();
    for (std::size_t e = 0; e <= C_; ++e) n2(k, e) = n2(e, k) = q(k, e) = q(e, k) = 0.0;
    slot_cluster_[k] = w;
    rep_[k] = w;
    root_slot_[w] = k;
    p1_[k] = unigram_[w] / T_;
    for (const auto& [u, c] : right_[w])
      if (u <= w) n2(k, slot_of(u)) += c;
    for (const auto& [u, c] : left_[w])
      if (u < w) n2(slot_of(u), k) += c;
    active_.push_back(k);
    refresh_q(k);

    for (std::size_t a = 0; a + 1 < active_.size(); ++a)
      for (std::size_t b = a + 1; b + 1 < active_.size(); ++b)
        loss(active_[a], active_[b]) += pair_terms(active_[a], active_[b], k);
    const auto S = side_sums();
    for (std::size_t s : active_)
      if (s != k) loss(s, k) = full_loss(s, k, S);
  }

  double ami() {
    double total = 0.0;
    for (std::size_t s : active_)
      for (std::size_t t : active_) total += q(s, t);
    return total;
  }

  BrownMerge merge_best(bool final_phase, std::vector<std::pair<std::size_t, std::size_t>>& tree) {
    // Minimum loss; near-ties (1e-12) go to the lexicographically smallest id pair.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active_.size(); ++a)
      for (std::size_t b = a + 1; b < active_.size(); ++b)
        best = std::min(best, loss(active_[a], active_[b]));
    std::size_t bi = npos, bj = npos;
    std::pair<std::size_t, std::size_t> best_ids{npos, npos};
    for (std::size_t a = 0; a < active_.size(); ++a)
      for (std::size_t b = a + 1; b < active_.size(); ++b) {
        const std::size_t sa = active_[a], sb = active_[b];
        if (loss(sa, sb) > best + 1e-12) continue;
        const std::pair<std::size_t, std::size_t> ids = std::minmax(slot_cluster_[sa], slot_cluster_[sb]);
        if (ids < best_ids) {
          best_ids = ids;
          bi = sa;
          bj = sb;
        }
      }
    // Keep the merged cluster in the slot of the smaller id.
    if (slot_cluster_[bi] > slot_cluster_[bj]) std::swap(bi, bj);

    std::vector<std::size_t> others;
    for (std::size_t s : active_)
      if (s != bi && s != bj) others.push_back(s);
    for (std::size_t a = 0; a < others.size(); ++a)
      for (std::size_t b = a + 1; b < others.size(); ++b)
        loss(others[a], others[b]) -= pair_terms(others[a], others[b], bi) +
                                      pair_terms(others[a], others[b], bj);

    // Fold bj into bi.
    for (std::size_t e : active_) {
      if (e == bi || e == bj) continue;
      n2(bi, e) += n2(bj, e);
      n2(e, bi) += n2(e, bj);
    }
    n2(bi, bi) += n2(bi, bj) + n2(bj, bi) + n2(bj, bj);
    p1_[bi] += p1_[bj];
    {
      std::size_t ra = find(rep_[bi]), rb = find(rep_[bj]);
      if (size_[ra] < size_[rb]) std::swap(ra, rb);
      parent_[rb] = ra;
      size_[ra] += size_[rb];
      rep_[bi] = ra;
      root_slot_[ra] = bi;
    }
    active_.erase(std::find(active_.begin(), active_.end(), bj));
    free_.push_back(bj);
    for (std::size_t e = 0; e <= C_; ++e) n2(bj, e) = n2(e, bj) = q(bj, e) = q(e, bj) = 0.0;

    BrownMerge m;
    m.left = best_ids.first;
    m.right = best_ids.second;
    m.merged = next_id_++;
    m.final_phase = final_phase;
    slot_cluster_[bi] = m.merged;
    slot_cluster_[bj] = npos;
    tree.emplace_back(m.left, m.right);
    refresh_q(bi);

    for (std::size_t a = 0; a < others.size(); ++a)
      for (std::size_t b = a + 1; b < others.size(); ++b)
        loss(others[a], others[b]) += pair_terms(others[a], others[b], bi);
    const auto S = side_sums();
    for (std::size_t s : others) loss(s, bi) = full_loss(s, bi, S);

    m.ami = ami();
    return m;
  }

  std::size_t C_;
  std::vector<std::string> words_;
  std::vector<double> unigram_;
  double T_ = 0.0, B_ = 0.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> right_, left_;

  std::vector<double> n2_, q_, loss_, p1_;
  std::vector<std::size_t> slot_cluster_, active_, free_;
  std::vector<std::size_t> rep_, parent_, size_, root_slot_;
  std::size_t next_id_ = 0;
};

}  // namespace detail

/// Induces num_clusters Brown clusters from whitespace-tokenized lines.
/// Words with fewer than min_count occurrences are left out (path "UNK").
inline BrownModel brown_induce(const std::vector<std::vector<std::string>>& lines,
                               std::size_t num_clusters, std::size_t min_count = 1) {
  detail::BrownInducer inducer(lines, num_clusters, min_count);
  return inducer.run();
}

inline BrownModel brown_induce(std::string_view text, std::size_t num_clusters,
                               std::size_t min_count = 1) {
  return brown_induce(tokenize_lines(text), num_clusters, min_count);
}

/// `bc<p>=<first p bits>` per prefix length, or `bc=<path>` when no lengths
/// are given. Unknown words yield the single attribute `bc=UNK`.
inline std::vector<std::string> brown_features(const BrownModel& model, std::string_view word,
                                               const std::vector<std::size_t>& prefix_lengths) {
  auto it = model.paths.find(std::string(word));
  if (it == model.paths.end()) return {"bc=UNK"};
  const std::string& path = it->second;
  if (prefix_lengths.empty()) return {"bc=" + path};
  std::vector<std::string> out;
  out.reserve(prefix_lengths.size());
  for (std::size_t p : prefix_lengths)
    out.push_back("bc" + std::to_string(p) + "=" + path.substr(0, std::min(p, path.size())));
  return out;
}

/// "<path>\t<word>\t<count>" lines, grouped by path, most frequent first.
inline std::string serialize_brown(const BrownModel& model) {
  std::vector<std::tuple<std::string, std::size_t, std::string>> rows;
  for (const auto& [w, p] : model.paths) {
    auto c = model.counts.find(w);
    rows.emplace_back(p, c == model.counts.end() ? 0 : c->second, w);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::string out;
  for (const auto& [p, c, w] : rows) out += p + "\t" + w + "\t" + std::to_string(c) + "\n";
  return out;
}

inline BrownModel parse_brown(std::string_view text) {
  BrownModel model;
  std::size_t line_no = 0, start = 0;
  std::map<std::string, bool> distinct;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_whitespace(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (fields.empty()) continue;
    if (fields.size() < 2)
      fail_data("line " + std::to_string(line_no) + ": expected '<path>\\t<word>[\\t<count>]'");
    const std::string path(fields[0]);
    if (path.empty() || path.find_first_not_of("01") != std::string::npos)
      fail_data("line " + std::to_string(line_no) + ": path is not a bit-string");
    std::size_t count = 0;
    if (fields.size() > 2) {
      auto r = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count);
      if (r.ec != std::errc()) fail_data("line " + std::to_string(line_no) + ": bad count");
    }
    model.paths[std::string(fields[1])] = path;
    model.counts[std::string(fields[1])] = count;
    distinct[path] = true;
  }
  if (model.paths.empty()) fail_data("brown file has no rows");
  model.num_clusters = distinct.size();
  return model;
}

}  // namespace reprner

#pragma once

// Lloyd's k-means over embedding tables and the cluster features built on it.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "random.hpp"

namespace reprner {

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::string> words;  // byte-order sorted
  std::vector<double> centroids;   // k x dim
  std::vector<std::size_t> assignment;
  double sse = 0.0;
  /// SSE after each Lloyd iteration (assignment + centroid update).
  std::vector<double> sse_trace;
  std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(std::span<const float> x, const double* c, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(x[d]) - c[d];
    s += diff * diff;
  }
  return s;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable or max_iters is reached. Points are visited in byte order of their
/// words, so the result depends on the word set and not on file order.
/// A cluster that goes empty takes the point farthest from its own centroid.
inline KMeansResult kmeans_fit(const EmbeddingTable& table, std::size_t k, std::uint64_t seed,
                               std::size_t max_iters = 100) {
  if (k < 1) fail_usage("kmeans: k must be >= 1");
  if (k > table.size())
    fail_data("kmeans: k = " + std::to_string(k) + " exceeds the " +
              std::to_string(table.size()) + " words in the table");
  if (max_iters < 1) fail_usage("kmeans: max_iters must be >= 1");

  KMeansResult res;
  res.k = k;
  res.dim = table.dim();
  const std::size_t dim = table.dim();
  std::vector<std::size_t> order(table.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return table.words()[a] < table.words()[b]; });
  const std::size_t n = order.size();
  std::vector<std::span<const float>> pts;
  pts.reserve(n);
  for (std::size_t i : order) {
    res.words.push_back(table.words()[i]);
    pts.push_back(table.row(i));
  }

  // k-means++ seeding.
  Rng rng(seed);
  res.centroids.assign(k * dim, 0.0);
  std::vector<bool> chosen(n, false);
  auto place = [&](std::size_t c, std::size_t p) {
    chosen[p] = true;
    for (std::size_t d = 0; d < dim; ++d) res.centroids[c * dim + d] = pts[p][d];
  };
  place(0, rng.below(n));
  std::vector<double> d2(n);
  for (std::size_t p = 0; p < n; ++p) d2[p] = detail::sq_dist(pts[p], res.centroids.data(), dim);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t p = 0; p < n; ++p) {
        if (d2[p] <= 0.0) continue;
        pick = p;
        r -= d2[p];
        if (r < 0.0) break;
      }
    } else {
      for (std::size_t p = 0; p < n && pick == n; ++p)
        if (!chosen[p]) pick = p;
    }
    place(c, pick);
    for (std::size_t p = 0; p < n; ++p)
      d2[p] = std::min(d2[p], detail::sq_dist(pts[p], res.centroids.data() + c * dim, dim));
  }

  res.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<std::size_t> sizes(k);
  std::vector<double> dist(n);
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    bool changed = false;
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = detail::sq_dist(pts[p], res.centroids.data() + c * dim, dim);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.assignment[p] != best) changed = true;
      res.assignment[p] = best;
      dist[p] = best_d;
    }
    if (!changed) break;

    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t a : res.assignment) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t p = 0; p < n; ++p)
        if (sizes[res.assignment[p]] > 1 && (far == n || dist[p] > dist[far])) far = p;
      if (far == n) break;  // cannot happen while k <= n
      --sizes[res.assignment[far]];
      res.assignment[far] = c;
      sizes[c] = 1;
      dist[far] = 0.0;
    }

    std::fill(res.centroids.begin(), res.centroids.end(), 0.0);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t d = 0; d < dim; ++d)
        res.centroids[res.assignment[p] * dim + d] += pts[p][d];
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t d = 0; d < dim; ++d)
        res.centroids[c * dim + d] /= static_cast<double>(sizes[c]);

    double sse = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      sse += detail::sq_dist(pts[p], res.centroids.data() + res.assignment[p] * dim, dim);
    if (!std::isfinite(sse)) fail_numerical("kmeans: non-finite SSE at iteration " + std::to_string(iter));
    res.sse_trace.push_back(sse);
    res.iterations = iter;
  }
  res.sse = res.sse_trace.back();
  return res;
}

/// Cluster assignments at several granularities.
struct KMeansModel {
  std::vector<std::size_t> ks;
  std::map<std::size_t, KMeansResult> per_k;
  std::unordered_map<std::string, std::vector<std::size_t>> assignments;  // word -> one id per k

  const std::vector<std::size_t>* find(std::string_view word) const {
    auto it = assignments.find(std::string(word));
    return it == assignments.end() ? nullptr : &it->second;
  }
};

inline void validate_ks(const std::vector<std::size_t>& ks) {
  if (ks.empty()) fail_usage("kmeans: the list of k values is empty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) fail_usage("kmeans: k must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1]) fail_usage("kmeans: k values must be strictly increasing");
  }
}

/// One kmeans_fit per k, seeded with seed + k.
inline KMeansModel kmeans_multi(const EmbeddingTable& table, const std::vector<std::size_t>& ks,
                                std::uint64_t seed, std::size_t max_iters = 100) {
  validate_ks(ks);
  KMeansModel model;
  model.ks = ks;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    auto res = kmeans_fit(table, ks[ki], seed + ks[ki], max_iters);
    for (std::size_t p = 0; p < res.words.size(); ++p) {
      auto& v = model.assignments[res.words[p]];
      v.resize(ks.size());
      v[ki] = res.assignment[p];
    }
    model.per_k.emplace(ks[ki], std::move(res));
  }
  return model;
}

struct ClusterContext {
  std::optional<std::string> prev;
  std::optional<std::string> next;
};

/// `ce.k<k>=<id>` per granularity. With compound, adds conjunctions of
/// consecutive granularities (`ce.k<a>&k<b>=<ia>_<ib>`) and, when neighbors
/// are given, the smallest-k id crossed with each neighbor's
/// (`ce.k<k>&prev=<id>_<prev id>`, `ce.k<k>&next=...`). Unknown words yield `ce=UNK`.
inline std::vector<std::string> cluster_features(const KMeansModel& model, std::string_view word,
                                                 bool compound,
                                                 const ClusterContext& context = {}) {
  const auto* ids = model.find(word);
  if (!ids) return {"ce=UNK"};
  std::vector<std::string> out;
  const auto& ks = model.ks;
  for (std::size_t i = 0; i < ks.size(); ++i)
    out.push_back("ce.k" + std::to_string(ks[i]) + "=" + std::to_string((*ids)[i]));
  if (!compound) return out;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i)
    out.push_back("ce.k" + std::to_string(ks[i]) + "&k" + std::to_string(ks[i + 1]) + "=" +
                  std::to_string((*ids)[i]) + "_" + std::to_string((*ids)[i + 1]));
  auto neighbor = [&](const std::optional<std::string>& w, std::string_view tag) {
    if (!w) return;
    const auto* nid = model.find(*w);
    out.push_back("ce.k" + std::to_string(ks[0]) + "&" + std::string(tag) + "=" +
                  std::to_string((*ids)[0]) + "_" + (nid ? std::to_string((*nid)[0]) : "UNK"));
  };
  neighbor(context.prev, "prev");
  neighbor(context.next, "next");
  return out;
}

/// Header "k\t<k1>\t<k2>..." then "<word>\t<c_k1>\t<c_k2>..." in byte order of words.
inline std::string serialize_kmeans(const KMeansModel& model) {
  std::string out = "k";
  for (std::size_t k : model.ks) out += "\t" + std::to_string(k);
  out += "\n";
  std::vector<const std::string*> words;
  for (const auto& [w, _] : model.assignments) words.push_back(&w);
  std::sort(words.begin(), words.end(), [](auto* a, auto* b) { return *a < *b; });
  for (const auto* w : words) {
    out += *w;
    for (std::size_t c : model.assignments.at(*w)) out += "\t" + std::to_string(c);
    out += "\n";
  }
  return out;
}

inline KMeansModel parse_kmeans(std::string_view text) {
  KMeansModel model;
  std::size_t line_no = 0, start = 0;
  bool header = true;
  auto to_size = [&](std::string_view f) {
    std::size_t v = 0;
    auto r = std::from_chars(f.data(), f.data() + f.size(), v);
    if (r.ec != std::errc() || r.ptr != f.data() + f.size())
      fail_data("line " + std::to_string(line_no) + ": expected an integer, got '" +
                std::string(f) + "'");
    return v;
  };
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_whitespace(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (fields.empty()) continue;
    if (header) {
      if (fields[0] != "k") fail_data("line 1: expected 'k' header listing the k values");
      for (std::size_t i = 1; i < fields.size(); ++i) model.ks.push_back(to_size(fields[i]));
      validate_ks(model.ks);
      header = false;
      continue;
    }
    if (fields.size() != model.ks.size() + 1)
      fail_data("line " + std::to_string(line_no) + ": expected " +
                std::to_string(model.ks.size()) + " cluster ids");
    std::vector<std::size_t> ids;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      ids.push_back(to_size(fields[i]));
      if (ids.back() >= model.ks[i - 1])
        fail_data("line " + std::to_string(line_no) + ": cluster id out of range");
    }
    model.assignments[std::string(fields[0])] = std::move(ids);
  }
  if (header) fail_data("kmeans file is empty");
  return model;
}

}  // namespace reprner

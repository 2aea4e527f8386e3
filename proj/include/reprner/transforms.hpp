#pragma once

// Dense-to-discrete and dense-to-sparse embedding transforms: sign/mean/median
// ternarization and overcomplete sparse coding (plain and nonnegative).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "random.hpp"

namespace reprner {

enum class Ternary : std::int8_t { zero = 0, pos = 1, neg = -1 };

enum class BinarizeMethod { A, B, C };

inline char method_letter(BinarizeMethod m) {
  switch (m) {
    case BinarizeMethod::A: return 'A';
    case BinarizeMethod::B: return 'B';
    case BinarizeMethod::C: return 'C';
  }
  return '?';
}

inline BinarizeMethod parse_binarize_method(std::string_view s) {
  if (s == "A" || s == "a") return BinarizeMethod::A;
  if (s == "B" || s == "b") return BinarizeMethod::B;
  if (s == "C" || s == "c") return BinarizeMethod::C;
  fail_usage("unknown binarization method '" + std::string(s) + "'");
}

inline std::string_view ternary_symbol(Ternary t) {
  switch (t) {
    case Ternary::pos: return "+U";
    case Ternary::neg: return "-B";
    case Ternary::zero: return "0";
  }
  return "?";
}

/// Per-vector statistics of the positive and negative entries.
struct BinarizationThresholds {
  std::optional<double> mean_pos, mean_neg, median_pos, median_neg;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename T>
void check_finite_nonempty(std::span<const T> x) {
  if (x.empty()) fail_data("binarize: empty vector");
  for (T v : x)
    if (!std::isfinite(static_cast<double>(v))) fail_data("binarize: non-finite entry");
}

}  // namespace detail

template <typename T>
BinarizationThresholds binarization_thresholds(std::span<const T> x) {
  detail::check_finite_nonempty(x);
  std::vector<double> pos, neg;
  for (T v : x) {
    const double d = static_cast<double>(v);
    if (d > 0) pos.push_back(d);
    else if (d < 0) neg.push_back(d);
  }
  BinarizationThresholds th;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double d : v) s += d;
    return s / static_cast<double>(v.size());
  };
  if (!pos.empty()) {
    th.mean_pos = mean(pos);
    th.median_pos = detail::median_of(pos);
  }
  if (!neg.empty()) {
    th.mean_neg = mean(neg);
    th.median_neg = detail::median_of(neg);
  }
  return th;
}

/// Method A: sign test (x > 0). Methods B/C: x >= upper -> +U, x <= lower -> -B,
/// with upper/lower the mean (B) or median (C) of this vector's positive and
/// negative entries. A vector with no entries of one sign never emits that symbol.
template <typename T>
std::vector<Ternary> binarize(std::span<const T> x, BinarizeMethod method) {
  detail::check_finite_nonempty(x);
  std::vector<Ternary> out(x.size(), Ternary::zero);
  if (method == BinarizeMethod::A) {
    for (std::size_t j = 0; j < x.size(); ++j)
      if (static_cast<double>(x[j]) > 0) out[j] = Ternary::pos;
    return out;
  }
  const auto th = binarization_thresholds(x);
  const auto upper = method == BinarizeMethod::B ? th.mean_pos : th.median_pos;
  const auto lower = method == BinarizeMethod::B ? th.mean_neg : th.median_neg;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double v = static_cast<double>(x[j]);
    if (upper && v >= *upper) out[j] = Ternary::pos;
    else if (lower && v <= *lower) out[j] = Ternary::neg;
  }
  return out;
}

inline std::vector<Ternary> binarize(const std::vector<double>& x, BinarizeMethod method) {
  return binarize(std::span<const double>(x), method);
}

// ---------------------------------------------------------------------------
// Sparse overcomplete coding

struct SparseCodingConfig {
  double delta = 0.5;  // l1 weight on codes
  double tau = 1e-5;   // l2 weight on the dictionary
  std::size_t K = 500;
  double eta = 0.05;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  bool nonneg = false;
  std::size_t threads = 1;

  void validate() const {
    if (K < 1) fail_usage("sparse coding: K must be >= 1");
    if (!(delta >= 0)) fail_usage("sparse coding: delta must be >= 0");
    if (!(tau >= 0)) fail_usage("sparse coding: tau must be >= 0");
    if (!(eta > 0)) fail_usage("sparse coding: eta must be > 0");
    if (epochs < 1) fail_usage("sparse coding: epochs must be >= 1");
  }
};

/// Per-word dual-averaging state for the code coordinates.
struct OptimizerState {
  std::size_t t = 0;
  std::vector<double> avg_grad;     // running mean of gradients
  std::vector<double> grad_sq_sum;  // sum of squared gradients
};

struct SparseCodeResult {
  std::size_t dim = 0;  // L
  std::size_t K = 0;
  std::vector<double> dictionary;  // L x K, row-major
  std::vector<std::string> words;
  std::vector<double> codes;  // |words| x K, row-major
  /// Objective at initialization followed by one entry per epoch.
  std::vector<double> objective_trace;

  std::span<const double> code(std::size_t i) const { return {codes.data() + i * K, K}; }

  double zero_fraction() const {
    if (codes.empty()) return 1.0;
    std::size_t zeros = 0;
    for (double c : codes) zeros += c == 0.0;
    return static_cast<double>(zeros) / static_cast<double>(codes.size());
  }
};

namespace detail {

// r = x - D a
inline void residual(std::span<const float> x, const std::vector<double>& D,
                     std::span<const double> a, std::size_t K, std::vector<double>& r) {
  const std::size_t L = x.size();
  r.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    double s = 0.0;
    const double* drow = D.data() + l * K;
    for (std::size_t j = 0; j < K; ++j) s += drow[j] * a[j];
    r[l] = static_cast<double>(x[l]) - s;
  }
}

inline double objective(const EmbeddingTable& table, const std::vector<double>& D,
                        const std::vector<double>& codes, std::size_t K, double delta,
                        double tau) {
  double total = 0.0;
  std::vector<double> r;
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::span<const double> a(codes.data() + i * K, K);
    residual(table.row(i), D, a, K, r);
    double sq = 0.0, l1 = 0.0;
    for (double v : r) sq += v * v;
    for (double v : a) l1 += std::abs(v);
    total += sq + delta * l1;
  }
  double dnorm = 0.0;
  for (double d : D) dnorm += d * d;
  return total + tau * dnorm;
}

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
}

}  // namespace detail

/// Learns a dictionary D (L x K) and codes a_i minimizing
///   sum_i ||x_i - D a_i||^2 + delta ||a_i||_1 + tau ||D||_F^2.
/// Each epoch first updates every code with the l1-regularized dual-averaging
/// (AdaGrad) closed form, then takes one AdaGrad step on D using the full
/// gradient. Codes are independent given D, so the result does not depend
/// on the thread count.
inline SparseCodeResult sparse_code(const EmbeddingTable& table, const SparseCodingConfig& config) {
  config.validate();
  if (table.empty()) fail_data("sparse coding: empty embedding table");
  const std::size_t L = table.dim(), K = config.K, V = table.size();

  SparseCodeResult res;
  res.dim = L;
  res.K = K;
  res.words = table.words();
  res.codes.assign(V * K, 0.0);
  res.dictionary.resize(L * K);
  Rng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(K));
  for (double& d : res.dictionary) d = rng.uniform(-bound, bound);

  std::vector<OptimizerState> states(V);
  for (auto& s : states) {
    s.avg_grad.assign(K, 0.0);
    s.grad_sq_sum.assign(K, 0.0);
  }
  std::vector<double> dict_sq_sum(L * K, 0.0);
  std::vector<double> dict_grad(L * K);

  res.objective_trace.push_back(
      detail::objective(table, res.dictionary, res.codes, K, config.delta, config.tau));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    detail::parallel_for(V, config.threads, [&](std::size_t i) {
      auto& st = states[i];
      st.t += 1;
      const double t = static_cast<double>(st.t);
      double* a = res.codes.data() + i * K;
      std::vector<double> r;
      detail::residual(table.row(i), res.dictionary, {a, K}, K, r);
      for (std::size_t j = 0; j < K; ++j) {
        double g = 0.0;
        for (std::size_t l = 0; l < L; ++l) g += res.dictionary[l * K + j] * r[l];
        g *= -2.0;
        st.avg_grad[j] += (g - st.avg_grad[j]) / t;
        st.grad_sq_sum[j] += g * g;
      }
      for (std::size_t j = 0; j < K; ++j) {
        const double gbar = st.avg_grad[j];
        const double mag = std::abs(gbar);
        if (mag <= config.delta || st.grad_sq_sum[j] == 0.0) {
          a[j] = 0.0;
          continue;
        }
        const double sign = gbar > 0 ? 1.0 : -1.0;
        const double gamma =
            -sign * (config.eta * t / std::sqrt(st.grad_sq_sum[j])) * (mag - config.delta);
        a[j] = config.nonneg && gamma < 0 ? 0.0 : gamma;
      }
    });

    // Full dictionary gradient, accumulated in word order.
    for (std::size_t k = 0; k < L * K; ++k) dict_grad[k] = 2.0 * config.tau * res.dictionary[k];
    std::vector<double> r;
    for (std::size_t i = 0; i < V; ++i) {
      auto a = res.code(i);
      detail::residual(table.row(i), res.dictionary, a, K, r);
      for (std::size_t l = 0; l < L; ++l) {
        const double rl = -2.0 * r[l];
        if (rl == 0.0) continue;
        double* grow = dict_grad.data() + l * K;
        for (std::size_t j = 0; j < K; ++j)
          if (a[j] != 0.0) grow[j] += rl * a[j];
      }
    }
    for (std::size_t k = 0; k < L * K; ++k) {
      dict_sq_sum[k] += dict_grad[k] * dict_grad[k];
      if (dict_sq_sum[k] > 0.0)
        res.dictionary[k] -= config.eta * dict_grad[k] / std::sqrt(dict_sq_sum[k]);
    }

    const double obj =
        detail::objective(table, res.dictionary, res.codes, K, config.delta, config.tau);
    if (!std::isfinite(obj))
      fail_numerical("sparse coding: non-finite objective at epoch " + std::to_string(epoch));
    res.objective_trace.push_back(obj);
  }
  return res;
}

/// sum_i ||x_i - D a_i||^2 + delta sum_i ||a_i||_1 + tau ||D||_F^2, codes
/// matched to table rows by word.
inline double sparse_objective(const SparseCodeResult& result, const EmbeddingTable& table,
                               const SparseCodingConfig& config) {
  if (result.dim != table.dim() || result.dictionary.size() != result.dim * result.K ||
      result.codes.size() != result.words.size() * result.K)
    fail_data("sparse_objective: dimension mismatch");
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < result.words.size(); ++i) index.emplace(result.words[i], i);
  std::vector<double> codes(table.size() * result.K, 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto it = index.find(table.words()[i]);
    if (it == index.end()) fail_data("sparse_objective: no code for '" + table.words()[i] + "'");
    auto c = result.code(it->second);
    std::copy(c.begin(), c.end(), codes.begin() + static_cast<std::ptrdiff_t>(i * result.K));
  }
  return detail::objective(table, result.dictionary, codes, result.K, config.delta, config.tau);
}

// ---------------------------------------------------------------------------
// Sparse vector dumps: "<word> <j>:<value> ..." with ascending indices.

using SparseEntries = std::vector<std::pair<std::uint32_t, double>>;

struct SparseVectors {
  std::size_t dim = 0;
  std::vector<std::string> words;
  std::unordered_map<std::string, SparseEntries> vectors;

  const SparseEntries* find(std::string_view word) const {
    auto it = vectors.find(std::string(word));
    return it == vectors.end() ? nullptr : &it->second;
  }

  void add(const std::string& word, SparseEntries entries) {
    if (vectors.emplace(word, std::move(entries)).second) words.push_back(word);
  }
};

inline SparseVectors to_sparse_vectors(const SparseCodeResult& res) {
  SparseVectors out;
  out.dim = res.K;
  for (std::size_t i = 0; i < res.words.size(); ++i) {
    SparseEntries e;
    auto c = res.code(i);
    for (std::size_t j = 0; j < res.K; ++j)
      if (c[j] != 0.0) e.emplace_back(static_cast<std::uint32_t>(j), c[j]);
    out.add(res.words[i], std::move(e));
  }
  return out;
}

/// Ternary codes as +1 / -1 entries, ZERO omitted.
inline SparseVectors binarize_table(const EmbeddingTable& table, BinarizeMethod method) {
  SparseVectors out;
  out.dim = table.dim();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto sym = binarize(table.row(i), method);
    SparseEntries e;
    for (std::size_t j = 0; j < sym.size(); ++j)
      if (sym[j] != Ternary::zero)
        e.emplace_back(static_cast<std::uint32_t>(j), sym[j] == Ternary::pos ? 1.0 : -1.0);
    out.add(table.words()[i], std::move(e));
  }
  return out;
}

inline std::string serialize_sparse_vectors(const SparseVectors& sv) {
  std::string out;
  char buf[48];
  for (const auto& w : sv.words) {
    out += w;
    for (const auto& [j, v] : sv.vectors.at(w)) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", j, v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

/// The dump carries no dimension; it is the largest index + 1 unless given.
inline SparseVectors parse_sparse_vectors(std::string_view text, std::size_t dim = 0) {
  SparseVectors sv;
  std::size_t line_no = 0, start = 0, max_index = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split_whitespace(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (fields.empty()) continue;
    SparseEntries entries;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto colon = fields[f].find(':');
      std::uint32_t j = 0;
      double v = 0.0;
      bool ok = colon != std::string_view::npos;
      if (ok) {
        auto r1 = std::from_chars(fields[f].data(), fields[f].data() + colon, j);
        auto r2 = std::from_chars(fields[f].data() + colon + 1,
                                  fields[f].data() + fields[f].size(), v);
        ok = r1.ec == std::errc() && r1.ptr == fields[f].data() + colon &&
             r2.ec == std::errc() && r2.ptr == fields[f].data() + fields[f].size() &&
             std::isfinite(v);
      }
      if (!ok)
        fail_data("line " + std::to_string(line_no) + ": malformed entry '" +
                  std::string(fields[f]) + "'");
      if (!entries.empty() && j <= entries.back().first)
        fail_data("line " + std::to_string(line_no) + ": indices not strictly ascending");
      entries.emplace_back(j, v);
      max_index = std::max<std::size_t>(max_index, j + 1);
    }
    sv.add(std::string(fields[0]), std::move(entries));
  }
  sv.dim = std::max(dim, max_index);
  return sv;
}

}  // namespace reprner

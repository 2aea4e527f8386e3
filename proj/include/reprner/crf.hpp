#pragma once

// First-order linear-chain CRF. State features pair an attribute with a
// label and contribute weight * value; transitions pair adjacent labels.
// Training maximizes the L2-penalized conditional log-likelihood with L-BFGS.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"

namespace reprner {

struct TrainingConfig {
  double l2_sigma2 = 1.0;
  std::size_t max_iterations = 300;
  double convergence_tol = 1e-5;
  std::size_t lbfgs_memory = 6;
  std::size_t threads = 1;

  void validate() const {
    if (!(l2_sigma2 > 0)) fail_usage("l2_sigma2 must be positive");
    if (!(convergence_tol > 0)) fail_usage("convergence_tol must be positive");
    if (lbfgs_memory < 1) fail_usage("lbfgs_memory must be positive");
  }
};

inline nlohmann::json to_json(const TrainingConfig& c) {
  return {{"l2_sigma2", c.l2_sigma2},
          {"max_iterations", c.max_iterations},
          {"convergence_tol", c.convergence_tol},
          {"lbfgs_memory", c.lbfgs_memory}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.l2_sigma2 = j.value("l2_sigma2", c.l2_sigma2);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
  c.lbfgs_memory = j.value("lbfgs_memory", c.lbfgs_memory);
  c.validate();
  return c;
}

/// Attribute (index, value) pairs per token plus label indices.
struct CompiledSentence {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> tokens;
  std::vector<std::uint32_t> labels;  // empty when unlabeled

  std::size_t size() const { return tokens.size(); }
};

class CrfModel {
 public:
  CrfModel() = default;

  CrfModel(std::vector<std::string> labels, std::vector<std::string> attributes)
      : labels_(std::move(labels)), attributes_(std::move(attributes)) {
    if (labels_.empty()) fail_data("CRF model needs at least one label");
    for (std::size_t y = 0; y < labels_.size(); ++y)
      if (!label_index_.emplace(labels_[y], static_cast<std::uint32_t>(y)).second)
        fail_data("duplicate label '" + labels_[y] + "'");
    for (std::size_t a = 0; a < attributes_.size(); ++a)
      if (!attr_index_.emplace(attributes_[a], static_cast<std::uint32_t>(a)).second)
        fail_data("duplicate attribute '" + attributes_[a] + "'");
    weights_.assign(attributes_.size() * labels_.size() + labels_.size() * labels_.size(), 0.0);
  }

  std::size_t num_labels() const { return labels_.size(); }
  std::size_t num_attributes() const { return attributes_.size(); }
  std::size_t num_weights() const { return weights_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& attributes() const { return attributes_; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  double& state(std::size_t attr, std::size_t label) {
    return weights_[attr * labels_.size() + label];
  }
  double state(std::size_t attr, std::size_t label) const {
    return weights_[attr * labels_.size() + label];
  }
  std::size_t transition_offset() const { return attributes_.size() * labels_.size(); }
  double& transition(std::size_t from, std::size_t to) {
    return weights_[transition_offset() + from * labels_.size() + to];
  }
  double transition(std::size_t from, std::size_t to) const {
    return weights_[transition_offset() + from * labels_.size() + to];
  }

  std::optional<std::uint32_t> label_index(const std::string& l) const {
    auto it = label_index_.find(l);
    if (it == label_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Unknown attributes are dropped; unknown gold labels are an error.
  CompiledSentence compile(const AttributedSentence& s, bool with_labels = true) const {
    CompiledSentence c;
    c.tokens.resize(s.size());
    for (std::size_t t = 0; t < s.size(); ++t)
      for (const auto& a : s.tokens[t]) {
        auto it = attr_index_.find(a.name);
        if (it != attr_index_.end()) c.tokens[t].emplace_back(it->second, a.value);
      }
    if (with_labels && !s.labels.empty()) {
      if (s.labels.size() != s.size()) fail_data("label count does not match token count");
      for (const auto& l : s.labels) {
        auto y = label_index(l);
        if (!y) fail_data("label '" + l + "' is not in the model's label set");
        c.labels.push_back(*y);
      }
    }
    return c;
  }

  nlohmann::json feature_config;  // snapshot of the extraction setup
  TrainingConfig training;

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> attributes_;
  std::unordered_map<std::string, std::uint32_t> label_index_;
  std::unordered_map<std::string, std::uint32_t> attr_index_;
  std::vector<double> weights_;
};

namespace detail {

inline double logsumexp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

/// n x Y matrix of per-position label scores.
inline std::vector<double> state_scores(const CrfModel& model, const CompiledSentence& s) {
  const std::size_t Y = model.num_labels();
  std::vector<double> out(s.size() * Y, 0.0);
  for (std::size_t t = 0; t < s.size(); ++t)
    for (const auto& [a, v] : s.tokens[t])
      for (std::size_t y = 0; y < Y; ++y) out[t * Y + y] += model.state(a, y) * v;
  return out;
}

inline std::vector<double> forward(const CrfModel& model, const std::vector<double>& state,
                                   std::size_t n) {
  const std::size_t Y = model.num_labels();
  std::vector<double> alpha(n * Y);
  std::vector<double> tmp(Y);
  for (std::size_t y = 0; y < Y; ++y) alpha[y] = state[y];
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t y = 0; y < Y; ++y) {
      for (std::size_t p = 0; p < Y; ++p) tmp[p] = alpha[(t - 1) * Y + p] + model.transition(p, y);
      alpha[t * Y + y] = logsumexp(tmp.data(), Y) + state[t * Y + y];
    }
  return alpha;
}

inline std::vector<double> backward(const CrfModel& model, const std::vector<double>& state,
                                    std::size_t n) {
  const std::size_t Y = model.num_labels();
  std::vector<double> beta(n * Y, 0.0);
  std::vector<double> tmp(Y);
  for (std::size_t t = n - 1; t-- > 0;)
    for (std::size_t y = 0; y < Y; ++y) {
      for (std::size_t q = 0; q < Y; ++q)
        tmp[q] = model.transition(y, q) + state[(t + 1) * Y + q] + beta[(t + 1) * Y + q];
      beta[t * Y + y] = logsumexp(tmp.data(), Y);
    }
  return beta;
}

}  // namespace detail

/// log of the sum over all label sequences of exp(score).
inline double log_partition(const CrfModel& model, const CompiledSentence& s) {
  if (s.size() == 0) return 0.0;
  const auto state = detail::state_scores(model, s);
  const auto alpha = detail::forward(model, state, s.size());
  const std::size_t Y = model.num_labels();
  return detail::logsumexp(alpha.data() + (s.size() - 1) * Y, Y);
}

inline double log_partition(const CrfModel& model, const AttributedSentence& s) {
  return log_partition(model, model.compile(s, false));
}

/// Score of one label sequence, accumulated left to right as
/// ((state_0 + trans_01) + state_1) + ...; Viterbi uses the same order.
inline double sequence_score(const CrfModel& model, const CompiledSentence& s,
                             const std::vector<std::uint32_t>& y) {
  const auto state = detail::state_scores(model, s);
  const std::size_t Y = model.num_labels();
  double score = state[y[0]];
  for (std::size_t t = 1; t < s.size(); ++t)
    score = score + model.transition(y[t - 1], y[t]) + state[t * Y + y[t]];
  return score;
}

struct ViterbiResult {
  std::vector<std::uint32_t> path;
  double score = 0.0;
};

/// Best label sequence; ties prefer the lower label index.
inline ViterbiResult viterbi_decode(const CrfModel& model, const CompiledSentence& s) {
  ViterbiResult r;
  const std::size_t n = s.size(), Y = model.num_labels();
  if (n == 0) return r;
  const auto state = detail::state_scores(model, s);
  std::vector<double> delta(n * Y);
  std::vector<std::uint32_t> back(n * Y, 0);
  for (std::size_t y = 0; y < Y; ++y) delta[y] = state[y];
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t y = 0; y < Y; ++y) {
      double best = -std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t p = 0; p < Y; ++p) {
        const double v = delta[(t - 1) * Y + p] + model.transition(p, y);
        if (v > best) {
          best = v;
          arg = static_cast<std::uint32_t>(p);
        }
      }
      delta[t * Y + y] = best + state[t * Y + y];
      back[t * Y + y] = arg;
    }
  std::uint32_t last = 0;
  for (std::size_t y = 1; y < Y; ++y)
    if (delta[(n - 1) * Y + y] > delta[(n - 1) * Y + last]) last = static_cast<std::uint32_t>(y);
  r.score = delta[(n - 1) * Y + last];
  r.path.resize(n);
  r.path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) r.path[t - 1] = back[t * Y + r.path[t]];
  return r;
}

inline std::vector<std::string> viterbi(const CrfModel& model, const AttributedSentence& s) {
  const auto r = viterbi_decode(model, model.compile(s, false));
  std::vector<std::string> out;
  out.reserve(r.path.size());
  for (auto y : r.path) out.push_back(model.labels()[y]);
  return out;
}

namespace detail {

/// Adds this sentence's log p(y|x) gradient into grad; returns log p(y|x).
inline double sentence_loglik(const CrfModel& model, const CompiledSentence& s,
                              std::vector<double>& grad) {
  const std::size_t n = s.size(), Y = model.num_labels();
  if (n == 0) return 0.0;
  if (s.labels.size() != n) fail_data("log-likelihood needs gold labels for every token");
  const auto state = state_scores(model, s);
  const auto alpha = forward(model, state, n);
  const auto beta = backward(model, state, n);
  const double logz = logsumexp(alpha.data() + (n - 1) * Y, Y);

  double gold = state[s.labels[0]];
  for (std::size_t t = 1; t < n; ++t)
    gold = gold + model.transition(s.labels[t - 1], s.labels[t]) + state[t * Y + s.labels[t]];

  const std::size_t toff = model.transition_offset();
  std::vector<double> marg(Y);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t y = 0; y < Y; ++y)
      marg[y] = std::exp(alpha[t * Y + y] + beta[t * Y + y] - logz);
    for (const auto& [a, v] : s.tokens[t]) {
      double* g = grad.data() + static_cast<std::size_t>(a) * Y;
      g[s.labels[t]] += v;
      for (std::size_t y = 0; y < Y; ++y) g[y] -= marg[y] * v;
    }
    if (t > 0) {
      grad[toff + s.labels[t - 1] * Y + s.labels[t]] += 1.0;
      for (std::size_t p = 0; p < Y; ++p)
        for (std::size_t y = 0; y < Y; ++y)
          grad[toff + p * Y + y] -= std::exp(alpha[(t - 1) * Y + p] + model.transition(p, y) +
                                             state[t * Y + y] + beta[t * Y + y] - logz);
    }
  }
  return gold - logz;
}

}  // namespace detail

struct LikelihoodResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/// L(w) = sum_s log p(y_s | x_s) - ||w||^2 / (2 sigma^2) and its gradient.
/// Sentences are split into contiguous blocks, one per thread, and the block
/// sums are added in block order.
inline LikelihoodResult log_likelihood_and_gradient(const CrfModel& model,
                                                    const std::vector<CompiledSentence>& data,
                                                    const TrainingConfig& config) {
  const std::size_t P = model.num_weights();
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, data.size()));
  std::vector<std::vector<double>> grads(threads, std::vector<double>(P, 0.0));
  std::vector<double> values(threads, 0.0);
  std::vector<std::string> errors(threads);
  auto work = [&](std::size_t w, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double ll = detail::sentence_loglik(model, data[i], grads[w]);
      if (!std::isfinite(ll)) {
        errors[w] = "non-finite log-likelihood in sentence " + std::to_string(i);
        return;
      }
      values[w] += ll;
    }
  };
  const std::size_t chunk = threads ? (data.size() + threads - 1) / threads : 0;
  if (threads == 1) {
    work(0, 0, data.size());
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back(work, w, std::min(data.size(), w * chunk),
                        std::min(data.size(), (w + 1) * chunk));
  }
  for (const auto& e : errors)
    if (!e.empty()) fail_numerical(e);

  LikelihoodResult r;
  r.gradient = std::move(grads[0]);
  r.value = values[0];
  for (std::size_t w = 1; w < threads; ++w) {
    r.value += values[w];
    for (std::size_t k = 0; k < P; ++k) r.gradient[k] += grads[w][k];
  }
  const auto& wts = model.weights();
  double norm = 0.0;
  for (std::size_t k = 0; k < P; ++k) {
    norm += wts[k] * wts[k];
    r.gradient[k] -= wts[k] / config.l2_sigma2;
  }
  r.value -= norm / (2.0 * config.l2_sigma2);
  if (!std::isfinite(r.value)) fail_numerical("non-finite objective");
  return r;
}

inline LikelihoodResult log_likelihood_and_gradient(const CrfModel& model,
                                                    const std::vector<AttributedSentence>& data,
                                                    const TrainingConfig& config) {
  std::vector<CompiledSentence> compiled;
  compiled.reserve(data.size());
  for (const auto& s : data) compiled.push_back(model.compile(s));
  return log_likelihood_and_gradient(model, compiled, config);
}

struct TrainResult {
  CrfModel model;
  /// L(w) at the start and after every accepted step.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
};

/// Label set in first-seen order when labels is empty.
inline CrfModel make_model(const std::vector<AttributedSentence>& data,
                           std::vector<std::string> labels) {
  if (labels.empty()) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& s : data)
      for (const auto& l : s.labels)
        if (seen.emplace(l, true).second) labels.push_back(l);
  }
  std::vector<std::string> attrs;
  std::unordered_map<std::string, bool> seen;
  for (const auto& s : data)
    for (const auto& tok : s.tokens)
      for (const auto& a : tok)
        if (seen.emplace(a.name, true).second) attrs.push_back(a.name);
  return CrfModel(std::move(labels), std::move(attrs));
}

/// L-BFGS ascent on L(w) from w = 0 with a backtracking (Armijo) line search.
/// Stops after max_iterations or once |dL| / |L| < convergence_tol.
inline TrainResult train(const std::vector<AttributedSentence>& data,
                         const std::vector<std::string>& labels, const TrainingConfig& config) {
  config.validate();
  if (data.empty()) fail_data("train: no training sentences");
  TrainResult res;
  res.model = make_model(data, labels);
  res.model.training = config;
  CrfModel& model = res.model;
  std::vector<CompiledSentence> compiled;
  compiled.reserve(data.size());
  for (const auto& s : data) compiled.push_back(model.compile(s));

  const std::size_t P = model.num_weights();
  auto eval = [&] { return log_likelihood_and_gradient(model, compiled, config); };
  // Minimize f = -L.
  auto cur = eval();
  double f = -cur.value;
  std::vector<double> g(P);
  for (std::size_t k = 0; k < P; ++k) g[k] = -cur.gradient[k];
  res.objective_trace.push_back(cur.value);

  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };

  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;
  std::vector<double> d(P), w0(P), alpha_buf;

  for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
    const double gnorm = std::sqrt(dot(g, g));
    if (gnorm == 0.0) break;

    // Two-loop recursion.
    d = g;
    const std::size_t m = s_hist.size();
    alpha_buf.assign(m, 0.0);
    for (std::size_t i = m; i-- > 0;) {
      alpha_buf[i] = rho_hist[i] * dot(s_hist[i], d);
      for (std::size_t k = 0; k < P; ++k) d[k] -= alpha_buf[i] * y_hist[i][k];
    }
    if (m > 0) {
      const double gamma = dot(s_hist[m - 1], y_hist[m - 1]) / dot(y_hist[m - 1], y_hist[m - 1]);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], d);
      for (std::size_t k = 0; k < P; ++k) d[k] += (alpha_buf[i] - beta) * s_hist[i][k];
    }
    for (double& v : d) v = -v;
    double slope = dot(g, d);
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t k = 0; k < P; ++k) d[k] = -g[k];
      slope = -gnorm * gnorm;
    }

    double step = m == 0 ? 1.0 / gnorm : 1.0;
    w0 = model.weights();
    bool accepted = false;
    LikelihoodResult next;
    for (int trial = 0; trial < 50; ++trial) {
      for (std::size_t k = 0; k < P; ++k) model.weights()[k] = w0[k] + step * d[k];
      next = eval();
      if (-next.value <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      model.weights() = w0;
      // At the optimum to machine precision the line search cannot progress.
      if (gnorm <= 1e-6 * std::max(1.0, std::abs(f))) break;
      fail_numerical("train: line search failed at iteration " + std::to_string(iter));
    }

    std::vector<double> s(P), y(P);
    for (std::size_t k = 0; k < P; ++k) {
      s[k] = model.weights()[k] - w0[k];
      y[k] = -next.gradient[k] - g[k];
    }
    const double sy = dot(s, y);
    if (sy > 1e-10) {
      if (s_hist.size() == config.lbfgs_memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    const double f_prev = f;
    f = -next.value;
    for (std::size_t k = 0; k < P; ++k) g[k] = -next.gradient[k];
    res.objective_trace.push_back(next.value);
    res.iterations = iter;
    if (std::abs(f_prev - f) / std::max(std::abs(f), 1e-300) < config.convergence_tol) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Model files: JSON with a format version, labels, non-zero state weights per
// attribute, the transition matrix and the configuration snapshot.

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const CrfModel& model) {
  nlohmann::json j;
  j["format"] = "reprner-crf";
  j["format_version"] = kModelFormatVersion;
  j["labels"] = model.labels();
  nlohmann::json state = nlohmann::json::object();
  const std::size_t Y = model.num_labels();
  for (std::size_t a = 0; a < model.num_attributes(); ++a) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t y = 0; y < Y; ++y)
      if (model.state(a, y) != 0.0) row[model.labels()[y]] = model.state(a, y);
    if (!row.empty()) state[model.attributes()[a]] = std::move(row);
  }
  j["state_weights"] = std::move(state);
  nlohmann::json trans = nlohmann::json::array();
  for (std::size_t p = 0; p < Y; ++p) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t y = 0; y < Y; ++y) row.push_back(model.transition(p, y));
    trans.push_back(std::move(row));
  }
  j["transition_weights"] = std::move(trans);
  j["training"] = to_json(model.training);
  j["feature_config"] = model.feature_config;
  return j;
}

inline CrfModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "reprner-crf") fail_data("not a reprner CRF model file");
  if (j.value("format_version", 0) != kModelFormatVersion)
    fail_data("unsupported model format version " + std::to_string(j.value("format_version", 0)));
  auto labels = j.at("labels").get<std::vector<std::string>>();
  std::vector<std::string> attrs;
  for (const auto& [name, _] : j.at("state_weights").items()) attrs.push_back(name);
  CrfModel model(labels, attrs);
  std::size_t a = 0;
  for (const auto& [name, row] : j.at("state_weights").items()) {
    for (const auto& [label, w] : row.items()) {
      auto y = model.label_index(label);
      if (!y) fail_data("model file: unknown label '" + label + "'");
      model.state(a, *y) = w.get<double>();
    }
    ++a;
  }
  const auto& trans = j.at("transition_weights");
  if (trans.size() != labels.size()) fail_data("model file: transition matrix has wrong shape");
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (trans[p].size() != labels.size()) fail_data("model file: transition matrix has wrong shape");
    for (std::size_t y = 0; y < labels.size(); ++y) model.transition(p, y) = trans[p][y].get<double>();
  }
  for (double w : model.weights())
    if (!std::isfinite(w)) fail_data("model file: non-finite weight");
  if (j.contains("training")) model.training = training_config_from_json(j["training"]);
  if (j.contains("feature_config")) model.feature_config = j["feature_config"];
  return model;
}

}  // namespace reprner

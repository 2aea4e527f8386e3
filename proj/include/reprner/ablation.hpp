#pragma once

// The feature-ablation matrix: fourteen feature configurations, each trained
// on the training corpus and scored on the test corpus, once per embedding
// source.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "crf.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "random.hpp"

namespace reprner {

struct AblationRow {
  std::string name;
  std::set<Family> families;  // in addition to the baseline

  bool uses_embeddings() const {
    for (Family f : families)
      if (f != Family::baseline && f != Family::BC) return true;
    return false;
  }
};

inline const std::vector<AblationRow>& ablation_rows() {
  using F = Family;
  static const std::vector<AblationRow> rows = {
      {"Baseline", {}},
      {"+ DE", {F::DE}},
      {"+ SE", {F::SE}},
      {"+ NNSE", {F::NNSE}},
      {"+ BI (method A)", {F::BI_A}},
      {"+ BI (method B)", {F::BI_B}},
      {"+ BI (method C)", {F::BI_C}},
      {"+ CE", {F::CE}},
      {"+ Proto", {F::Proto}},
      {"+ CE + Proto", {F::CE, F::Proto}},
      {"+ BC", {F::BC}},
      {"+ BC + Proto", {F::BC, F::Proto}},
      {"+ BC + CE", {F::BC, F::CE}},
      {"+ BC + CE + Proto", {F::BC, F::CE, F::Proto}},
  };
  return rows;
}

struct EmbeddingSource {
  std::string name;
  const EmbeddingTable* table = nullptr;
};

struct AblationSettings {
  std::uint64_t seed = 0;
  FeatureTemplateSet templates;  // `enabled` is overwritten per row
  SparseCodingConfig sparse;     // seed and nonneg are set per resource
  std::vector<std::size_t> ks = {100, 200, 300, 400, 500, 1000};
  std::size_t kmeans_max_iters = 100;
  std::size_t proto_m = 60;
  double proto_threshold = 0.5;
  TrainingConfig training;
};

struct AblationResult {
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::string> rows;                // completed rows, in order
  std::vector<std::vector<double>> f1;          // rows x columns
  bool partial = false;
  std::string error;
};

/// Seeds for the randomized resource builders, derived from the run seed and
/// the builder's parameters.
inline std::uint64_t sparse_seed(std::uint64_t seed, const SparseCodingConfig& cfg) {
  char params[160];
  std::snprintf(params, sizeof params, "delta=%.17g,tau=%.17g,K=%zu,nonneg=%d", cfg.delta,
                cfg.tau, cfg.K, cfg.nonneg ? 1 : 0);
  return derive_seed(seed, "sparse", params);
}

inline std::uint64_t kmeans_seed(std::uint64_t seed, const std::vector<std::size_t>& ks) {
  std::string params = "ks=";
  for (auto k : ks) params += std::to_string(k) + ",";
  return derive_seed(seed, "kmeans", params);
}

namespace detail {

/// Representation resources derived from one embedding source, built on first use.
class SourceResources {
 public:
  SourceResources(const EmbeddingTable& table, const NpmiTable& npmi, const AblationSettings& s,
                  std::ostream* log, const std::string& name)
      : table_(table), npmi_(npmi), s_(s), log_(log), name_(name) {}

  FeatureResources get(const std::set<Family>& fams, const BrownModel* brown) {
    FeatureResources r;
    r.embeddings = &table_;
    r.brown = brown;
    if (fams.count(Family::SE)) r.sparse = &sparse(false);
    if (fams.count(Family::NNSE)) r.nnse = &sparse(true);
    if (fams.count(Family::CE)) r.kmeans = &kmeans();
    if (fams.count(Family::Proto)) r.prototypes = &prototypes();
    return r;
  }

 private:
  const SparseVectors& sparse(bool nonneg) {
    auto& slot = nonneg ? nnse_ : se_;
    if (!slot) {
      SparseCodingConfig cfg = s_.sparse;
      cfg.nonneg = nonneg;
      cfg.seed = sparse_seed(s_.seed, cfg);
      if (log_) *log_ << "[" << name_ << "] sparse coding" << (nonneg ? " (nonneg)" : "") << "\n";
      slot = std::make_unique<SparseVectors>(to_sparse_vectors(sparse_code(table_, cfg)));
    }
    return *slot;
  }

  const KMeansModel& kmeans() {
    if (!kmeans_) {
      if (log_) *log_ << "[" << name_ << "] k-means over " << s_.ks.size() << " values of k\n";
      kmeans_ = std::make_unique<KMeansModel>(
          kmeans_multi(table_, s_.ks, kmeans_seed(s_.seed, s_.ks), s_.kmeans_max_iters));
    }
    return *kmeans_;
  }

  const PrototypeTable& prototypes() {
    if (!proto_)
      proto_ = std::make_unique<PrototypeTable>(
          select_prototypes(npmi_, s_.proto_m, s_.proto_threshold));
    return *proto_;
  }

  const EmbeddingTable& table_;
  const NpmiTable& npmi_;
  const AblationSettings& s_;
  std::ostream* log_;
  std::string name_;
  std::unique_ptr<SparseVectors> se_, nnse_;
  std::unique_ptr<KMeansModel> kmeans_;
  std::unique_ptr<PrototypeTable> proto_;
};

}  // namespace detail

/// Trains and scores one feature configuration; returns the overall F1.
inline double train_and_score(const Corpus& train_corpus, const Corpus& test_corpus,
                              const FeatureTemplateSet& templates, const FeatureResources& res,
                              const TrainingConfig& training) {
  const auto train_data = extract_corpus(train_corpus, templates, res);
  std::vector<std::string> labels(train_corpus.tagset().begin(), train_corpus.tagset().end());
  const auto trained = train(train_data, labels, training);
  std::vector<std::vector<std::string>> pred;
  pred.reserve(test_corpus.size());
  for (const auto& s : test_corpus.sentences())
    pred.push_back(viterbi(trained.model, extract_features(s, templates, res)));
  return score(test_corpus, pred).overall.f1;
}

/// Runs the rows in order. Rows that use no embedding-derived family are
/// trained once and shared by every column. A failing row stops the run; the
/// completed prefix is returned with `partial` set.
inline AblationResult run_ablation(const Corpus& train_corpus, const Corpus& test_corpus,
                                   const std::vector<EmbeddingSource>& sources,
                                   const BrownModel* brown, const AblationSettings& settings,
                                   std::ostream* log = nullptr) {
  if (sources.empty()) fail_usage("ablation: at least one embedding source is required");
  if (!brown) fail_usage("ablation: a Brown cluster model is required");
  settings.templates.validate();
  AblationResult out;
  out.seed = settings.seed;
  for (const auto& s : sources) out.columns.push_back(s.name);
  const NpmiTable npmi = compute_npmi(train_corpus);
  std::vector<std::unique_ptr<detail::SourceResources>> per_source;
  for (const auto& s : sources)
    per_source.push_back(std::make_unique<detail::SourceResources>(*s.table, npmi, settings, log, s.name));

  for (const auto& row : ablation_rows()) {
    std::vector<double> scores;
    try {
      FeatureTemplateSet t = settings.templates;
      t.enabled = row.families;
      t.enabled.insert(Family::baseline);
      std::optional<double> shared;
      for (std::size_t c = 0; c < sources.size(); ++c) {
        if (!row.uses_embeddings() && shared) {
          scores.push_back(*shared);
          continue;
        }
        const auto res = per_source[c]->get(row.families, brown);
        const double f1 = train_and_score(train_corpus, test_corpus, t, res, settings.training);
        if (!std::isfinite(f1)) fail_numerical("non-finite F1");
        if (!row.uses_embeddings()) shared = f1;
        scores.push_back(f1);
        if (log) *log << row.name << " [" << sources[c].name << "] F1 " << format_percent(f1) << "\n";
      }
    } catch (const std::exception& e) {
      out.partial = true;
      out.error = "row '" + row.name + "': " + e.what();
      return out;
    }
    out.rows.push_back(row.name);
    out.f1.push_back(std::move(scores));
  }
  return out;
}

inline std::string ablation_tsv(const AblationResult& r) {
  std::string out = "# seed\t" + std::to_string(r.seed) + "\n";
  out += "features";
  for (const auto& c : r.columns) out += "\t" + c + " F1";
  out += "\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out += r.rows[i];
    for (double v : r.f1[i]) out += "\t" + format_percent(v);
    out += "\n";
  }
  if (r.partial) out += "# partial\t" + r.error + "\n";
  return out;
}

inline nlohmann::json ablation_json(const AblationResult& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["columns"] = r.columns;
  j["rows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    nlohmann::json row;
    row["name"] = r.rows[i];
    row["f1"] = nlohmann::json::object();
    for (std::size_t c = 0; c < r.columns.size(); ++c) row["f1"][r.columns[c]] = r.f1[i][c];
    j["rows"].push_back(std::move(row));
  }
  j["partial"] = r.partial;
  if (r.partial) j["error"] = r.error;
  return j;
}

}  // namespace reprner

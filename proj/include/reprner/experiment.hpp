#pragma once

// Experiment configuration files (JSON with a `profile` field) and the
// ablation run they describe.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ablation.hpp"
#include "brown.hpp"
#include "corpus.hpp"
#include "embeddings.hpp"

namespace reprner {

struct EmbeddingSpec {
  std::string name;
  std::string path;
  EmbeddingFormat format = EmbeddingFormat::word2vec_text;
};

struct ExperimentConfig {
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;

  std::string train_path, test_path;
  /// With split_dev, the dev file is halved: first half dev, second half test.
  std::string dev_path;
  bool split_dev = false;
  ColumnSpec columns;

  std::vector<EmbeddingSpec> embeddings;

  /// Either a prepared Brown file or raw text to induce clusters from.
  std::string brown_path, brown_text_path;
  std::size_t brown_clusters = 500;
  std::size_t brown_min_count = 1;

  AblationSettings settings;
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Relative paths are resolved against base_dir (normally the config file's directory).
inline ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    c.profile = j.at("profile").get<std::string>();
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    c.threads = j.value("threads", c.threads);

    const auto& corpus = j.at("corpus");
    c.train_path = detail::resolve(base_dir, corpus.at("train").get<std::string>());
    c.dev_path = detail::resolve(base_dir, corpus.value("dev", ""));
    c.test_path = detail::resolve(base_dir, corpus.value("test", ""));
    c.split_dev = corpus.value("split_dev", false);
    c.columns.token_col = corpus.value("token_col", c.columns.token_col);
    c.columns.label_col = corpus.value("label_col", *c.columns.label_col);
    if (corpus.contains("pos_col") && !corpus["pos_col"].is_null())
      c.columns.pos_col = corpus["pos_col"].get<std::size_t>();

    for (const auto& e : j.at("embeddings")) {
      EmbeddingSpec s;
      s.name = e.at("name").get<std::string>();
      s.path = detail::resolve(base_dir, e.at("path").get<std::string>());
      s.format = parse_embedding_format(e.value("format", "word2vec_text"));
      c.embeddings.push_back(std::move(s));
    }

    const auto& brown = j.at("brown");
    c.brown_path = detail::resolve(base_dir, brown.value("file", ""));
    c.brown_text_path = detail::resolve(base_dir, brown.value("text", ""));
    c.brown_clusters = brown.value("clusters", c.brown_clusters);
    c.brown_min_count = brown.value("min_count", c.brown_min_count);

    auto& s = c.settings;
    if (j.contains("features")) {
      const auto& f = j["features"];
      s.templates.window = f.value("window", s.templates.window);
      s.templates.de_scale = f.value("de_scale", s.templates.de_scale);
      s.templates.ce_compound = f.value("ce_compound", s.templates.ce_compound);
      s.templates.brown_prefix_lengths =
          f.value("brown_prefix_lengths", s.templates.brown_prefix_lengths);
    }
    if (j.contains("sparse")) {
      const auto& sp = j["sparse"];
      s.sparse.delta = sp.value("delta", s.sparse.delta);
      s.sparse.tau = sp.value("tau", s.sparse.tau);
      s.sparse.K = sp.value("K", s.sparse.K);
      s.sparse.eta = sp.value("eta", s.sparse.eta);
      s.sparse.epochs = sp.value("epochs", s.sparse.epochs);
    }
    if (j.contains("kmeans")) {
      s.ks = j["kmeans"].value("ks", s.ks);
      s.kmeans_max_iters = j["kmeans"].value("max_iters", s.kmeans_max_iters);
    }
    if (j.contains("prototypes")) {
      s.proto_m = j["prototypes"].value("m", s.proto_m);
      s.proto_threshold = j["prototypes"].value("threshold", s.proto_threshold);
    }
    if (j.contains("training")) s.training = training_config_from_json(j["training"]);
  } catch (const nlohmann::json::exception& e) {
    fail_usage(std::string("experiment config: ") + e.what());
  }
  if (c.embeddings.empty()) fail_usage("experiment config: no embedding sources");
  if (c.brown_path.empty() && c.brown_text_path.empty())
    fail_usage("experiment config: brown needs either 'file' or 'text'");
  if (c.test_path.empty() && !c.split_dev)
    fail_usage("experiment config: give corpus.test or set corpus.split_dev");
  c.settings.templates.validate();
  c.settings.sparse.validate();
  validate_ks(c.settings.ks);
  if (c.settings.proto_m < 1) fail_usage("experiment config: prototypes.m must be >= 1");
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail_usage("cannot parse " + path + ": " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path());
}

struct ExperimentData {
  Corpus train, test;
  std::vector<EmbeddingTable> tables;
  BrownModel brown;
};

inline ExperimentData load_experiment_data(const ExperimentConfig& c, std::ostream* log = nullptr) {
  ExperimentData d;
  d.train = parse_conll(read_file(c.train_path), c.columns, c.train_path);
  if (c.split_dev) {
    if (c.dev_path.empty()) fail_usage("experiment config: split_dev needs corpus.dev");
    d.test = split_dev_half(parse_conll(read_file(c.dev_path), c.columns, c.dev_path)).second;
  } else {
    d.test = parse_conll(read_file(c.test_path), c.columns, c.test_path);
  }
  for (const auto& e : c.embeddings) d.tables.push_back(load_embeddings(e.path, e.format, log));
  if (!c.brown_path.empty()) {
    d.brown = parse_brown(read_file(c.brown_path));
  } else {
    if (log) *log << "inducing " << c.brown_clusters << " Brown clusters\n";
    d.brown = brown_induce(std::string_view(read_file(c.brown_text_path)), c.brown_clusters,
                           c.brown_min_count);
  }
  return d;
}

inline AblationResult run_experiment(const ExperimentConfig& c, const ExperimentData& d,
                                     std::ostream* log = nullptr) {
  if (!c.seed) fail_usage("a seed is required");
  AblationSettings s = c.settings;
  s.seed = *c.seed;
  s.sparse.threads = c.threads;
  s.training.threads = c.threads;
  std::vector<EmbeddingSource> sources;
  for (std::size_t i = 0; i < c.embeddings.size(); ++i)
    sources.push_back({c.embeddings[i].name, &d.tables[i]});
  return run_ablation(d.train, d.test, sources, &d.brown, s, log);
}

}  // namespace reprner

// reprner: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reprner/ablation.hpp"
#include "reprner/brown.hpp"
#include "reprner/corpus.hpp"
#include "reprner/crf.hpp"
#include "reprner/embeddings.hpp"
#include "reprner/eval.hpp"
#include "reprner/experiment.hpp"
#include "reprner/features.hpp"
#include "reprner/kmeans.hpp"
#include "reprner/prototypes.hpp"
#include "reprner/synthetic.hpp"
#include "reprner/transforms.hpp"

namespace fs = std::filesystem;
using namespace reprner;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- resources

struct ResourcePaths {
  std::string embeddings, embedding_format = "word2vec_text", brown, kmeans, sparse, nnse,
                          prototypes;
};

struct FeatureOptions {
  std::vector<std::string> families = {"baseline"};
  int window = 1;
  double de_scale = 1.0;
  std::vector<std::size_t> brown_prefix_lengths;
  bool no_ce_compound = false;
  double proto_threshold = 0.5;
  std::optional<std::size_t> pos_col;
  ResourcePaths paths;
};

void add_feature_options(CLI::App* cmd, FeatureOptions& o) {
  cmd->add_option("--features", o.families, "feature families (baseline, DE, BI_A, BI_B, BI_C, "
                                            "SE, NNSE, CE, Proto, BC)")
      ->delimiter(',');
  cmd->add_option("--window", o.window, "context half-width");
  cmd->add_option("--de-scale", o.de_scale, "multiplier for dense embedding values");
  cmd->add_option("--brown-prefix", o.brown_prefix_lengths, "Brown path prefix lengths")
      ->delimiter(',');
  cmd->add_flag("--no-ce-compound", o.no_ce_compound, "disable compound cluster features");
  cmd->add_option("--proto-threshold", o.proto_threshold, "cosine threshold for prototypes");
  cmd->add_option("--pos-col", o.pos_col, "column holding POS tags");
  cmd->add_option("--embeddings", o.paths.embeddings, "embedding file (DE, BI_*, Proto)");
  cmd->add_option("--format", o.paths.embedding_format, "word2vec_text or glove_text");
  cmd->add_option("--brown", o.paths.brown, "Brown cluster file (BC)");
  cmd->add_option("--kmeans", o.paths.kmeans, "k-means assignment file (CE)");
  cmd->add_option("--sparse", o.paths.sparse, "sparse code file (SE)");
  cmd->add_option("--nnse", o.paths.nnse, "non-negative sparse code file (NNSE)");
  cmd->add_option("--prototypes", o.paths.prototypes, "prototype file (Proto)");
}

FeatureTemplateSet templates_of(const FeatureOptions& o) {
  FeatureTemplateSet t;
  t.window = o.window;
  t.de_scale = o.de_scale;
  t.brown_prefix_lengths = o.brown_prefix_lengths;
  t.ce_compound = !o.no_ce_compound;
  t.enabled.clear();
  for (const auto& f : o.families) t.enabled.insert(parse_family(f));
  t.validate();
  return t;
}

json feature_config_json(const FeatureOptions& o) {
  auto abs = [](const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); };
  json j;
  j["families"] = o.families;
  j["window"] = o.window;
  j["de_scale"] = o.de_scale;
  j["brown_prefix_lengths"] = o.brown_prefix_lengths;
  j["ce_compound"] = !o.no_ce_compound;
  j["proto_threshold"] = o.proto_threshold;
  j["pos_col"] = o.pos_col ? json(*o.pos_col) : json(nullptr);
  j["resources"] = {{"embeddings", abs(o.paths.embeddings)},
                    {"embedding_format", o.paths.embedding_format},
                    {"brown", abs(o.paths.brown)},
                    {"kmeans", abs(o.paths.kmeans)},
                    {"sparse", abs(o.paths.sparse)},
                    {"nnse", abs(o.paths.nnse)},
                    {"prototypes", abs(o.paths.prototypes)}};
  return j;
}

FeatureOptions feature_options_from_json(const json& j) {
  FeatureOptions o;
  o.families = j.at("families").get<std::vector<std::string>>();
  o.window = j.at("window").get<int>();
  o.de_scale = j.at("de_scale").get<double>();
  o.brown_prefix_lengths = j.at("brown_prefix_lengths").get<std::vector<std::size_t>>();
  o.no_ce_compound = !j.at("ce_compound").get<bool>();
  o.proto_threshold = j.at("proto_threshold").get<double>();
  if (!j.at("pos_col").is_null()) o.pos_col = j["pos_col"].get<std::size_t>();
  const auto& r = j.at("resources");
  o.paths = {r.at("embeddings"), r.at("embedding_format"), r.at("brown"), r.at("kmeans"),
             r.at("sparse"),     r.at("nnse"),             r.at("prototypes")};
  return o;
}

/// Owns the resources for the enabled families.
struct LoadedResources {
  std::unique_ptr<EmbeddingTable> embeddings;
  std::unique_ptr<SparseVectors> sparse, nnse;
  std::unique_ptr<KMeansModel> kmeans;
  std::unique_ptr<PrototypeTable> prototypes;
  std::unique_ptr<BrownModel> brown;

  FeatureResources view() const {
    return {embeddings.get(), sparse.get(), nnse.get(), kmeans.get(), prototypes.get(), brown.get()};
  }
};

std::string require_file(Family f, const std::string& path) {
  const std::string name(family_name(f));
  if (path.empty())
    fail_data("feature family " + name + " is enabled but its resource is missing");
  if (!fs::exists(path))
    fail_data("feature family " + name + " is enabled but its resource file '" + path +
              "' does not exist");
  return read_file(path);
}

LoadedResources load_resources(const FeatureTemplateSet& t, const FeatureOptions& o) {
  LoadedResources r;
  const auto& p = o.paths;
  const Family emb_users[] = {Family::DE, Family::BI_A, Family::BI_B, Family::BI_C, Family::Proto};
  for (Family f : emb_users)
    if (t.has(f) && !r.embeddings)
      r.embeddings = std::make_unique<EmbeddingTable>(
          parse_embeddings(require_file(f, p.embeddings), parse_embedding_format(p.embedding_format)));
  if (t.has(Family::SE))
    r.sparse = std::make_unique<SparseVectors>(parse_sparse_vectors(require_file(Family::SE, p.sparse)));
  if (t.has(Family::NNSE))
    r.nnse = std::make_unique<SparseVectors>(parse_sparse_vectors(require_file(Family::NNSE, p.nnse)));
  if (t.has(Family::CE))
    r.kmeans = std::make_unique<KMeansModel>(parse_kmeans(require_file(Family::CE, p.kmeans)));
  if (t.has(Family::Proto)) {
    r.prototypes = std::make_unique<PrototypeTable>(
        parse_prototypes(require_file(Family::Proto, p.prototypes), o.proto_threshold));
  }
  if (t.has(Family::BC))
    r.brown = std::make_unique<BrownModel>(parse_brown(require_file(Family::BC, p.brown)));
  check_resources(t, r.view());
  return r;
}

Corpus read_corpus(const std::string& path, std::optional<std::size_t> pos_col, bool labelled) {
  ColumnSpec cols;
  cols.pos_col = pos_col;
  if (labelled) {
    // The label is the last column; find it from the first token line.
    const auto text = read_file(path);
    std::size_t ncols = 0;
    std::size_t start = 0;
    while (start < text.size() && ncols == 0) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      ncols = split_whitespace(std::string_view(text).substr(start, end - start)).size();
      start = end + 1;
    }
    if (ncols < 2) fail_data(path + ": expected at least two columns (token and label)");
    cols.label_col = ncols - 1;
    return parse_conll(text, cols, path);
  }
  cols.label_col.reset();
  return parse_conll(read_file(path), cols, path);
}

EmbeddingTable read_embeddings(const std::string& path, const std::string& format) {
  return load_embeddings(path, parse_embedding_format(format));
}

// ---------------------------------------------------------------- commands

struct SynthOptions {
  std::uint64_t seed = 1;
  std::string out_dir;
  std::size_t toy_sentences = 30;
};

int cmd_synth(const SynthOptions& o) {
  SyntheticConfig cfg;
  cfg.seed = o.seed;
  const auto d = make_synthetic(cfg);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_file((dir / "train.conll").string(), serialize_conll(d.train));
  write_file((dir / "dev.conll").string(), serialize_conll(d.dev));
  write_file((dir / "test.conll").string(), serialize_conll(d.test));
  write_file((dir / "raw.txt").string(), d.raw_text);
  const char* names[] = {"emb_a.txt", "emb_b.txt"};
  for (std::size_t i = 0; i < d.embeddings.size() && i < 2; ++i)
    write_file((dir / names[i]).string(), serialize_word2vec(d.embeddings[i]));
  const auto& s = d.train.sentences();
  std::vector<Sentence> toy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(o.toy_sentences, s.size())));
  write_file((dir / "toy30.conll").string(), serialize_conll(Corpus(toy)));
  std::cout << "seed " << o.seed << ": train " << d.train.size() << " sentences, dev "
            << d.dev.size() << ", test " << d.test.size() << ", raw " << cfg.raw_sentences
            << " lines, " << d.embeddings.size() << " embedding tables of "
            << d.embeddings[0].size() << " words\n";
  return 0;
}

struct BrownOptions {
  std::string input, output;
  std::size_t clusters = 500, min_count = 1;
};

int cmd_brown(const BrownOptions& o) {
  const auto m = brown_induce(std::string_view(read_file(o.input)), o.clusters, o.min_count);
  write_file(o.output, serialize_brown(m));
  std::map<std::string, std::size_t> sizes;
  for (const auto& [w, p] : m.paths) ++sizes[p];
  std::size_t largest = 0;
  for (const auto& [p, n] : sizes) largest = std::max(largest, n);
  std::cout << "words " << m.paths.size() << ", clusters " << sizes.size()
            << ", largest cluster " << largest << "\n";
  return 0;
}

struct KMeansOptions {
  std::string embeddings, format = "word2vec_text", output;
  std::vector<std::size_t> ks;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
};

int cmd_kmeans(const KMeansOptions& o) {
  const auto table = read_embeddings(o.embeddings, o.format);
  const auto m = kmeans_multi(table, o.ks, kmeans_seed(o.seed, o.ks), o.max_iters);
  write_file(o.output, serialize_kmeans(m));
  for (auto k : m.ks) {
    const auto& r = m.per_k.at(k);
    std::vector<std::size_t> size(k, 0);
    for (auto a : r.assignment) ++size[a];
    std::cout << "k=" << k << " sse " << r.sse << " iterations " << r.iterations << " sizes min "
              << *std::min_element(size.begin(), size.end()) << " max "
              << *std::max_element(size.begin(), size.end()) << "\n";
  }
  return 0;
}

struct SparseOptions {
  std::string embeddings, format = "word2vec_text", output;
  SparseCodingConfig cfg;
  std::uint64_t seed = 0;
};

int cmd_sparse(SparseOptions o, std::size_t threads) {
  const auto table = read_embeddings(o.embeddings, o.format);
  o.cfg.seed = sparse_seed(o.seed, o.cfg);
  o.cfg.threads = threads;
  const auto r = sparse_code(table, o.cfg);
  write_file(o.output, serialize_sparse_vectors(to_sparse_vectors(r)));
  std::cout << "words " << r.words.size() << ", K " << r.K << ", zero fraction "
            << r.zero_fraction() << ", objective " << r.objective_trace.front() << " -> "
            << r.objective_trace.back() << "\n";
  return 0;
}

struct BinarizeOptions {
  std::string embeddings, format = "word2vec_text", output, method = "B";
};

int cmd_binarize(const BinarizeOptions& o) {
  const auto table = read_embeddings(o.embeddings, o.format);
  const auto sv = binarize_table(table, parse_binarize_method(o.method));
  write_file(o.output, serialize_sparse_vectors(sv));
  std::size_t pos = 0, neg = 0;
  for (const auto& [w, e] : sv.vectors)
    for (const auto& [j, v] : e) (v > 0 ? pos : neg)++;
  const double cells = static_cast<double>(table.size() * table.dim());
  std::cout << "method " << o.method << ": U " << pos / cells << ", B " << neg / cells
            << ", zero " << 1.0 - (pos + neg) / cells << "\n";
  return 0;
}

struct ProtoOptions {
  std::string train, output;
  std::size_t m = 60;
  std::optional<std::size_t> pos_col;
  bool include_outside = false;
};

int cmd_proto(const ProtoOptions& o) {
  const auto corpus = read_corpus(o.train, o.pos_col, true);
  const auto table = select_prototypes(compute_npmi(corpus), o.m, 0.5, o.include_outside);
  write_file(o.output, serialize_prototypes(table));
  std::size_t rows = 0;
  for (const auto& [cls, words] : table.prototypes) {
    std::cout << cls << " " << words.size() << "\n";
    rows += words.size();
  }
  std::cout << "total " << rows << " prototypes\n";
  return 0;
}

struct FeaturesCmdOptions {
  std::string input, output;
  FeatureOptions features;
};

int cmd_features(const FeaturesCmdOptions& o) {
  const auto t = templates_of(o.features);
  const auto res = load_resources(t, o.features);
  const auto corpus = read_corpus(o.input, o.features.pos_col, true);
  write_file(o.output, serialize_attributes(extract_corpus(corpus, t, res.view())));
  return 0;
}

struct TrainOptions {
  std::string train, model;
  std::optional<std::uint64_t> seed;
  FeatureOptions features;
  TrainingConfig training;
};

int cmd_train(TrainOptions o, std::size_t threads) {
  const auto t = templates_of(o.features);
  const auto res = load_resources(t, o.features);
  const auto corpus = read_corpus(o.train, o.features.pos_col, true);
  o.training.threads = threads;
  const auto data = extract_corpus(corpus, t, res.view());
  std::vector<std::string> labels(corpus.tagset().begin(), corpus.tagset().end());
  auto r = train(data, labels, o.training);
  r.model.feature_config = feature_config_json(o.features);
  r.model.feature_config["seed"] = *o.seed;
  write_file(o.model, model_to_json(r.model).dump(1) + "\n");
  std::cout << "sentences " << corpus.size() << ", attributes " << r.model.num_attributes()
            << ", labels " << r.model.num_labels() << ", iterations " << r.iterations
            << ", objective " << r.objective_trace.back() << "\n";
  return 0;
}

struct TagOptions {
  std::string model, input, output;
  FeatureOptions overrides;
};

int cmd_tag(const TagOptions& o) {
  const auto model = model_from_json(json::parse(read_file(o.model)));
  if (model.feature_config.is_null()) fail_data(o.model + ": model carries no feature config");
  FeatureOptions f = feature_options_from_json(model.feature_config);
  // Explicitly given resource paths replace the recorded ones.
  const auto& ov = o.overrides.paths;
  for (const auto& [given, slot] :
       {std::pair{&ov.embeddings, &f.paths.embeddings}, std::pair{&ov.brown, &f.paths.brown},
        std::pair{&ov.kmeans, &f.paths.kmeans}, std::pair{&ov.sparse, &f.paths.sparse},
        std::pair{&ov.nnse, &f.paths.nnse}, std::pair{&ov.prototypes, &f.paths.prototypes}})
    if (!given->empty()) *slot = *given;
  const auto t = templates_of(f);
  const auto res = load_resources(t, f);
  const auto corpus = read_corpus(o.input, f.pos_col, false);
  std::string out;
  for (const auto& s : corpus.sentences()) {
    const auto labels = viterbi(model, extract_features(s, t, res.view()));
    for (std::size_t i = 0; i < s.size(); ++i) out += s.tokens[i].surface + "\t" + labels[i] + "\n";
    out += "\n";
  }
  if (o.output.empty())
    std::cout << out;
  else
    write_file(o.output, out);
  return 0;
}

struct EvalOptions {
  std::string gold, pred, json_out;
};

int cmd_eval(const EvalOptions& o) {
  const auto gold = read_corpus(o.gold, std::nullopt, true);
  const auto pred = read_corpus(o.pred, std::nullopt, true);
  if (gold.size() != pred.size())
    fail_data("eval: gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
              std::to_string(pred.size()));
  for (std::size_t s = 0; s < gold.size(); ++s)
    for (std::size_t i = 0; i < std::min(gold.sentences()[s].size(), pred.sentences()[s].size()); ++i)
      if (gold.sentences()[s].tokens[i].surface != pred.sentences()[s].tokens[i].surface)
        fail_data("eval: sentence " + std::to_string(s) + " token " + std::to_string(i) +
                  " differs between gold and prediction");
  const auto report = score(gold, corpus_labels(pred));
  std::cout << report_text(report);
  if (!o.json_out.empty()) write_file(o.json_out, to_json(report).dump(1) + "\n");
  return 0;
}

struct AblateOptions {
  std::string config, output;
  std::optional<std::uint64_t> seed;
};

int cmd_ablate(const AblateOptions& o, std::size_t threads) {
  auto cfg = load_experiment(o.config);
  cfg.seed = o.seed;
  cfg.threads = threads;
  const auto data = load_experiment_data(cfg, &std::cerr);
  const auto r = run_experiment(cfg, data, &std::cerr);
  const auto tsv = ablation_tsv(r);
  auto j = ablation_json(r);
  j["profile"] = cfg.profile;
  std::cout << tsv;
  if (!o.output.empty()) {
    write_file(o.output + ".tsv", tsv);
    write_file(o.output + ".json", j.dump(1) + "\n");
  }
  if (r.partial) {
    std::cerr << "error: ablation stopped early: " << r.error << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence labelling with word-representation features"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "write the seeded synthetic corpus and embeddings");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--out-dir", synth.out_dir, "output directory")->required();

  BrownOptions brown;
  auto* c_brown = app.add_subcommand("brown", "induce Brown clusters from raw text");
  c_brown->add_option("--input", brown.input, "raw text, one sentence per line")->required();
  c_brown->add_option("--clusters", brown.clusters, "number of clusters");
  c_brown->add_option("--min-count", brown.min_count, "minimum word frequency");
  c_brown->add_option("--output", brown.output, "cluster file")->required();

  KMeansOptions km;
  auto* c_km = app.add_subcommand("kmeans", "cluster embeddings at several values of k");
  c_km->add_option("--embeddings", km.embeddings)->required();
  c_km->add_option("--format", km.format);
  c_km->add_option("--ks", km.ks, "comma-separated k values")->delimiter(',')->required();
  c_km->add_option("--seed", km.seed);
  c_km->add_option("--max-iters", km.max_iters);
  c_km->add_option("--output", km.output)->required();

  SparseOptions sp;
  auto* c_sp = app.add_subcommand("sparse", "learn sparse overcomplete codes");
  c_sp->add_option("--embeddings", sp.embeddings)->required();
  c_sp->add_option("--format", sp.format);
  c_sp->add_option("--delta", sp.cfg.delta, "l1 weight");
  c_sp->add_option("--tau", sp.cfg.tau, "l2 weight on the dictionary");
  c_sp->add_option("--K", sp.cfg.K, "code length");
  c_sp->add_option("--eta", sp.cfg.eta, "learning rate");
  c_sp->add_option("--epochs", sp.cfg.epochs);
  c_sp->add_flag("--nonneg", sp.cfg.nonneg, "non-negative codes");
  c_sp->add_option("--seed", sp.seed);
  c_sp->add_option("--output", sp.output)->required();

  BinarizeOptions bin;
  auto* c_bin = app.add_subcommand("binarize", "ternary binarization of embeddings");
  c_bin->add_option("--embeddings", bin.embeddings)->required();
  c_bin->add_option("--format", bin.format);
  c_bin->add_option("--method", bin.method, "A, B or C");
  c_bin->add_option("--output", bin.output)->required();

  ProtoOptions proto;
  auto* c_proto = app.add_subcommand("proto", "select NPMI prototypes from labelled data");
  c_proto->add_option("--train", proto.train)->required();
  c_proto->add_option("--m", proto.m, "prototypes per class");
  c_proto->add_option("--pos-col", proto.pos_col);
  c_proto->add_flag("--include-outside", proto.include_outside, "also select prototypes for O");
  c_proto->add_option("--output", proto.output)->required();

  FeaturesCmdOptions feat;
  auto* c_feat = app.add_subcommand("features", "write CRFsuite-style attribute files");
  c_feat->add_option("--input", feat.input)->required();
  c_feat->add_option("--output", feat.output)->required();
  add_feature_options(c_feat, feat.features);

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "train a CRF model");
  c_train->add_option("--train", tr.train, "labelled training corpus")->required();
  c_train->add_option("--model", tr.model, "output model file")->required();
  c_train->add_option("--seed", tr.seed, "run seed (recorded in the model)")->required();
  c_train->add_option("--l2-sigma2", tr.training.l2_sigma2);
  c_train->add_option("--max-iterations", tr.training.max_iterations);
  c_train->add_option("--tol", tr.training.convergence_tol);
  c_train->add_option("--lbfgs-memory", tr.training.lbfgs_memory);
  add_feature_options(c_train, tr.features);

  TagOptions tag;
  auto* c_tag = app.add_subcommand("tag", "label a corpus with a trained model");
  c_tag->add_option("--model", tag.model)->required();
  c_tag->add_option("--input", tag.input, "corpus; the first column is the token")->required();
  c_tag->add_option("--output", tag.output);
  c_tag->add_option("--embeddings", tag.overrides.paths.embeddings);
  c_tag->add_option("--brown", tag.overrides.paths.brown);
  c_tag->add_option("--kmeans", tag.overrides.paths.kmeans);
  c_tag->add_option("--sparse", tag.overrides.paths.sparse);
  c_tag->add_option("--nnse", tag.overrides.paths.nnse);
  c_tag->add_option("--prototypes", tag.overrides.paths.prototypes);

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "score predictions against gold labels");
  c_eval->add_option("--gold", ev.gold)->required();
  c_eval->add_option("--pred", ev.pred)->required();
  c_eval->add_option("--json", ev.json_out, "also write the report as JSON");

  AblateOptions ab;
  auto* c_ab = app.add_subcommand("ablate", "run the feature ablation table");
  c_ab->add_option("--config", ab.config, "experiment profile (JSON)")->required();
  c_ab->add_option("--seed", ab.seed)->required();
  c_ab->add_option("--output", ab.output, "write <output>.tsv and <output>.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_brown) return cmd_brown(brown);
    if (*c_km) return cmd_kmeans(km);
    if (*c_sp) return cmd_sparse(sp, threads);
    if (*c_bin) return cmd_binarize(bin);
    if (*c_proto) return cmd_proto(proto);
    if (*c_feat) return cmd_features(feat);
    if (*c_train) return cmd_train(tr, threads);
    if (*c_tag) return cmd_tag(tag);
    if (*c_eval) return cmd_eval(ev);
    if (*c_ab) return cmd_ablate(ab, threads);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

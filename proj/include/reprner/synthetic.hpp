#pragma once

// Seeded synthetic NER data: a labelled corpus whose entity classes line up
// with latent clusters of matching synthetic embeddings, plus unlabelled text
// for Brown clustering. Entity surfaces are random syllable strings, so the
// lexical baseline learns nothing about an unseen entity from its spelling;
// class information for test entities comes from context triggers (weakly)
// and from the embeddings (strongly).

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "random.hpp"

namespace reprner {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> classes = {"PER", "LOC", "ORG", "MIS"};
  std::size_t train_sentences = 300;
  std::size_t dev_sentences = 100;
  std::size_t test_sentences = 150;
  std::size_t raw_sentences = 3000;
  std::size_t entities_per_class = 40;  // for each of the train and held-out pools
  std::size_t outside_words = 150;
  std::size_t outside_topics = 4;
  std::size_t generic_triggers = 6;
  std::size_t class_triggers = 2;  // per class
  double class_trigger_rate = 0.5;
  double trigger_rate = 0.85;
  double two_token_rate = 0.3;
  std::size_t dim = 16;
  double center_scale = 1.0;
  /// Per-source noise around the cluster centers; one table per entry.
  std::vector<double> embedding_noise = {1.2, 1.6};
};

struct SyntheticData {
  Corpus train, dev, test;
  /// One sentence per line, space-separated.
  std::string raw_text;
  std::vector<EmbeddingTable> embeddings;
};

namespace detail {

class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    for (std::size_t w = 0; w < cfg.outside_words; ++w) outside_.push_back(fresh_word(2, 3));
    for (std::size_t w = 0; w < cfg.generic_triggers; ++w) generic_.push_back(fresh_word(1, 2));
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
      auto& trig = class_triggers_.emplace_back();
      for (std::size_t w = 0; w < cfg.class_triggers; ++w) trig.push_back(fresh_word(1, 2));
      auto& tr = train_pool_.emplace_back();
      auto& ho = heldout_pool_.emplace_back();
      for (std::size_t w = 0; w < cfg.entities_per_class; ++w) tr.push_back(fresh_word(2, 4));
      for (std::size_t w = 0; w < cfg.entities_per_class; ++w) ho.push_back(fresh_word(2, 4));
    }
  }

  Sentence sentence(bool heldout_entities, bool mixed_entities) {
    Sentence s;
    const std::size_t n_outside = 4 + rng_.below(9);
    const std::size_t n_entities = 1 + rng_.below(3);
    std::vector<std::size_t> slots;
    for (std::size_t e = 0; e < n_entities; ++e) slots.push_back(rng_.below(n_outside + 1));
    std::sort(slots.begin(), slots.end());
    std::size_t next_slot = 0;
    for (std::size_t i = 0; i <= n_outside; ++i) {
      while (next_slot < slots.size() && slots[next_slot] == i) {
        add_entity(s, heldout_entities || (mixed_entities && rng_.uniform() < 0.5));
        ++next_slot;
      }
      if (i < n_outside) s.tokens.push_back({outside_[topic_word()], std::nullopt, "O"});
    }
    return s;
  }

  std::vector<EmbeddingTable> embeddings() {
    const std::size_t C = cfg_.classes.size(), T = cfg_.outside_topics;
    // Centers: one per class, one per outside topic, one for all triggers.
    std::vector<std::vector<double>> centers(C + T + 1, std::vector<double>(cfg_.dim));
    for (auto& c : centers)
      for (auto& v : c) v = cfg_.center_scale * rng_.normal();
    std::vector<EmbeddingTable> out;
    for (double noise : cfg_.embedding_noise) {
      EmbeddingTable t(cfg_.dim);
      std::vector<float> v(cfg_.dim);
      auto emit = [&](const std::string& w, const std::vector<double>& center) {
        for (std::size_t d = 0; d < cfg_.dim; ++d)
          v[d] = static_cast<float>(center[d] + noise * rng_.normal());
        t.set(w, v);
      };
      for (std::size_t i = 0; i < outside_.size(); ++i) emit(outside_[i], centers[C + i % T]);
      for (const auto& w : generic_) emit(w, centers[C + T]);
      for (std::size_t c = 0; c < C; ++c) {
        for (const auto& w : class_triggers_[c]) emit(w, centers[C + T]);
        for (const auto& w : train_pool_[c]) emit(w, centers[c]);
        for (const auto& w : heldout_pool_[c]) emit(w, centers[c]);
      }
      out.push_back(std::move(t));
    }
    return out;
  }

 private:
  std::string fresh_word(std::size_t min_syl, std::size_t max_syl) {
    static const char* onsets[] = {"b", "d", "f", "g", "h", "j", "k", "l", "m", "n",
                                   "r", "s", "t", "w", "z", "sh", "kh", "q"};
    static const char* vowels[] = {"a", "i", "u", "aa", "ii", "uu"};
    while (true) {
      std::string w;
      const std::size_t syl = min_syl + rng_.below(max_syl - min_syl + 1);
      for (std::size_t i = 0; i < syl; ++i) {
        w += onsets[rng_.below(std::size(onsets))];
        w += vowels[rng_.below(std::size(vowels))];
      }
      if (used_.insert(w).second) return w;
    }
  }

  // Outside words are drawn with a skew so that frequent function-like words exist.
  std::size_t topic_word() {
    const double u = rng_.uniform();
    return static_cast<std::size_t>(u * u * static_cast<double>(outside_.size()));
  }

  void add_entity(Sentence& s, bool heldout) {
    const std::size_t c = rng_.below(cfg_.classes.size());
    if (rng_.uniform() < cfg_.trigger_rate) {
      const bool specific = rng_.uniform() < cfg_.class_trigger_rate;
      const auto& pool = specific ? class_triggers_[c] : generic_;
      s.tokens.push_back({pool[rng_.below(pool.size())], std::nullopt, "O"});
    }
    const auto& pool = heldout ? heldout_pool_[c] : train_pool_[c];
    const std::size_t len = rng_.uniform() < cfg_.two_token_rate ? 2 : 1;
    for (std::size_t i = 0; i < len; ++i)
      s.tokens.push_back({pool[rng_.below(pool.size())], std::nullopt,
                          (i == 0 ? "B-" : "I-") + cfg_.classes[c]});
  }

  const SyntheticConfig& cfg_;
  Rng rng_;
  std::set<std::string> used_;
  std::vector<std::string> outside_, generic_;
  std::vector<std::vector<std::string>> class_triggers_, train_pool_, heldout_pool_;
};

inline Corpus make_corpus(SyntheticGenerator& gen, std::size_t n, bool heldout, bool mixed,
                          const std::string& name) {
  std::vector<Sentence> sents;
  sents.reserve(n);
  for (std::size_t i = 0; i < n; ++i) sents.push_back(gen.sentence(heldout, mixed));
  return Corpus(std::move(sents), name);
}

}  // namespace detail

/// Train sentences use only the train entity pool; dev and test use only the
/// held-out pool; the raw text mixes both.
inline SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes.empty() || cfg.entities_per_class == 0 || cfg.outside_words == 0 ||
      cfg.outside_topics == 0 || cfg.generic_triggers == 0 || cfg.class_triggers == 0 ||
      cfg.dim == 0 || cfg.train_sentences == 0)
    fail_usage("synthetic: every size parameter must be positive");
  detail::SyntheticGenerator gen(cfg);
  SyntheticData d;
  d.train = detail::make_corpus(gen, cfg.train_sentences, false, false, "synthetic-train");
  d.dev = detail::make_corpus(gen, cfg.dev_sentences, true, false, "synthetic-dev");
  d.test = detail::make_corpus(gen, cfg.test_sentences, true, false, "synthetic-test");
  for (std::size_t i = 0; i < cfg.raw_sentences; ++i) {
    const auto s = gen.sentence(false, true);
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t) d.raw_text += ' ';
      d.raw_text += s.tokens[t].surface;
    }
    d.raw_text += '\n';
  }
  d.embeddings = gen.embeddings();
  return d;
}

}  // namespace reprner

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "reprner/brown.hpp"
#include "reprner/crf.hpp"
#include "reprner/eval.hpp"
#include "reprner/experiment.hpp"
#include "reprner/kmeans.hpp"
#include "reprner/prototypes.hpp"
#include "reprner/transforms.hpp"

using namespace reprner;

namespace {

// Tolerances.
constexpr double kLogZRelTol = 1e-8;
constexpr double kGradRelTol = 1e-4;
constexpr double kNormTol = 1e-8;
constexpr double kTraceTol = 1e-8;
constexpr double kBrownAmiTol = 1e-10;
constexpr double kNpmiTol = 1e-12;
// +CE minus Baseline F1 on the bundled synthetic profile (seed 7, first
// embedding column), pinned from the first verified run.
constexpr double kPinnedCeMargin = 57.15;
constexpr double kCeMarginTol = 0.5;

struct Check {
  bool ok = true;
  std::ostringstream notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) notes << "; failed: ";
      else notes << ", ";
      notes << what;
      ok = false;
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2g", v);
  return buf;
}

// ---------------------------------------------------------------- 1

void crf_correctness(Check& c) {
  std::size_t viterbi_ok = 0;
  double worst_logz = 0.0, worst_norm = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + seed % 6, Y = 1 + (seed / 6) % 4;
    const auto inst = oracle::random_crf(seed, n, Y, 1.5);
    const auto cs = inst.model.compile(inst.sentence, false);
    double best = -INFINITY;
    std::vector<double> scores;
    oracle::enumerate(n, Y, [&](const auto& y) {
      const std::vector<std::uint32_t> yy(y.begin(), y.end());
      best = std::max(best, sequence_score(inst.model, cs, yy));
      scores.push_back(oracle::direct_score(inst.model, inst.sentence, y));
    });
    const auto vit = viterbi_decode(inst.model, cs);
    viterbi_ok += vit.score == best && sequence_score(inst.model, cs, vit.path) == best;
    const double z = log_partition(inst.model, inst.sentence);
    const double ref = oracle::brute_log_partition(inst.model, inst.sentence);
    worst_logz = std::max(worst_logz, std::abs(z - ref) / std::max(1.0, std::abs(ref)));
    double total = 0.0;
    for (double s : scores) total += std::exp(s - z);
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  }

  double worst_grad = 0.0;
  const std::size_t grad_seeds = 20;
  TrainingConfig cfg;
  for (std::uint64_t seed = 0; seed < grad_seeds; ++seed) {
    auto model = oracle::random_crf(7000 + seed, 1, 4).model;
    std::vector<AttributedSentence> data;
    Rng rng(seed);
    for (int k = 0; k < 3; ++k)
      data.push_back(oracle::random_crf(8000 + 10 * seed + static_cast<std::uint64_t>(k), 1 + rng.below(5), 4).sentence);
    const auto g = log_likelihood_and_gradient(model, data, cfg).gradient;
    const double h = 1e-5;
    for (std::size_t k = 0; k < model.num_weights(); ++k) {
      const double w = model.weights()[k];
      model.weights()[k] = w + h;
      const double up = log_likelihood_and_gradient(model, data, cfg).value;
      model.weights()[k] = w - h;
      const double down = log_likelihood_and_gradient(model, data, cfg).value;
      model.weights()[k] = w;
      const double fd = (up - down) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(fd - g[k]) / std::max(1.0, std::abs(fd)));
    }
  }
  c.notes << "viterbi exact " << viterbi_ok << "/100, max logZ rel err " << sci(worst_logz)
          << ", max gradient rel err " << sci(worst_grad) << " over " << grad_seeds
          << " seeds, max |sum p - 1| " << sci(worst_norm);
  c.expect(viterbi_ok == 100, "viterbi");
  c.expect(worst_logz < kLogZRelTol, "log partition");
  c.expect(worst_grad < kGradRelTol, "gradient");
  c.expect(worst_norm < kNormTol, "normalization");
}

// ---------------------------------------------------------------- 2

void trainer_sanity(Check& c) {
  AttributedSentence s;
  s.tokens = {{{"w=a", 1.0}}, {{"w=b", 1.0}}, {{"w=c", 1.0}}};
  s.labels = {"X", "Y", "X"};
  const auto r = train({s}, {}, {});
  const bool memorized = viterbi(r.model, s) == s.labels;

  std::vector<AttributedSentence> data;
  for (std::uint64_t k = 0; k < 15; ++k) data.push_back(oracle::random_crf(300 + k, 2 + k % 5, 3).sentence);
  const auto big = train(data, {}, {});
  bool monotone = true;
  for (const auto* trace : {&r.objective_trace, &big.objective_trace})
    for (std::size_t i = 1; i < trace->size(); ++i) monotone = monotone && (*trace)[i] >= (*trace)[i - 1];
  c.notes << "memorized " << (memorized ? "yes" : "no") << ", traces of " << r.objective_trace.size()
          << " and " << big.objective_trace.size() << " steps non-decreasing: " << (monotone ? "yes" : "no");
  c.expect(memorized, "memorization");
  c.expect(monotone, "monotone trace");
}

// ---------------------------------------------------------------- 3

void transforms(Check& c) {
  using T = Ternary;
  const T P = T::pos, Z = T::zero, N = T::neg;
  const std::vector<double> player = {0.764120, 0.093741, -0.109514, 0.812259, 0.278912, 0.620007};
  bool examples = binarize(player, BinarizeMethod::A) == std::vector<T>{P, P, Z, P, P, P};
  examples = examples && binarize(player, BinarizeMethod::B) == std::vector<T>{P, Z, N, P, Z, P};
  examples = examples && binarize({4.0, 1.0, 1.0, -2.0}, BinarizeMethod::B) == std::vector<T>{P, Z, Z, N};
  examples = examples && binarize({4.0, 1.0, 1.0, -2.0}, BinarizeMethod::C) == std::vector<T>{P, P, P, N};
  examples = examples && binarize({1.0, 2.0, 3.0, 4.0}, BinarizeMethod::C) == std::vector<T>{Z, Z, P, P};

  Rng rng(31);
  std::size_t covariant = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(2 + rng.below(50));
    for (auto& v : x) v = rng.normal();
    const double s = std::exp(rng.uniform(-6.0, 6.0));
    auto sx = x;
    for (auto& v : sx) v *= s;
    bool same = true;
    for (auto m : {BinarizeMethod::A, BinarizeMethod::B, BinarizeMethod::C})
      same = same && binarize(x, m) == binarize(sx, m);
    covariant += same;
  }

  // The 20-word table: the first 20 rows of the bundled synthetic embeddings.
  const auto full = load_embeddings(std::string(REPRNER_SOURCE_DIR) + "/data/synthetic/emb_a.txt",
                                    EmbeddingFormat::word2vec_text, nullptr);
  EmbeddingTable table(full.dim());
  for (std::size_t i = 0; i < 20; ++i) table.set(full.words()[i], full.row(i));
  SparseCodingConfig cfg;
  cfg.K = 10 * table.dim();
  cfg.seed = 5;
  const auto se = sparse_code(table, cfg);
  const double trace_err = std::abs(se.objective_trace.back() -
                                    oracle::naive_sparse_objective(se, table, cfg.delta, cfg.tau));
  const bool decreases = se.objective_trace.back() < se.objective_trace.front();

  cfg.nonneg = true;
  const auto nn = sparse_code(table, cfg);
  const bool nonneg = *std::min_element(nn.codes.begin(), nn.codes.end()) >= 0.0;

  cfg.nonneg = false;
  std::vector<double> zf;
  for (double delta : {0.1, 0.5, 1.0}) {
    cfg.delta = delta;
    zf.push_back(sparse_code(table, cfg).zero_fraction());
  }
  const bool zf_monotone = zf[0] <= zf[1] && zf[1] <= zf[2];

  c.notes << "hand examples " << (examples ? "exact" : "differ") << ", scale covariance "
          << covariant << "/1000, objective " << se.objective_trace.front() << " -> "
          << se.objective_trace.back() << ", re-evaluation diff " << sci(trace_err)
          << ", NNSE min code " << *std::min_element(nn.codes.begin(), nn.codes.end())
          << ", zero fraction " << zf[0] << " <= " << zf[1] << " <= " << zf[2];
  c.expect(examples, "binarization examples");
  c.expect(covariant == 1000, "scale covariance");
  c.expect(decreases, "objective decrease");
  c.expect(trace_err < kTraceTol, "trace re-evaluation");
  c.expect(nonneg, "NNSE nonnegativity");
  c.expect(zf_monotone, "zero fraction monotone in delta");
}

// ---------------------------------------------------------------- 4

void clustering(Check& c) {
  bool sse_monotone = true;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto t = oracle::random_table(seed, 80, 4);
    const auto r = kmeans_fit(t, 2 + seed % 10, seed, 200);
    for (std::size_t i = 1; i < r.sse_trace.size(); ++i)
      sse_monotone = sse_monotone && r.sse_trace[i] <= r.sse_trace[i - 1] + 1e-9;
  }
  const auto pts = oracle::random_table(4, 15, 3);
  const bool zero_when_k_eq_n = kmeans_fit(pts, 15, 1).sse == 0.0;

  EmbeddingTable four(2);
  four.set("p00", std::vector<float>{0, 0});
  four.set("p01", std::vector<float>{0, 1});
  four.set("p10", std::vector<float>{10, 0});
  four.set("p11", std::vector<float>{10, 1});
  // Brute force over all 2-partitions of the four points.
  double brute = INFINITY;
  for (unsigned mask = 1; mask < 15; ++mask) {
    double sse = 0.0;
    for (unsigned side = 0; side < 2; ++side) {
      double mx = 0, my = 0, n = 0;
      for (unsigned i = 0; i < 4; ++i)
        if (((mask >> i) & 1u) == side) mx += four.row(i)[0], my += four.row(i)[1], n += 1;
      mx /= n;
      my /= n;
      for (unsigned i = 0; i < 4; ++i)
        if (((mask >> i) & 1u) == side)
          sse += (four.row(i)[0] - mx) * (four.row(i)[0] - mx) + (four.row(i)[1] - my) * (four.row(i)[1] - my);
    }
    brute = std::min(brute, sse);
  }
  const double four_sse = kmeans_fit(four, 2, 3).sse;

  double worst_ami = 0.0;
  bool merges_match = true, prefix_free = true;
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    std::vector<std::vector<std::string>> lines(6 + rng.below(8));
    for (auto& l : lines) {
      l.resize(2 + rng.below(7));
      for (auto& w : l) w = "v" + std::to_string(rng.below(8));
    }
    std::set<std::string> vocab;
    for (const auto& l : lines) vocab.insert(l.begin(), l.end());
    const std::size_t C = 1 + seed % std::min<std::size_t>(4, vocab.size());
    const auto model = brown_induce(lines, C, 1);
    const auto naive = oracle::NaiveBrown(lines, C, 1).run();
    ++instances;
    if (model.merges.size() != naive.size()) {
      merges_match = false;
      continue;
    }
    for (std::size_t i = 0; i < naive.size(); ++i) {
      const auto& m = model.merges[i];
      merges_match = merges_match && std::minmax(m.left, m.right) == std::minmax(naive[i].left, naive[i].right) &&
                     m.merged == naive[i].merged;
      worst_ami = std::max(worst_ami, std::abs(m.ami - naive[i].ami));
    }
    std::vector<std::string> paths;
    for (const auto& [w, p] : model.paths) paths.push_back(p);
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    for (std::size_t i = 0; i + 1 < paths.size(); ++i)
      prefix_free = prefix_free && paths[i + 1].compare(0, paths[i].size(), paths[i]) != 0;
  }
  c.notes << "SSE traces non-increasing: " << (sse_monotone ? "yes" : "no") << ", sse(k=n) "
          << (zero_when_k_eq_n ? "0" : "nonzero") << ", 4-point sse " << four_sse << " (brute force "
          << brute << "), Brown " << instances << " instances merge-for-merge "
          << (merges_match ? "equal" : "different") << " with max AMI diff " << sci(worst_ami)
          << ", paths prefix-free: " << (prefix_free ? "yes" : "no");
  c.expect(sse_monotone, "SSE monotone");
  c.expect(zero_when_k_eq_n, "sse zero at k = n");
  c.expect(brute == 1.0 && four_sse == 1.0, "four-point optimum");
  c.expect(merges_match && worst_ami < kBrownAmiTol, "Brown oracle");
  c.expect(prefix_free, "prefix-free paths");
}

// ---------------------------------------------------------------- 5

void prototypes(Check& c) {
  Rng rng(77);
  double lo = 1.0, hi = -1.0;
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t N = 1 + rng.below(500);
    const std::size_t joint = 1 + rng.below(N);
    const std::size_t ct = joint + rng.below(N - joint + 1);
    const std::size_t wt = joint + rng.below(N - joint + 1);
    if (ct + wt - joint > N) continue;
    const double v = npmi_value(joint, ct, wt, N);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double perfect = npmi_value(2, 2, 2, 10);
  const double independent = npmi_value(2, 4, 5, 10);
  const double hand = npmi_value(1, 2, 2, 8);

  EmbeddingTable e(4);
  e.set("p", std::vector<float>{1, 0, 0, 0});
  e.set("q", std::vector<float>{0.3f, -2.0f, 0.5f, 1.0f});
  e.set("half", std::vector<float>{1, 1, 1, 1});
  PrototypeTable t;
  t.prototypes["B-LOC"] = {"p"};
  t.prototypes["B-PER"] = {"q"};
  t.scores["B-LOC"] = {1.0};
  t.scores["B-PER"] = {1.0};
  const bool self = assign_prototypes(t, e, "p") == std::vector<std::string>{"proto=p"} &&
                    assign_prototypes(t, e, "q") == std::vector<std::string>{"proto=q"};
  const bool half_exact = cosine(*e.lookup("half"), *e.lookup("p")) == 0.5;
  const bool half_rejected = assign_prototypes(t, e, "half").empty();

  c.notes << "NPMI range [" << lo << ", " << hi << "], perfect " << perfect << ", independent "
          << independent << ", hand example " << hand << " vs ln2/ln8 " << std::log(2.0) / std::log(8.0)
          << ", self-assignment " << (self ? "yes" : "no") << ", cosine 0.5 assigned: "
          << (half_rejected ? "no" : "yes");
  c.expect(lo >= -1.0 - kNpmiTol && hi <= 1.0 + kNpmiTol, "NPMI bounds");
  c.expect(std::abs(perfect - 1.0) <= kNpmiTol, "perfect association");
  c.expect(std::abs(independent) <= kNpmiTol, "independence");
  c.expect(std::abs(hand - std::log(2.0) / std::log(8.0)) <= kNpmiTol, "hand example");
  c.expect(self, "self assignment");
  c.expect(half_exact && half_rejected, "strict threshold");
}

// ---------------------------------------------------------------- 6

void scorer(Check& c) {
  using L = std::vector<std::vector<std::string>>;
  const auto a = score(L{{"B-PER", "I-PER", "O", "B-LOC"}}, L{{"B-PER", "I-PER", "O", "B-LOC"}});
  const bool ex1 = format_percent(a.overall.precision) == "100.00" &&
                   format_percent(a.overall.recall) == "100.00" && format_percent(a.overall.f1) == "100.00";
  const auto b = score(L{{"B-PER", "O", "O", "B-LOC", "O"}}, L{{"B-PER", "O", "B-ORG", "O", "O"}});
  const bool ex2 = format_percent(b.overall.precision) == "50.00" &&
                   format_percent(b.overall.recall) == "50.00" && format_percent(b.overall.f1) == "50.00";
  const auto d = score(L{{"B-PER", "I-PER"}}, L{{"B-PER", "B-PER"}});
  const bool ex3 = d.overall.correct_count == 0 && d.overall.pred_count == 2 &&
                   d.overall.gold_count == 1 && d.overall.precision == 0.0 && d.overall.recall == 0.0;

  static const std::vector<std::string> tags = {"O", "O", "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"};
  Rng rng(8);
  std::size_t symmetric = 0, perfect = 0, with_entities = 0;
  for (int trial = 0; trial < 50; ++trial) {
    L g(1 + rng.below(6)), p;
    for (auto& s : g) {
      s.resize(1 + rng.below(10));
      for (auto& l : s) l = tags[rng.below(tags.size())];
    }
    g[0][0] = "B-PER";
    p = g;
    for (auto& s : p)
      for (auto& l : s)
        if (rng.uniform() < 0.3) l = tags[rng.below(tags.size())];
    const auto x = score(g, p), y = score(p, g);
    symmetric += x.overall.precision == y.overall.recall && x.overall.recall == y.overall.precision &&
                 x.overall.f1 == y.overall.f1;
    ++with_entities;
    perfect += format_percent(score(g, g).overall.f1) == "100.00";
  }
  c.notes << "hand examples " << ex1 + ex2 + ex3 << "/3, gold-vs-gold 100.00 on " << perfect << "/"
          << with_entities << ", swap symmetry " << symmetric << "/50";
  c.expect(ex1 && ex2 && ex3, "hand examples");
  c.expect(perfect == with_entities, "gold vs gold");
  c.expect(symmetric == 50, "swap symmetry");
}

// ---------------------------------------------------------------- 7

void synthetic_ablation(Check& c) {
  const auto cfg = load_experiment(std::string(REPRNER_SOURCE_DIR) + "/profiles/synthetic-demo.json");
  const auto data = load_experiment_data(cfg);
  const auto r = run_experiment(cfg, data);
  c.expect(!r.partial, "ablation stopped early: " + r.error);
  c.expect(r.rows.size() == 14, "expected 14 rows");
  bool finite = true;
  for (const auto& row : r.f1)
    for (double v : row) finite = finite && std::isfinite(v);
  c.expect(finite, "non-finite F1");
  if (r.rows.size() != 14) return;
  const std::size_t base = 0, ce = 7;
  c.expect(r.rows[base] == "Baseline" && r.rows[ce] == "+ CE", "row order");
  for (std::size_t col = 0; col < r.columns.size(); ++col)
    c.expect(r.f1[ce][col] > r.f1[base][col], "+ CE not above Baseline for " + r.columns[col]);
  const double margin = r.f1[ce][0] - r.f1[base][0];
  c.notes << "14 rows, " << r.columns.size() << " columns, Baseline " << format_percent(r.f1[base][0])
          << ", + CE " << format_percent(r.f1[ce][0]) << " (" << r.columns[0] << "), margin "
          << format_percent(margin) << " vs pinned " << format_percent(kPinnedCeMargin) << " +- "
          << kCeMarginTol;
  c.expect(std::abs(margin - kPinnedCeMargin) <= kCeMarginTol, "margin outside pinned band");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"CRF correctness", crf_correctness},   {"trainer sanity", trainer_sanity},
      {"transforms", transforms},             {"clustering", clustering},
      {"prototypes", prototypes},             {"scorer", scorer},
      {"end-to-end synthetic ablation", synthetic_ablation},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failures += !c.ok;
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << c.notes.str() << std::endl;
  }
  std::cout << "criterion 8 (full reproduction on user-supplied data): not run; optional" << std::endl;
  return failures == 0 ? 0 : 1;
}

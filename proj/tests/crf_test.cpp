#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reprner/crf.hpp"

using namespace reprner;

namespace {

std::vector<std::uint32_t> to_u32(const std::vector<std::size_t>& y) {
  return std::vector<std::uint32_t>(y.begin(), y.end());
}

}  // namespace

TEST(CrfInference, ViterbiMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + seed % 6, Y = 1 + (seed / 6) % 4;
    const auto inst = oracle::random_crf(seed, n, Y);
    const auto c = inst.model.compile(inst.sentence, false);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> arg;
    oracle::enumerate(n, Y, [&](const auto& y) {
      const double v = sequence_score(inst.model, c, to_u32(y));
      if (v > best) {
        best = v;
        arg = y;
      }
    });
    const auto vit = viterbi_decode(inst.model, c);
    EXPECT_EQ(vit.score, best) << "seed " << seed;
    EXPECT_EQ(sequence_score(inst.model, c, vit.path), best) << "seed " << seed;
    // The summation order differs from the direct oracle only in rounding.
    EXPECT_NEAR(oracle::direct_score(inst.model, inst.sentence, arg), best, 1e-9);
  }
}

TEST(CrfInference, LogPartitionMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + seed % 6, Y = 1 + (seed / 6) % 4;
    const auto inst = oracle::random_crf(1000 + seed, n, Y, 2.0);
    const double z = log_partition(inst.model, inst.sentence);
    const double ref = oracle::brute_log_partition(inst.model, inst.sentence);
    EXPECT_LE(std::abs(z - ref), 1e-8 * std::max(1.0, std::abs(ref))) << "seed " << seed;
  }
}

TEST(CrfInference, ProbabilitiesNormalize) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 1 + seed % 6, Y = 1 + seed % 4;
    const auto inst = oracle::random_crf(2000 + seed, n, Y);
    const double z = log_partition(inst.model, inst.sentence);
    double total = 0.0;
    oracle::enumerate(n, Y, [&](const auto& y) {
      total += std::exp(oracle::direct_score(inst.model, inst.sentence, y) - z);
    });
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(CrfInference, HandExamples) {
  CrfModel one({"A", "B"}, {"f"});
  one.state(0, 0) = 0.3;
  one.state(0, 1) = -1.2;
  AttributedSentence s;
  s.tokens = {{{"f", 1.0}}};
  EXPECT_NEAR(log_partition(one, s), std::log(std::exp(0.3) + std::exp(-1.2)), 1e-15);

  CrfModel zero({"A", "B", "C"}, {});
  AttributedSentence empty;
  empty.tokens.resize(5);
  EXPECT_NEAR(log_partition(zero, empty), 5 * std::log(3.0), 1e-12);
  EXPECT_EQ(viterbi(zero, empty), std::vector<std::string>(5, "A"));

  CrfModel single({"X"}, {"f"});
  single.state(0, 0) = 4.0;
  EXPECT_EQ(viterbi(single, empty), std::vector<std::string>(5, "X"));
}

TEST(CrfLikelihood, UniformSingleToken) {
  CrfModel m({"A", "B", "C", "D"}, {"f"});
  AttributedSentence s;
  s.tokens = {{{"f", 1.0}}};
  s.labels = {"C"};
  const auto r = log_likelihood_and_gradient(m, std::vector<AttributedSentence>{s}, {});
  EXPECT_NEAR(r.value, -std::log(4.0), 1e-15);
  EXPECT_NEAR(r.gradient[m.label_index("C").value()], 0.75, 1e-15);
  EXPECT_NEAR(r.gradient[m.label_index("A").value()], -0.25, 1e-15);
}

TEST(CrfLikelihood, EmptyDataIsPenaltyOnly) {
  const auto inst = oracle::random_crf(3, 2, 3);
  TrainingConfig cfg;
  cfg.l2_sigma2 = 2.5;
  double norm = 0.0;
  for (double w : inst.model.weights()) norm += w * w;
  const auto r = log_likelihood_and_gradient(inst.model, std::vector<AttributedSentence>{}, cfg);
  EXPECT_NEAR(r.value, -norm / 5.0, 1e-12);
}

TEST(CrfLikelihood, GradientMatchesFiniteDifferences) {
  TrainingConfig cfg;
  cfg.l2_sigma2 = 1.7;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto inst = oracle::random_crf(500 + seed, 1, 4);
    std::vector<AttributedSentence> data;
    Rng rng(seed);
    for (int k = 0; k < 3; ++k) {
      auto s = oracle::random_crf(900 + 10 * seed + static_cast<std::uint64_t>(k),
                                  1 + rng.below(5), 4).sentence;
      data.push_back(s);
    }
    auto& model = inst.model;
    const auto r = log_likelihood_and_gradient(model, data, cfg);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t k = 0; k < model.num_weights(); ++k) {
      const double w = model.weights()[k];
      model.weights()[k] = w + h;
      const double up = log_likelihood_and_gradient(model, data, cfg).value;
      model.weights()[k] = w - h;
      const double down = log_likelihood_and_gradient(model, data, cfg).value;
      model.weights()[k] = w;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - r.gradient[k]) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(CrfLikelihood, ThreadCountDoesNotChangeObjective) {
  std::vector<AttributedSentence> data;
  for (std::uint64_t s = 0; s < 17; ++s) data.push_back(oracle::random_crf(s, 1 + s % 5, 3).sentence);
  const auto inst = oracle::random_crf(99, 1, 3);
  TrainingConfig one, four;
  four.threads = 4;
  const auto a = log_likelihood_and_gradient(inst.model, data, one);
  const auto b = log_likelihood_and_gradient(inst.model, data, four);
  EXPECT_NEAR(a.value, b.value, 1e-10);
  for (std::size_t k = 0; k < a.gradient.size(); ++k) EXPECT_NEAR(a.gradient[k], b.gradient[k], 1e-10);
}

TEST(CrfLikelihood, UnknownLabelIsAnError) {
  CrfModel m({"A"}, {});
  AttributedSentence s;
  s.tokens.resize(1);
  s.labels = {"B"};
  EXPECT_THROW(log_likelihood_and_gradient(m, std::vector<AttributedSentence>{s}, {}), Error);
}

TEST(CrfTrain, MemorizesSingleSentence) {
  AttributedSentence s;
  s.tokens = {{{"w=a", 1.0}}, {{"w=b", 1.0}}, {{"w=c", 1.0}}};
  s.labels = {"P", "Q", "P"};
  const auto r = train({s}, {}, {});
  EXPECT_EQ(viterbi(r.model, s), s.labels);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    EXPECT_GE(r.objective_trace[i], r.objective_trace[i - 1]);
}

TEST(CrfTrain, TraceNonDecreasingOnRandomData) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<AttributedSentence> data;
    for (std::uint64_t s = 0; s < 12; ++s)
      data.push_back(oracle::random_crf(seed * 100 + s, 2 + s % 5, 3).sentence);
    TrainingConfig cfg;
    cfg.l2_sigma2 = 0.5;
    const auto r = train(data, {}, cfg);
    ASSERT_GE(r.objective_trace.size(), 2u);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_GE(r.objective_trace[i], r.objective_trace[i - 1]) << "seed " << seed << " step " << i;
  }
}

TEST(CrfTrain, ZeroIterationsGivesZeroWeights) {
  const auto inst = oracle::random_crf(1, 4, 3);
  TrainingConfig cfg;
  cfg.max_iterations = 0;
  const auto r = train({inst.sentence}, {}, cfg);
  for (double w : r.model.weights()) EXPECT_EQ(w, 0.0);
  EXPECT_THROW(train({}, {}, {}), Error);
}

TEST(CrfModelFile, JsonRoundTrip) {
  auto inst = oracle::random_crf(8, 3, 3);
  inst.model.feature_config = {{"window", 1}};
  inst.model.training.l2_sigma2 = 0.25;
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(inst.model).dump()));
  EXPECT_EQ(back.labels(), inst.model.labels());
  EXPECT_EQ(back.feature_config, inst.model.feature_config);
  EXPECT_EQ(back.training.l2_sigma2, 0.25);
  EXPECT_EQ(viterbi(back, inst.sentence), viterbi(inst.model, inst.sentence));
  EXPECT_EQ(log_partition(back, inst.sentence), log_partition(inst.model, inst.sentence));
  auto bad = model_to_json(inst.model);
  bad["format_version"] = 99;
  EXPECT_THROW(model_from_json(bad), Error);
}

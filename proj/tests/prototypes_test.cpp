#include <cmath>

#include <gtest/gtest.h>

#include "reprner/prototypes.hpp"
#include "reprner/random.hpp"

using namespace reprner;

namespace {

Corpus labelled(const std::vector<std::vector<std::pair<std::string, std::string>>>& sents) {
  std::vector<Sentence> out;
  for (const auto& s : sents) {
    Sentence sent;
    for (const auto& [w, l] : s) sent.tokens.push_back({w, std::nullopt, l});
    out.push_back(std::move(sent));
  }
  return Corpus(std::move(out));
}

}  // namespace

TEST(Npmi, PerfectAssociationIsOne) {
  EXPECT_EQ(npmi_value(2, 2, 2, 10), 1.0);
  EXPECT_EQ(npmi_value(5, 5, 5, 5), 1.0);
}

TEST(Npmi, IndependenceIsZero) { EXPECT_NEAR(npmi_value(2, 4, 5, 10), 0.0, 1e-12); }

TEST(Npmi, EightTokenHandExample) {
  EXPECT_NEAR(npmi_value(1, 2, 2, 8), std::log(2.0) / std::log(8.0), 1e-12);
}

TEST(Npmi, BoundedOnRandomCountTables) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t N = 1 + rng.below(200);
    const std::size_t joint = 1 + rng.below(N);
    const std::size_t ct = joint + rng.below(N - joint + 1);
    const std::size_t wt = joint + rng.below(N - joint + 1);
    if (ct + wt - joint > N) continue;  // not realisable
    const double v = npmi_value(joint, ct, wt, N);
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
    if (v == 1.0) {
      EXPECT_EQ(joint, ct);
      EXPECT_EQ(joint, wt);
    }
  }
}

TEST(ComputeNpmi, MarginalsAndRange) {
  const auto c = labelled({{{"w", "B-PER"}, {"x", "O"}, {"y", "O"}, {"z", "O"}, {"q", "O"}},
                           {{"w", "B-PER"}, {"x", "O"}, {"y", "B-LOC"}, {"r", "O"}, {"s", "O"}}});
  const auto t = compute_npmi(c);
  EXPECT_EQ(t.N, 10u);
  std::size_t sum = 0;
  for (const auto& [_, v] : t.joint) sum += v;
  EXPECT_EQ(sum, t.N);
  EXPECT_EQ(t.npmi.at({"B-PER", "w"}), 1.0);
  for (const auto& [_, v] : t.npmi) {
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
  EXPECT_THROW(compute_npmi(Corpus(std::vector<Sentence>{})), Error);
}

TEST(SelectPrototypes, TopMAndTieBreak) {
  NpmiTable t;
  t.npmi[{"B-PER", "a"}] = 0.9;
  t.npmi[{"B-PER", "b"}] = 0.8;
  t.npmi[{"B-LOC", "y"}] = 0.5;
  t.npmi[{"B-LOC", "x"}] = 0.5;
  t.npmi[{"O", "the"}] = 0.99;
  const auto p = select_prototypes(t, 1);
  EXPECT_EQ(p.prototypes.at("B-PER"), std::vector<std::string>{"a"});
  EXPECT_EQ(p.prototypes.at("B-LOC"), std::vector<std::string>{"x"});
  EXPECT_FALSE(p.prototypes.count("O"));
  EXPECT_TRUE(select_prototypes(t, 1, 0.5, true).prototypes.count("O"));
  EXPECT_EQ(select_prototypes(t, 10).prototypes.at("B-PER").size(), 2u);
  EXPECT_THROW(select_prototypes(t, 0), Error);
}

TEST(SelectPrototypes, IndependentOfSentenceOrder) {
  std::vector<std::vector<std::pair<std::string, std::string>>> sents = {
      {{"a", "B-PER"}, {"b", "O"}}, {{"c", "B-LOC"}, {"a", "O"}}, {{"d", "B-PER"}, {"e", "I-PER"}}};
  const auto fwd = select_prototypes(compute_npmi(labelled(sents)), 3);
  std::reverse(sents.begin(), sents.end());
  const auto rev = select_prototypes(compute_npmi(labelled(sents)), 3);
  EXPECT_EQ(fwd.prototypes, rev.prototypes);
}

TEST(AssignPrototypes, SelfStrictThresholdAndOov) {
  EmbeddingTable e(2);
  e.set("p", std::vector<float>{1, 0});
  e.set("parallel", std::vector<float>{0.5f, 0.0f});
  e.set("zero", std::vector<float>{0, 0});
  PrototypeTable t;
  t.prototypes["B-PER"] = {"p", "missing"};
  t.scores["B-PER"] = {1.0, 0.9};
  EXPECT_EQ(assign_prototypes(t, e, "p"), std::vector<std::string>{"proto=p"});
  EXPECT_TRUE(assign_prototypes(t, e, "unknown").empty());
  EXPECT_TRUE(assign_prototypes(t, e, "zero").empty());
  t.threshold = 1.0;
  EXPECT_TRUE(assign_prototypes(t, e, "parallel").empty());
}

TEST(AssignPrototypes, CosineExactlyHalfNotAssigned) {
  EmbeddingTable e(4);
  e.set("p", std::vector<float>{1, 0, 0, 0});
  e.set("half", std::vector<float>{1, 1, 1, 1});     // cos = 1 / (1 * 2) = 0.5 exactly
  e.set("above", std::vector<float>{1, 1, 1, 0.5f});  // cos > 0.5
  EXPECT_EQ(cosine(*e.lookup("half"), *e.lookup("p")), 0.5);
  PrototypeTable t;
  t.prototypes["B-LOC"] = {"p"};
  t.scores["B-LOC"] = {1.0};
  EXPECT_TRUE(assign_prototypes(t, e, "half").empty());
  EXPECT_EQ(assign_prototypes(t, e, "above"), std::vector<std::string>{"proto=p"});
}

TEST(AssignPrototypes, DeduplicatesAcrossClasses) {
  EmbeddingTable e(2);
  e.set("p", std::vector<float>{1, 0});
  PrototypeTable t;
  t.prototypes["B-PER"] = {"p"};
  t.prototypes["I-PER"] = {"p"};
  t.scores["B-PER"] = {1.0};
  t.scores["I-PER"] = {1.0};
  EXPECT_EQ(assign_prototypes(t, e, "p").size(), 1u);
}

TEST(PrototypeFile, RoundTrip) {
  NpmiTable t;
  t.npmi[{"B-PER", "a"}] = 0.9;
  t.npmi[{"B-PER", "b"}] = 1.0 / 3.0;
  t.npmi[{"B-LOC", "x"}] = -0.25;
  const auto p = select_prototypes(t, 5);
  const auto back = parse_prototypes(serialize_prototypes(p));
  EXPECT_EQ(back.prototypes, p.prototypes);
  EXPECT_EQ(back.scores, p.scores);
  EXPECT_THROW(parse_prototypes("B-PER\ta\n"), Error);
  EXPECT_THROW(parse_prototypes(""), Error);
}

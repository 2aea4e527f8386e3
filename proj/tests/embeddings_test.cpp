#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reprner/embeddings.hpp"

using namespace reprner;

TEST(LoadEmbeddings, Word2vecHeader) {
  const auto t = parse_embeddings("2 3\nfoo 0.1 0.2 0.3\nbar 1 2 3\n", EmbeddingFormat::word2vec_text);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_FLOAT_EQ((*t.lookup("bar"))[2], 3.0f);
}

TEST(LoadEmbeddings, GloveInfersDim) {
  const auto t = parse_embeddings("w 0.1 0.2\n", EmbeddingFormat::glove_text);
  EXPECT_EQ(t.dim(), 2u);
}

TEST(LoadEmbeddings, Errors) {
  try {
    parse_embeddings("a 1 2 3\nb 1 2\n", EmbeddingFormat::glove_text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_embeddings("2 3\na 1 2 x\n", EmbeddingFormat::word2vec_text), Error);
  EXPECT_THROW(parse_embeddings("", EmbeddingFormat::glove_text), Error);
  EXPECT_THROW(parse_embeddings("1 3\n", EmbeddingFormat::word2vec_text), Error);
  EXPECT_THROW(parse_embeddings("a 1 nan\n", EmbeddingFormat::glove_text), Error);
}

TEST(LoadEmbeddings, DuplicateLastWinsWithWarning) {
  std::ostringstream warn;
  const auto t = parse_embeddings("a 1 2\nb 3 4\na 5 6\n", EmbeddingFormat::glove_text, &warn);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_FLOAT_EQ((*t.lookup("a"))[0], 5.0f);
  EXPECT_NE(warn.str().find("duplicate word 'a'"), std::string::npos);
}

TEST(Lookup, KnownUnknownEmpty) {
  const auto t = parse_embeddings("a 1 2\n", EmbeddingFormat::glove_text);
  ASSERT_TRUE(lookup(t, "a"));
  EXPECT_FLOAT_EQ((*lookup(t, "a"))[1], 2.0f);
  EXPECT_FALSE(lookup(t, "b"));
  EXPECT_FALSE(lookup(t, ""));
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine({1.0, 2.0}, {1.0, 2.0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1.0, 0.0}, {0.0, 1.0}), 0.0);
  // dot = 1, norms sqrt(2) and 1
  EXPECT_NEAR(cosine({1.0, 1.0}, {1.0, 0.0}), 0.70710678118654752, 1e-9);
  EXPECT_THROW(cosine({0.0, 0.0}, {1.0, 0.0}), Error);
  EXPECT_THROW(cosine({1.0}, {1.0, 0.0}), Error);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> u(5), v(5);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    EXPECT_EQ(cosine(u, v), cosine(v, u));
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    std::vector<double> cu = u;
    for (auto& x : cu) x *= c;
    EXPECT_NEAR(cosine(u, cu), 1.0, 1e-12);
    const double r = cosine(u, v);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(SaveEmbeddings, Word2vecRoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = oracle::random_table(seed, 25, 7, std::pow(10.0, static_cast<double>(seed % 5) - 2));
    const auto text = serialize_word2vec(t);
    const auto back = parse_embeddings(text, EmbeddingFormat::word2vec_text);
    EXPECT_EQ(back, t);
    EXPECT_EQ(serialize_word2vec(back), text);
  }
}

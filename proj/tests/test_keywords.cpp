#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "g2s/keywords.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace g2s {
namespace {

TEST(TextRank, EmptyInput) { EXPECT_TRUE(textrank({}, {}).empty()); }

TEST(TextRank, SymmetricPairScoresEqual) {
  const auto s = textrank({{"a", "b"}, {"b", "a"}}, {});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.at("a"), s.at("b"));
}

TEST(TextRank, StarHubScoresHighest) {
  // hub co-occurs with four spokes that never co-occur with each other
  const std::vector<Tokens> sents = {{"hub", "s1"}, {"hub", "s2"}, {"s3", "hub"}, {"hub", "s4"}};
  const auto s = textrank(sents, {});
  const auto oracle = testing::dense_textrank(sents, 5, 0.85, 100, 1e-6);
  for (const auto& [tok, v] : oracle) EXPECT_NEAR(s.at(tok), v, 1e-6) << tok;
  for (const char* spoke : {"s1", "s2", "s3", "s4"}) EXPECT_GT(s.at("hub"), s.at(spoke));
  // Fixed point of this graph: hub = 0.15 + 0.85 * 4 * spoke, spoke = 0.15 + 0.85 * hub / 4
  const double hub = (0.15 + 0.85 * 4 * 0.15) / (1 - 0.85 * 0.85);
  EXPECT_NEAR(s.at("hub"), hub, 1e-5);
}

TEST(TextRank, WindowLimitsLinks) {
  TextRankConfig cfg;
  cfg.window = 2;
  const auto s = textrank({{"a", "b", "c"}}, cfg);
  // path a - b - c: middle wins, ends tie
  EXPECT_GT(s.at("b"), s.at("a"));
  EXPECT_DOUBLE_EQ(s.at("a"), s.at("c"));
}

TEST(TextRank, IsolatedTokenGetsBaseScore) {
  const auto s = textrank({{"solo"}}, {});
  EXPECT_NEAR(s.at("solo"), 0.15, 1e-12);
}

TEST(TextRank, ScoresPositiveAndMatchDenseOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = testing::random_article(rng, 4, 3);
    const auto s = textrank(r.article.sentences, {});
    const auto oracle = testing::dense_textrank(r.article.sentences, 5, 0.85, 100, 1e-6);
    ASSERT_EQ(s.size(), oracle.size());
    for (const auto& [tok, v] : oracle) {
      EXPECT_NEAR(s.at(tok), v, 1e-6);
      EXPECT_GT(s.at(tok), 0.0);
      EXPECT_TRUE(std::isfinite(s.at(tok)));
    }
  }
}

TEST(TextRank, RejectsBadConfig) {
  TextRankConfig cfg;
  cfg.window = 1;
  EXPECT_THROW(textrank({{"a"}}, cfg), Error);
  cfg = {};
  cfg.damping = 1.0;
  EXPECT_THROW(textrank({{"a"}}, cfg), Error);
}

TEST(ExtractKeywords, LexiconHitComesFirst) {
  Article a;
  a.sentences = {{"zeta", "X", "alpha", "beta"}, {"alpha", "beta"}};
  const auto ks = extract_keywords(a, {"X", "missing"}, {});
  ASSERT_FALSE(ks.keywords.empty());
  EXPECT_EQ(ks.keywords.front(), "X");
  EXPECT_TRUE(std::isinf(ks.scores.at("X")));
  EXPECT_FALSE(ks.contains("missing"));
}

TEST(ExtractKeywords, EmptyArticle) {
  const auto ks = extract_keywords(Article{}, {}, {});
  EXPECT_TRUE(ks.keywords.empty());
}

TEST(ExtractKeywords, OrderingAndCap) {
  std::mt19937_64 rng(3);
  TextRankConfig cfg;
  cfg.top_k = 3;
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = testing::random_article(rng);
    const TokenSet lexicon = {"k0", "k1"};
    const auto ks = extract_keywords(r.article, lexicon, cfg);
    std::size_t hits = 0;
    for (const auto& k : ks.keywords) hits += lexicon.count(k);
    EXPECT_LE(ks.keywords.size(), cfg.top_k + hits);
    TokenSet seen;
    for (std::size_t i = 0; i < ks.keywords.size(); ++i) {
      EXPECT_TRUE(seen.insert(ks.keywords[i]).second) << "duplicate keyword";
      if (i > 0) {
        const double prev = ks.scores.at(ks.keywords[i - 1]);
        const double cur = ks.scores.at(ks.keywords[i]);
        EXPECT_TRUE(prev > cur || (prev == cur && ks.keywords[i - 1] < ks.keywords[i]));
      }
      bool present = std::count(r.article.title_tokens.begin(), r.article.title_tokens.end(), ks.keywords[i]) > 0;
      for (const auto& s : r.article.sentences) present = present || std::count(s.begin(), s.end(), ks.keywords[i]) > 0;
      EXPECT_TRUE(present);
    }
  }
}

TEST(ExtractKeywords, StopwordsAndPunctuationNeverCandidates) {
  Article a;
  a.sentences = {{"the", "cat", ",", "the", "dog", "\xE3\x80\x82"}};
  const auto ks = extract_keywords(a, {}, {}, {"the"});
  EXPECT_EQ(ks.keywords, (Tokens{"cat", "dog"}));
}

TEST(ExtractKeywords, IgnoresComments) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = testing::random_article(rng);
    const auto before = extract_keywords(r.article, {"k2"}, {});
    r.article.comments = {{"k2", "w1", "extra"}, {"zzz"}};
    const auto after = extract_keywords(r.article, {"k2"}, {});
    EXPECT_EQ(before.keywords, after.keywords);
  }
}

}  // namespace
}  // namespace g2s

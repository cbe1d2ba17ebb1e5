#include <gtest/gtest.h>

#include <random>

#include "g2s/topic_graph.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace g2s {
namespace {

KeywordSet kw(const Tokens& toks) {
  KeywordSet ks;
  for (const auto& t : toks) {
    ks.keywords.push_back(t);
    ks.scores[t] = 1.0;
  }
  return ks;
}

Article example_article() {
  Article a;
  a.title_tokens = {"t"};
  a.sentences = {{"x", "k1"}, {"k1", "y", "k2"}, {"z"}};
  return a;
}

TEST(BuildGraph, HandTracedExample) {
  const auto g = build_graph(example_article(), kw({"k1", "k2"}));
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.vertices[0].kind, VertexKind::kTitle);
  EXPECT_EQ(g.vertices[0].tokens, (Tokens{"t"}));
  EXPECT_EQ(g.vertices[1].keyword, "k1");
  EXPECT_EQ(g.vertices[1].sentence_ids, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(g.vertices[1].tokens, (Tokens{"k1", "x", "k1", "k1", "y", "k2"}));
  EXPECT_EQ(g.vertices[2].sentence_ids, (std::vector<std::size_t>{2}));
  EXPECT_EQ(g.vertices[3].kind, VertexKind::kEmpty);
  EXPECT_EQ(g.vertices[3].sentence_ids, (std::vector<std::size_t>{3}));
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.weight(1, 2), 1.0);
  EXPECT_EQ(g.weight(2, 1), 1.0);
}

TEST(BuildGraph, NoKeywords) {
  const auto g = build_graph(example_article(), kw({}));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.vertices[1].kind, VertexKind::kEmpty);
  EXPECT_EQ(g.vertices[1].sentence_ids, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(g.edges.empty());
}

TEST(BuildGraph, TitleKeywordCreatesTitleEdge) {
  auto a = example_article();
  a.title_tokens = {"t", "k1"};
  auto g = build_graph(a, kw({"k1", "k2"}));
  EXPECT_EQ(g.weight(0, 1), 1.0);
  EXPECT_EQ(g.vertices[1].sentence_ids.front(), kTitleSentence);

  GraphOptions isolated;
  isolated.isolate_title = true;
  g = build_graph(a, kw({"k1", "k2"}), isolated);
  EXPECT_EQ(g.weight(0, 1), 0.0);
}

TEST(BuildGraph, NoEmptyVertexWithoutOrphans) {
  Article a;
  a.sentences = {{"k1"}, {"k1", "b"}};
  const auto g = build_graph(a, kw({"k1"}));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.vertices.back().kind, VertexKind::kKeyword);
}

TEST(BuildGraph, TruncatesVertexTokens) {
  Article a;
  Tokens longs(150, "w");
  longs[0] = "k";
  a.sentences = {longs};
  GraphOptions opts;
  const auto g = build_graph(a, kw({"k"}), opts);
  EXPECT_EQ(g.vertices[1].tokens.size(), opts.max_vertex_tokens);
  EXPECT_EQ(g.vertices[1].tokens.front(), "k");
}

TEST(BuildGraph, MembershipAndWeightsMatchBruteForce) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = testing::random_article(rng);
    const auto g = build_graph(r.article, kw(r.keywords));
    // sentence id list: title, then content
    std::vector<Tokens> sents = {r.article.title_tokens};
    sents.insert(sents.end(), r.article.sentences.begin(), r.article.sentences.end());
    for (std::size_t sid = 1; sid < sents.size(); ++sid) {
      std::size_t m = 0;
      for (const auto& k : r.keywords) m += std::count(sents[sid].begin(), sents[sid].end(), k) > 0;
      std::size_t appearances = 0;
      bool in_empty = false;
      for (const auto& v : g.vertices) {
        const bool has = std::count(v.sentence_ids.begin(), v.sentence_ids.end(), sid) > 0;
        if (v.kind == VertexKind::kKeyword) appearances += has;
        if (v.kind == VertexKind::kEmpty) in_empty = has;
      }
      EXPECT_EQ(appearances, m);
      EXPECT_EQ(in_empty, m == 0);
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i == j) continue;
        double shared = 0;
        for (auto s : g.vertices[i].sentence_ids)
          shared += std::count(g.vertices[j].sentence_ids.begin(), g.vertices[j].sentence_ids.end(), s);
        EXPECT_EQ(g.weight(i, j), shared);
      }
  }
}

TEST(EdgeWeightTfidf, IdentityDisjointAndOracle) {
  CorpusStats st;
  st.documents = 4;
  st.df = {{"a", 1}, {"b", 3}, {"c", 2}};
  Vertex x, y, z;
  x.tokens = {"a", "b", "b"};
  y.tokens = {"b", "c"};
  z.tokens = {"q"};
  EXPECT_NEAR(edge_weight_tfidf(x, x, st), 1.0, 1e-12);
  EXPECT_EQ(edge_weight_tfidf(x, z, st), 0.0);
  Vertex ab, bc;
  ab.tokens = {"a", "b"};
  bc.tokens = {"b", "c"};
  EXPECT_NEAR(edge_weight_tfidf(ab, bc, st), testing::dense_tfidf_cosine(ab.tokens, bc.tokens, st.df, 4), 1e-12);
  EXPECT_NEAR(edge_weight_tfidf(x, y, st), testing::dense_tfidf_cosine(x.tokens, y.tokens, st.df, 4), 1e-12);
}

TEST(BuildGraph, TfidfStrategy) {
  const auto a = example_article();
  const auto st = CorpusStats::from_articles({a});
  GraphOptions opts;
  opts.strategy = EdgeStrategy::kTfidf;
  const auto g = build_graph(a, kw({"k1", "k2"}), opts, &st);
  for (const auto& [ij, w] : g.edges) {
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
    EXPECT_NEAR(w, edge_weight_tfidf(g.vertices[ij.first], g.vertices[ij.second], st), 1e-15);
  }
  EXPECT_GT(g.weight(1, 2), 0.0);
  EXPECT_THROW(build_graph(a, kw({"k1"}), opts, nullptr), Error);
}

TEST(NormalizedAdjacency, SingleVertex) {
  TopicGraph g;
  g.vertices.resize(1);
  const auto a = normalized_adjacency(g);
  EXPECT_EQ(a.data, (std::vector<double>{1.0}));
}

TEST(NormalizedAdjacency, TwoVerticesUnitEdge) {
  TopicGraph g;
  g.vertices.resize(2);
  g.edges[{0, 1}] = 1.0;
  const auto a = normalized_adjacency(g);
  for (double v : a.data) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(NormalizedAdjacency, SymmetricWithBoundedSpectrum) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    TopicGraph g;
    const std::size_t n = 1 + rng() % 10;
    g.vertices.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng() % 2) g.edges[{i, j}] = static_cast<double>(1 + rng() % 4);
    const auto a = normalized_adjacency(g);
    testing::Matrix m = testing::from_flat(a.data, n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(m[i][j], m[j][i]);
        EXPECT_GE(m[i][j], 0.0);
      }
    EXPECT_LE(testing::spectral_radius(m), 1.0 + 1e-9);
  }
}

TEST(ExportGraph, DotForTitleOnly) {
  const auto g = build_graph(Article{}, kw({}));
  const auto dot = export_graph(g, GraphFormat::kDot);
  EXPECT_NE(dot.find("label=\"Title\""), std::string::npos);
  EXPECT_EQ(std::count(dot.begin(), dot.end(), '['), 1);
}

TEST(ExportGraph, DotForExample) {
  const auto g = build_graph(example_article(), kw({"k1", "k2"}));
  const auto dot = export_graph(g, GraphFormat::kDot);
  EXPECT_EQ(std::count(dot.begin(), dot.end(), '['), 5);  // 4 nodes + 1 edge
  EXPECT_NE(dot.find("v1 -- v2 [label=\"1\"]"), std::string::npos) << dot;
}

TEST(ExportGraph, StructuredRoundTrip) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto r = testing::random_article(rng);
    const auto st = CorpusStats::from_articles({r.article});
    GraphOptions opts;
    opts.strategy = trial % 2 ? EdgeStrategy::kTfidf : EdgeStrategy::kStructural;
    const auto g = build_graph(r.article, kw(r.keywords), opts, &st);
    EXPECT_EQ(parse_structured_graph(export_graph(g, GraphFormat::kStructured)), g);
  }
}

TEST(ExportGraph, UnknownFormatAndMalformedInput) {
  EXPECT_THROW(graph_format_from_string("svg"), Error);
  EXPECT_THROW(parse_structured_graph("{\"vertices\":[]}"), DataError);
  EXPECT_THROW(parse_structured_graph("nope"), DataError);
}

}  // namespace
}  // namespace g2s

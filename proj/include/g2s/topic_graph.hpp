#pragma once

// Topic interaction graph: one vertex per keyword holding the sentences that
// mention it, a Title vertex, and an Empty vertex for sentences that mention no
// keyword. Edges are weighted by shared sentences (or tf-idf similarity).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "g2s/corpus.hpp"
#include "g2s/error.hpp"
#include "g2s/keywords.hpp"

namespace g2s {

enum class VertexKind { kTitle, kKeyword, kEmpty };

inline std::string to_string(VertexKind k) {
  switch (k) {
    case VertexKind::kTitle:
      return "title";
    case VertexKind::kKeyword:
      return "keyword";
    case VertexKind::kEmpty:
      return "empty";
  }
  return "?";
}

inline VertexKind vertex_kind_from_string(const std::string& s) {
  if (s == "title") return VertexKind::kTitle;
  if (s == "keyword") return VertexKind::kKeyword;
  if (s == "empty") return VertexKind::kEmpty;
  throw DataError("unknown vertex kind '" + s + "'");
}

// Sentence ids: 0 is the title, content sentence i is i + 1.
inline constexpr std::size_t kTitleSentence = 0;

struct Vertex {
  VertexKind kind = VertexKind::kKeyword;
  Token keyword;  // empty for Title/Empty
  Tokens tokens;  // keyword first for keyword vertices
  std::vector<std::size_t> sentence_ids;

  bool operator==(const Vertex&) const = default;
};

struct TopicGraph {
  std::vector<Vertex> vertices;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;  // i < j, w > 0
  std::size_t title_index = 0;

  std::size_t size() const { return vertices.size(); }

  double weight(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    auto it = edges.find({std::min(i, j), std::max(i, j)});
    return it == edges.end() ? 0.0 : it->second;
  }

  bool operator==(const TopicGraph&) const = default;
};

enum class EdgeStrategy { kStructural, kTfidf };

inline std::string to_string(EdgeStrategy s) { return s == EdgeStrategy::kStructural ? "structural" : "tfidf"; }

inline EdgeStrategy edge_strategy_from_string(const std::string& s) {
  if (s == "structural") return EdgeStrategy::kStructural;
  if (s == "tfidf") return EdgeStrategy::kTfidf;
  throw Error("unknown edge strategy '" + s + "'");
}

struct GraphOptions {
  std::size_t max_vertex_tokens = 100;
  bool isolate_title = false;  // keep the title sentence out of keyword vertices
  EdgeStrategy strategy = EdgeStrategy::kStructural;
};

/// Document frequencies over articles (title + content, one count per article).
struct CorpusStats {
  std::size_t documents = 0;
  std::map<Token, std::size_t> df;

  static CorpusStats from_articles(const std::vector<Article>& articles) {
    CorpusStats st;
    for (const auto& a : articles) {
      std::set<Token> seen(a.title_tokens.begin(), a.title_tokens.end());
      for (const auto& s : a.sentences) seen.insert(s.begin(), s.end());
      for (const auto& t : seen) ++st.df[t];
      ++st.documents;
    }
    return st;
  }

  double idf(const Token& t) const {
    auto it = df.find(t);
    const double n = it == df.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(documents)) / (1.0 + n)) + 1.0;
  }
};

/// Cosine similarity of raw-count tf x smoothed idf vectors.
inline double edge_weight_tfidf(const Vertex& a, const Vertex& b, const CorpusStats& stats) {
  std::map<Token, double> ta, tb;
  for (const auto& t : a.tokens) ta[t] += 1.0;
  for (const auto& t : b.tokens) tb[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [t, c] : ta) {
    c *= stats.idf(t);
    na += c * c;
  }
  for (auto& [t, c] : tb) {
    c *= stats.idf(t);
    nb += c * c;
    if (auto it = ta.find(t); it != ta.end()) dot += it->second * c;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

inline TopicGraph build_graph(const Article& article, const KeywordSet& kws, const GraphOptions& opts = {},
                              const CorpusStats* stats = nullptr) {
  // sentence id -> tokens
  std::vector<const Tokens*> sent;
  sent.push_back(&article.title_tokens);
  for (const auto& s : article.sentences) sent.push_back(&s);

  TopicGraph g;
  g.title_index = 0;
  Vertex title;
  title.kind = VertexKind::kTitle;
  title.sentence_ids = {kTitleSentence};
  g.vertices.push_back(std::move(title));

  std::vector<std::set<Token>> sent_sets;
  for (const auto* s : sent) sent_sets.emplace_back(s->begin(), s->end());

  std::vector<bool> assigned(sent.size(), false);
  for (const auto& k : kws.keywords) {
    Vertex v;
    v.kind = VertexKind::kKeyword;
    v.keyword = k;
    for (std::size_t sid = 0; sid < sent.size(); ++sid) {
      if (sid == kTitleSentence && opts.isolate_title) continue;
      if (sent_sets[sid].count(k)) {
        v.sentence_ids.push_back(sid);
        assigned[sid] = true;
      }
    }
    g.vertices.push_back(std::move(v));
  }
  Vertex empty;
  empty.kind = VertexKind::kEmpty;
  for (std::size_t sid = 1; sid < sent.size(); ++sid)
    if (!assigned[sid]) empty.sentence_ids.push_back(sid);
  if (!empty.sentence_ids.empty()) g.vertices.push_back(std::move(empty));

  for (auto& v : g.vertices) {
    if (v.kind == VertexKind::kKeyword) v.tokens.push_back(v.keyword);
    for (std::size_t sid : v.sentence_ids) {
      for (const auto& t : *sent[sid]) {
        if (v.tokens.size() >= opts.max_vertex_tokens) break;
        v.tokens.push_back(t);
      }
    }
    if (v.tokens.size() > opts.max_vertex_tokens) v.tokens.resize(opts.max_vertex_tokens);
  }

  const std::size_t n = g.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = 0.0;
      if (opts.strategy == EdgeStrategy::kStructural) {
        const auto& a = g.vertices[i].sentence_ids;
        const auto& b = g.vertices[j].sentence_ids;
        std::vector<std::size_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        w = static_cast<double>(common.size());
      } else {
        if (!stats) throw Error("tf-idf edge strategy needs corpus statistics");
        w = edge_weight_tfidf(g.vertices[i], g.vertices[j], *stats);
      }
      if (w > 0.0) g.edges.emplace(std::make_pair(i, j), w);
    }
  }
  return g;
}

/// Dense row-major N x N matrix D^-1/2 (A + I) D^-1/2.
struct NormalizedAdjacency {
  std::size_t n = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

inline NormalizedAdjacency normalized_adjacency(const TopicGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
  for (const auto& [ij, w] : g.edges) {
    a[ij.first * n + ij.second] += w;
    a[ij.second * n + ij.first] += w;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += a[i * n + j];
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  NormalizedAdjacency out{n, std::move(a)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
  return out;
}

enum class GraphFormat { kDot, kStructured };

inline GraphFormat graph_format_from_string(const std::string& s) {
  if (s == "dot") return GraphFormat::kDot;
  if (s == "structured" || s == "json") return GraphFormat::kStructured;
  throw Error("unknown graph format '" + s + "'");
}

namespace detail {

inline std::string format_weight(double w) {
  std::ostringstream os;
  os << std::setprecision(6) << w;
  return os.str();
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline nlohmann::json graph_to_json(const TopicGraph& g) {
  nlohmann::json j;
  j["title_index"] = g.title_index;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : g.vertices) {
    j["vertices"].push_back({{"kind", to_string(v.kind)},
                             {"keyword", v.keyword},
                             {"tokens", v.tokens},
                             {"sentence_ids", v.sentence_ids}});
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [ij, w] : g.edges) j["edges"].push_back({ij.first, ij.second, w});
  return j;
}

inline TopicGraph graph_from_json(const nlohmann::json& j) {
  try {
    TopicGraph g;
    g.title_index = j.at("title_index").get<std::size_t>();
    for (const auto& jv : j.at("vertices")) {
      Vertex v;
      v.kind = vertex_kind_from_string(jv.at("kind").get<std::string>());
      v.keyword = jv.at("keyword").get<std::string>();
      v.tokens = jv.at("tokens").get<Tokens>();
      v.sentence_ids = jv.at("sentence_ids").get<std::vector<std::size_t>>();
      g.vertices.push_back(std::move(v));
    }
    for (const auto& je : j.at("edges")) {
      auto i = je.at(0).get<std::size_t>();
      auto k = je.at(1).get<std::size_t>();
      if (i >= k || k >= g.vertices.size()) throw DataError("bad edge endpoints");
      g.edges.emplace(std::make_pair(i, k), je.at(2).get<double>());
    }
    if (g.title_index >= g.vertices.size()) throw DataError("title_index out of range");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph: ") + e.what());
  }
}

inline std::string export_graph(const TopicGraph& g, GraphFormat fmt) {
  if (fmt == GraphFormat::kStructured) return graph_to_json(g).dump();
  std::ostringstream os;
  os << "graph topic {\n";
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    std::string label = v.kind == VertexKind::kKeyword ? v.keyword : (v.kind == VertexKind::kTitle ? "Title" : "Empty");
    os << "  v" << i << " [label=\"" << detail::dot_escape(label) << "\"";
    if (v.kind != VertexKind::kKeyword) os << ", shape=box";
    os << "];\n";
  }
  for (const auto& [ij, w] : g.edges) {
    os << "  v" << ij.first << " -- v" << ij.second << " [label=\"" << detail::format_weight(w) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

inline TopicGraph parse_structured_graph(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed graph: ") + e.what());
  }
  return graph_from_json(j);
}

}  // namespace g2s

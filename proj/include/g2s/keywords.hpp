#pragma once

// Keyword set for an article: verbatim lexicon hits (stand-in for named
// entities) followed by the top TextRank tokens.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "g2s/corpus.hpp"
#include "g2s/error.hpp"
#include "g2s/utf8.hpp"

namespace g2s {

struct TextRankConfig {
  std::size_t window = 5;
  double damping = 0.85;
  std::size_t max_iters = 100;
  double tol = 1e-6;
  std::size_t top_k = 10;

  void validate() const {
    if (window < 2) throw Error("TextRank window must be >= 2");
    if (!(damping > 0.0 && damping < 1.0)) throw Error("TextRank damping must lie in (0, 1)");
    if (!(tol > 0.0)) throw Error("TextRank tolerance must be > 0");
  }
};

struct KeywordSet {
  Tokens keywords;                       // descending score, ties lexicographic
  std::map<Token, double> scores;        // lexicon hits score +inf

  bool contains(const Token& t) const { return scores.count(t) != 0; }
};

using CandidateFilter = std::function<bool(const Token&)>;

/// Co-occurrence graph: two candidate tokens are linked when they appear fewer
/// than `window` positions apart in one sentence. Scores follow
/// S(v) = (1 - d) + d * sum_{u in N(v)} S(u) / deg(u), updated synchronously from
/// S = 1 until the largest change drops below tol or max_iters is reached.
inline std::map<Token, double> textrank(const std::vector<Tokens>& sentences, const TextRankConfig& cfg,
                                        const CandidateFilter& is_candidate = {}) {
  cfg.validate();
  std::map<Token, std::set<Token>> adj;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (is_candidate && !is_candidate(s[i])) continue;
      adj[s[i]];
      for (std::size_t j = i + 1; j < s.size() && j - i < cfg.window; ++j) {
        if (s[j] == s[i] || (is_candidate && !is_candidate(s[j]))) continue;
        adj[s[i]].insert(s[j]);
        adj[s[j]].insert(s[i]);
      }
    }
  }
  if (adj.empty()) return {};

  std::vector<Token> nodes;
  std::map<Token, std::size_t> index;
  for (const auto& [tok, nbrs] : adj) {
    index.emplace(tok, nodes.size());
    nodes.push_back(tok);
  }
  std::vector<std::vector<std::size_t>> nbr(nodes.size());
  for (std::size_t v = 0; v < nodes.size(); ++v)
    for (const auto& u : adj[nodes[v]]) nbr[v].push_back(index[u]);

  std::vector<double> score(nodes.size(), 1.0), next(nodes.size());
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    double delta = 0.0;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      double acc = 0.0;
      for (std::size_t u : nbr[v]) acc += score[u] / static_cast<double>(nbr[u].size());
      next[v] = (1.0 - cfg.damping) + cfg.damping * acc;
      delta = std::max(delta, std::abs(next[v] - score[v]));
    }
    score.swap(next);
    if (delta < cfg.tol) break;
  }

  std::map<Token, double> out;
  for (std::size_t v = 0; v < nodes.size(); ++v) out.emplace(nodes[v], score[v]);
  return out;
}

inline bool score_order(const std::pair<Token, double>& a, const std::pair<Token, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

/// Lexicon hits found in the title or content, then the top_k TextRank tokens
/// among non-stop-word, non-punctuation tokens. Comments are never consulted.
inline KeywordSet extract_keywords(const Article& article, const TokenSet& lexicon, const TextRankConfig& cfg,
                                   const TokenSet& stopwords = {}) {
  std::vector<Tokens> text;
  if (!article.title_tokens.empty()) text.push_back(article.title_tokens);
  text.insert(text.end(), article.sentences.begin(), article.sentences.end());

  KeywordSet ks;
  std::set<Token> hits;
  for (const auto& s : text)
    for (const auto& t : s)
      if (lexicon.count(t)) hits.insert(t);
  for (const auto& h : hits) {
    ks.keywords.push_back(h);
    ks.scores.emplace(h, std::numeric_limits<double>::infinity());
  }

  auto candidate = [&](const Token& t) {
    return !stopwords.count(t) && !utf8::is_punctuation_token(t) && !Vocab::is_special(t);
  };
  const auto tr = textrank(text, cfg, candidate);
  std::vector<std::pair<Token, double>> ranked;
  for (const auto& [tok, s] : tr)
    if (!hits.count(tok)) ranked.emplace_back(tok, s);
  std::sort(ranked.begin(), ranked.end(), score_order);
  for (std::size_t i = 0; i < ranked.size() && i < cfg.top_k; ++i) {
    ks.keywords.push_back(ranked[i].first);
    ks.scores.emplace(ranked[i].first, ranked[i].second);
  }
  return ks;
}

}  // namespace g2s

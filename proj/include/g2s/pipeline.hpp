#pragma once

// Article -> keywords -> topic graph -> model inputs, plus the mapping between
// comment tokens and (extended) vocabulary ids.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "g2s/config.hpp"
#include "g2s/corpus.hpp"
#include "g2s/keywords.hpp"
#include "g2s/model.hpp"
#include "g2s/topic_graph.hpp"

namespace g2s {

struct PreparedArticle {
  KeywordSet keywords;
  TopicGraph graph;
  EncodedGraph encoded;
};

class Preprocessor {
 public:
  Preprocessor(Vocab vocab, PipelineConfig cfg, TokenSet lexicon = {}, TokenSet stopwords = {},
               CorpusStats stats = {})
      : vocab_(std::move(vocab)),
        cfg_(std::move(cfg)),
        lexicon_(std::move(lexicon)),
        stopwords_(std::move(stopwords)),
        stats_(std::move(stats)) {}

  const Vocab& vocab() const { return vocab_; }
  const PipelineConfig& config() const { return cfg_; }
  const TokenSet& lexicon() const { return lexicon_; }
  const TokenSet& stopwords() const { return stopwords_; }
  const CorpusStats& stats() const { return stats_; }

  KeywordSet keywords(const Article& a) const { return extract_keywords(a, lexicon_, cfg_.textrank, stopwords_); }

  TopicGraph graph(const Article& a, const KeywordSet& ks) const { return build_graph(a, ks, cfg_.graph, &stats_); }

  EncodedGraph encode(const TopicGraph& g) const {
    EncodedGraph e;
    e.title_index = g.title_index;
    e.adjacency = normalized_adjacency(g);
    const std::size_t v = vocab_.size();
    std::map<Token, std::size_t> ext;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& vert = g.vertices[i];
      e.vertex_ids.push_back(vocab_.encode(vert.tokens));
      e.keyword_first.push_back(vert.kind == VertexKind::kKeyword);
      if (vert.kind != VertexKind::kKeyword) continue;
      std::size_t id = 0;
      if (vocab_.contains(vert.keyword)) {
        id = static_cast<std::size_t>(vocab_.encode(vert.keyword));
      } else {
        auto [it, inserted] = ext.emplace(vert.keyword, v + e.ext_tokens.size());
        if (inserted) e.ext_tokens.push_back(vert.keyword);
        id = it->second;
      }
      e.copy.vertices.push_back(i);
      e.copy.ids.push_back(id);
    }
    e.copy.ext_vocab_size = v + e.ext_tokens.size();
    return e;
  }

  PreparedArticle prepare(const Article& a) const {
    PreparedArticle p;
    p.keywords = keywords(a);
    p.graph = graph(a, p.keywords);
    p.encoded = encode(p.graph);
    return p;
  }

  /// Extended ids of a comment followed by EOS. Out-of-vocabulary tokens that
  /// are copyable keywords keep their extended id; others become UNK.
  std::vector<std::size_t> target_ids(const Tokens& comment, const EncodedGraph& g) const {
    std::vector<std::size_t> out;
    for (const auto& tok : comment) {
      if (vocab_.contains(tok)) {
        out.push_back(static_cast<std::size_t>(vocab_.encode(tok)));
        continue;
      }
      std::size_t id = static_cast<std::size_t>(Vocab::kUnk);
      for (std::size_t k = 0; k < g.ext_tokens.size(); ++k)
        if (g.ext_tokens[k] == tok) id = vocab_.size() + k;
      out.push_back(id);
    }
    out.push_back(static_cast<std::size_t>(Vocab::kEos));
    return out;
  }

  Tokens decode(const std::vector<std::size_t>& ids, const EncodedGraph& g) const {
    Tokens out;
    for (std::size_t id : ids) {
      if (id < vocab_.size()) {
        out.push_back(vocab_.decode(static_cast<TokenId>(id)));
      } else if (id - vocab_.size() < g.ext_tokens.size()) {
        out.push_back(g.ext_tokens[id - vocab_.size()]);
      } else {
        out.push_back(vocab_.decode(Vocab::kUnk));
      }
    }
    return out;
  }

 private:
  Vocab vocab_;
  PipelineConfig cfg_;
  TokenSet lexicon_;
  TokenSet stopwords_;
  CorpusStats stats_;
};

}  // namespace g2s

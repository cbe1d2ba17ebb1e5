#pragma once

// Vertex encoder (word + positional embeddings under a stack of multi-head
// self-attention, read out at the keyword slot) and the residual GCN graph
// encoder that produces per-vertex outputs and the decoder's initial state.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "g2s/autodiff.hpp"
#include "g2s/config.hpp"
#include "g2s/corpus.hpp"
#include "g2s/topic_graph.hpp"

namespace g2s {

using ad::Parameter;
using ad::ParamStore;
using ad::Shape;
using ad::Tape;
using ad::Var;

template <class T>
class VertexEncoder {
 public:
  VertexEncoder(const VertexEncoderConfig& cfg, ParamStore<T>& store, std::size_t vocab_size) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.embed_dim, dh = d / cfg_.heads;
    word_ = &store.add("embed.word", {vocab_size, d});
    pos_ = &store.add("embed.pos", {cfg_.max_positions, d});
    layers_.resize(cfg_.layers);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      for (std::size_t h = 0; h < cfg_.heads; ++h) {
        const std::string p = "sa." + std::to_string(l) + "." + std::to_string(h) + ".";
        layers_[l].wq.push_back(&store.add(p + "Wq", {d, dh}));
        layers_[l].wk.push_back(&store.add(p + "Wk", {d, dh}));
        layers_[l].wv.push_back(&store.add(p + "Wv", {d, dh}));
      }
      layers_[l].wo = &store.add("sa." + std::to_string(l) + ".Wo", {d, d});
    }
  }

  const VertexEncoderConfig& config() const { return cfg_; }
  Parameter<T>& word_embedding() { return *word_; }

  /// e_i + p_i. With keyword_first the leading token takes position 0 and the
  /// rest positions 1..L-1; otherwise every token is a regular word at 1..L.
  Var<T> embed(Tape<T>& t, const std::vector<TokenId>& ids, bool keyword_first) {
    std::vector<std::size_t> words, positions;
    if (ids.empty()) {
      words.push_back(static_cast<std::size_t>(Vocab::kUnk));
    } else {
      for (TokenId id : ids) words.push_back(static_cast<std::size_t>(id));
    }
    for (std::size_t i = 0; i < words.size(); ++i) positions.push_back(keyword_first ? i : i + 1);
    return ad::add(ad::gather_rows(t, *word_, words), ad::gather_rows(t, *pos_, positions));
  }

  /// Stacked multi-head self-attention with Q = K = V = previous layer output.
  Var<T> self_attention(Tape<T>& t, Var<T> x) {
    const std::size_t dh = cfg_.embed_dim / cfg_.heads;
    const T scale = cfg_.scaled_scores ? T(1) / std::sqrt(static_cast<T>(dh)) : T(1);
    for (auto& layer : layers_) {
      std::vector<Var<T>> heads;
      for (std::size_t h = 0; h < cfg_.heads; ++h) {
        auto q = ad::matmul(x, t.param(*layer.wq[h]));
        auto k = ad::matmul(x, t.param(*layer.wk[h]));
        auto v = ad::matmul(x, t.param(*layer.wv[h]));
        auto scores = ad::matmul(q, ad::transpose(k));
        if (scale != T(1)) scores = ad::scale(scores, scale);
        heads.push_back(ad::matmul(ad::softmax(scores), v));
      }
      x = ad::matmul(ad::concat_cols(heads), t.param(*layer.wo));
    }
    return x;
  }

  /// Keyword-slot (row 0) output of the last layer, 1 x d.
  Var<T> encode(Tape<T>& t, const std::vector<TokenId>& ids, bool keyword_first, double dropout = 0.0) {
    auto x = ad::dropout(embed(t, ids, keyword_first), dropout);
    return ad::slice_rows(self_attention(t, x), 0, 1);
  }

 private:
  struct Layer {
    std::vector<Parameter<T>*> wq, wk, wv;
    Parameter<T>* wo = nullptr;
  };

  VertexEncoderConfig cfg_;
  Parameter<T>* word_ = nullptr;
  Parameter<T>* pos_ = nullptr;
  std::vector<Layer> layers_;
};

template <class T>
struct GraphEncoding {
  Var<T> g_out;  // N x d
  Var<T> t0;     // 1 x d
};

template <class T>
class GraphEncoder {
 public:
  GraphEncoder(const GcnConfig& cfg, ParamStore<T>& store) : cfg_(cfg) {
    const std::size_t d = cfg_.hidden_dim;
    for (std::size_t l = 0; l < cfg_.layers; ++l) w_.push_back(&store.add("gcn." + std::to_string(l) + ".W", {d, d}));
    wo_ = &store.add("gcn.Wo", {d, d});
  }

  const GcnConfig& config() const { return cfg_; }

  /// H^{l+1} = act(Â H^l W^l), g = H^K + H^{K-1}, g_out = tanh(g Wo).
  GraphEncoding<T> encode(Tape<T>& t, Var<T> vertices, const NormalizedAdjacency& adj, std::size_t title_index) {
    const std::size_t n = vertices.rows();
    if (adj.n != n) {
      throw ShapeError("adjacency is " + std::to_string(adj.n) + "x" + std::to_string(adj.n) + " but there are " +
                       std::to_string(n) + " vertex rows");
    }
    if (title_index >= n) throw ShapeError("title index out of range");
    std::vector<T> a(adj.data.begin(), adj.data.end());
    auto a_hat = t.constant({n, n}, std::move(a));
    Var<T> h = vertices;
    Var<T> prev = vertices;
    for (auto* w : w_) {
      auto z = ad::matmul(ad::matmul(a_hat, h), t.param(*w));
      prev = h;
      h = cfg_.activation == Activation::kRelu ? ad::relu(z) : ad::tanh(z);
    }
    auto g = ad::add(h, prev);
    auto g_out = ad::tanh(ad::matmul(g, t.param(*wo_)));
    Var<T> t0;
    switch (cfg_.pooling) {
      case Pooling::kTitle:
        t0 = ad::slice_rows(g_out, title_index, 1);
        break;
      case Pooling::kMax:
        t0 = ad::max_rows(g_out);
        break;
      case Pooling::kMean:
        t0 = ad::mean_rows(g_out);
        break;
    }
    return {g_out, t0};
  }

 private:
  GcnConfig cfg_;
  std::vector<Parameter<T>*> w_;
  Parameter<T>* wo_ = nullptr;
};

}  // namespace g2s

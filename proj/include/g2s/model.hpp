#pragma once

// The full graph-to-sequence model: vertex encoder -> GCN -> copy decoder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "g2s/autodiff.hpp"
#include "g2s/config.hpp"
#include "g2s/corpus.hpp"
#include "g2s/decoder.hpp"
#include "g2s/encoders.hpp"
#include "g2s/search.hpp"
#include "g2s/topic_graph.hpp"

namespace g2s {

/// Model-ready view of one topic graph.
struct EncodedGraph {
  std::vector<std::vector<TokenId>> vertex_ids;
  std::vector<bool> keyword_first;  // true for keyword vertices
  NormalizedAdjacency adjacency;
  std::size_t title_index = 0;
  CopyTargets copy;
  std::vector<Token> ext_tokens;  // tokens for ids vocab_size, vocab_size + 1, ...

  std::size_t size() const { return vertex_ids.size(); }
};

/// -(1/T) sum_t log p_t(target_t), probabilities floored at 1e-12.
template <class T>
Var<T> nll_loss(const std::vector<Var<T>>& p_rows, const std::vector<std::size_t>& targets) {
  if (p_rows.size() != targets.size() || targets.empty()) {
    throw ShapeError("nll_loss needs one distribution per target (" + std::to_string(p_rows.size()) + " vs " +
                     std::to_string(targets.size()) + ")");
  }
  std::vector<Var<T>> logs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    logs.push_back(ad::log_floor(ad::element(p_rows[i], 0, targets[i]), static_cast<T>(kProbFloor)));
  }
  return ad::scale(ad::sum(ad::concat_cols(logs)), T(-1) / static_cast<T>(targets.size()));
}

template <class T>
class Graph2Seq {
 public:
  Graph2Seq(const ModelConfig& cfg, std::size_t vocab_size)
      : cfg_(validated(cfg)),
        vocab_size_(vocab_size),
        vertex_(cfg_.encoder, params_, vocab_size),
        graph_(cfg_.gcn, params_),
        decoder_(cfg_.decoder, params_, vocab_size, cfg_.encoder.embed_dim, cfg_.gcn.hidden_dim,
                 vertex_.word_embedding()) {}

  Graph2Seq(const Graph2Seq&) = delete;
  Graph2Seq& operator=(const Graph2Seq&) = delete;

  const ModelConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  VertexEncoder<T>& vertex_encoder() { return vertex_; }
  GraphEncoder<T>& graph_encoder() { return graph_; }
  const Decoder<T>& decoder() const { return decoder_; }

  /// Glorot-uniform matrices, uniform(-0.1, 0.1) embeddings, zero biases with
  /// LSTM forget-gate bias 1.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : params_) {
      const bool is_bias = p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0;
      if (is_bias) {
        std::fill(p.value.begin(), p.value.end(), T(0));
        if (p.name.rfind("dec.lstm.", 0) == 0) {
          const std::size_t hd = p.shape.cols / 4;
          std::fill(p.value.begin() + static_cast<std::ptrdiff_t>(hd),
                    p.value.begin() + static_cast<std::ptrdiff_t>(2 * hd), T(1));
        }
        continue;
      }
      double bound = 0.1;
      if (p.name.rfind("embed.", 0) != 0) {
        bound = std::sqrt(6.0 / static_cast<double>(p.shape.rows + p.shape.cols));
      }
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : p.value) v = static_cast<T>(dist(rng));
    }
  }

  /// Vertex rows (N x d) from the vertex encoder.
  Var<T> encode_vertices(Tape<T>& t, const EncodedGraph& g, double dropout = 0.0) {
    std::vector<Var<T>> rows;
    for (std::size_t i = 0; i < g.size(); ++i) rows.push_back(vertex_.encode(t, g.vertex_ids[i], g.keyword_first[i], dropout));
    return ad::concat_rows(rows);
  }

  GraphEncoding<T> encode(Tape<T>& t, const EncodedGraph& g, double dropout = 0.0) {
    if (g.size() == 0) throw ShapeError("graph has no vertices");
    return graph_.encode(t, encode_vertices(t, g, dropout), g.adjacency, g.title_index);
  }

  TokenId feed_id(std::size_t ext_id) const {
    return ext_id < vocab_size_ ? static_cast<TokenId>(ext_id) : Vocab::kUnk;
  }

  /// Teacher-forced steps: inputs BOS, target_0 .. target_{T-2}.
  std::vector<StepOutput<T>> teacher_forced(Tape<T>& t, const EncodedGraph& g, const std::vector<std::size_t>& targets) {
    const double drop = t.training() ? cfg_.dropout : 0.0;
    auto enc = encode(t, g, drop);
    auto state = decoder_.initial_state(t, enc.t0);
    std::vector<StepOutput<T>> steps;
    TokenId prev = Vocab::kBos;
    for (std::size_t target : targets) {
      steps.push_back(decoder_.step(t, state, prev, enc.g_out, g.copy, drop));
      state = steps.back().state;
      prev = feed_id(target);
    }
    return steps;
  }

  /// Mean negative log-likelihood of targets (extended ids, EOS included).
  Var<T> loss(Tape<T>& t, const EncodedGraph& g, const std::vector<std::size_t>& targets) {
    auto steps = teacher_forced(t, g, targets);
    std::vector<Var<T>> p;
    for (const auto& s : steps) p.push_back(s.p);
    return nll_loss(p, targets);
  }

  /// Step model for search: each step runs on its own short-lived tape so
  /// memory stays flat regardless of output length or beam width.
  class StepModel {
   public:
    struct State {
      std::vector<std::vector<T>> h, c;
    };

    StepModel(Graph2Seq& model, const EncodedGraph& g) : model_(model), graph_(g) {
      Tape<T> t;
      auto enc = model_.encode(t, g);
      g_shape_ = enc.g_out.shape();
      g_out_.assign(enc.g_out.value().begin(), enc.g_out.value().end());
      t0_.assign(enc.t0.value().begin(), enc.t0.value().end());
    }

    State initial() const {
      State s;
      const std::size_t layers = model_.cfg_.decoder.rnn_layers;
      s.h.assign(layers, t0_);
      s.c.assign(layers, std::vector<T>(t0_.size(), T(0)));
      return s;
    }

    std::vector<double> next(State& s, std::size_t prev) {
      Tape<T> t;
      const std::size_t hd = t0_.size();
      DecoderState<T> ds;
      for (std::size_t l = 0; l < s.h.size(); ++l) {
        ds.h.push_back(t.constant({1, hd}, s.h[l]));
        ds.c.push_back(t.constant({1, hd}, s.c[l]));
      }
      auto g_out = t.constant(g_shape_, g_out_);
      auto out = model_.decoder_.step(t, ds, model_.feed_id(prev), g_out, graph_.copy);
      for (std::size_t l = 0; l < s.h.size(); ++l) {
        s.h[l].assign(out.state.h[l].value().begin(), out.state.h[l].value().end());
        s.c[l].assign(out.state.c[l].value().begin(), out.state.c[l].value().end());
      }
      auto p = out.p.value();
      return {p.begin(), p.end()};
    }

   private:
    Graph2Seq& model_;
    const EncodedGraph& graph_;
    Shape g_shape_;
    std::vector<T> g_out_;
    std::vector<T> t0_;
  };

  Hypothesis greedy_decode(const EncodedGraph& g, std::size_t max_len) {
    StepModel sm(*this, g);
    return greedy_search(sm, Vocab::kBos, Vocab::kEos, max_len);
  }

  Hypothesis beam_decode(const EncodedGraph& g, std::size_t beam_size, std::size_t max_len) {
    if (beam_size == 0) throw Error("beam_size must be >= 1");
    StepModel sm(*this, g);
    return beam_search(sm, Vocab::kBos, Vocab::kEos, beam_size, max_len);
  }

  Hypothesis decode(const EncodedGraph& g, std::size_t beam_size, std::size_t max_len) {
    return beam_size <= 1 ? greedy_decode(g, max_len) : beam_decode(g, beam_size, max_len);
  }

 private:
  static const ModelConfig& validated(const ModelConfig& c) {
    c.validate();
    return c;
  }

  ModelConfig cfg_;
  std::size_t vocab_size_;
  ParamStore<T> params_;
  VertexEncoder<T> vertex_;
  GraphEncoder<T> graph_;
  Decoder<T> decoder_;
};

}  // namespace g2s

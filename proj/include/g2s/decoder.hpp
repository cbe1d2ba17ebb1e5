#pragma once

// Stacked-LSTM attention decoder with a copy path onto the keyword vertices.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "g2s/autodiff.hpp"
#include "g2s/config.hpp"
#include "g2s/corpus.hpp"
#include "g2s/encoders.hpp"

namespace g2s {

/// Which vertices can be copied and the (extended) vocabulary id each one emits.
/// Out-of-vocabulary keywords get ids >= vocab size.
struct CopyTargets {
  std::vector<std::size_t> vertices;
  std::vector<std::size_t> ids;
  std::size_t ext_vocab_size = 0;

  bool empty() const { return vertices.empty(); }
};

template <class T>
struct DecoderState {
  std::vector<Var<T>> h;  // per layer, 1 x H
  std::vector<Var<T>> c;
};

template <class T>
struct StepOutput {
  DecoderState<T> state;
  Var<T> t;          // top-layer hidden state
  Var<T> context;    // attention-weighted vertex outputs
  Var<T> y;          // vocabulary distribution, 1 x V
  Var<T> alpha;      // attention over all vertices, 1 x N
  Var<T> alpha_map;  // keyword attention mapped onto the extended vocabulary
  Var<T> p_copy;     // 1 x 1
  Var<T> p;          // merged distribution, 1 x ext_vocab_size
};

/// (1 - p_copy) * y + p_copy * alpha_map, y zero-padded to the extended vocabulary.
template <class T>
Var<T> merge_copy(const Var<T>& y, const Var<T>& alpha_map, const Var<T>& p_copy) {
  auto y_ext = ad::pad_cols(y, alpha_map.cols());
  return ad::add(ad::scale_by(y_ext, ad::affine(p_copy, T(-1), T(1))), ad::scale_by(alpha_map, p_copy));
}

template <class T>
class Decoder {
 public:
  Decoder(const DecoderConfig& cfg, ParamStore<T>& store, std::size_t vocab_size, std::size_t input_dim,
          std::size_t graph_dim, Parameter<T>& word_embedding)
      : cfg_(cfg), vocab_size_(vocab_size), embed_(&word_embedding) {
    const std::size_t hd = cfg_.hidden_dim;
    for (std::size_t l = 0; l < cfg_.rnn_layers; ++l) {
      const std::size_t in = l == 0 ? input_dim : hd;
      const std::string p = "dec.lstm." + std::to_string(l) + ".";
      lstm_w_.push_back(&store.add(p + "W", {in + hd, 4 * hd}));
      lstm_b_.push_back(&store.add(p + "b", {1, 4 * hd}));
    }
    if (cfg_.attention == AttentionKind::kBilinear) {
      wa_ = &store.add("dec.attn.Wa", {hd, graph_dim});
    } else {
      wa_ = &store.add("dec.attn.Wt", {hd, hd});
      wg_ = &store.add("dec.attn.Wg", {graph_dim, hd});
      va_ = &store.add("dec.attn.v", {hd, 1});
    }
    w_ = &store.add("dec.W", {hd + graph_dim, hd});
    b_ = &store.add("dec.b", {1, hd});
    wout_ = &store.add("dec.Wout", {hd, vocab_size});
    wcopy_ = &store.add("dec.Wcopy", {hd + graph_dim, 1});
  }

  const DecoderConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }

  /// Every layer starts from t0 with a zero cell state.
  DecoderState<T> initial_state(Tape<T>& t, const Var<T>& t0) const {
    DecoderState<T> s;
    for (std::size_t l = 0; l < cfg_.rnn_layers; ++l) {
      s.h.push_back(t0);
      s.c.push_back(t.zeros({1, cfg_.hidden_dim}));
    }
    return s;
  }

  /// Attention scores over vertex outputs, 1 x N.
  Var<T> scores(Tape<T>& t, const Var<T>& state, const Var<T>& g_out) const {
    if (cfg_.attention == AttentionKind::kBilinear) {
      return ad::matmul(ad::matmul(state, t.param(*wa_)), ad::transpose(g_out));
    }
    auto hidden = ad::tanh(ad::add(ad::matmul(g_out, t.param(*wg_)), ad::matmul(state, t.param(*wa_))));
    return ad::transpose(ad::matmul(hidden, t.param(*va_)));
  }

  /// alpha = softmax(scores), context = alpha * g_out.
  std::pair<Var<T>, Var<T>> attend(Tape<T>& t, const Var<T>& state, const Var<T>& g_out) const {
    auto alpha = ad::softmax(scores(t, state, g_out));
    return {alpha, ad::matmul(alpha, g_out)};
  }

  /// One decoding step. prev is fed through the shared embedding table and must
  /// already be an in-vocabulary id (copied out-of-vocabulary words come back as UNK).
  StepOutput<T> step(Tape<T>& t, const DecoderState<T>& prev_state, TokenId prev, const Var<T>& g_out,
                     const CopyTargets& copy, double dropout = 0.0) const {
    if (prev < 0 || static_cast<std::size_t>(prev) >= vocab_size_) {
      throw ShapeError("decoder input id " + std::to_string(prev) + " outside the vocabulary");
    }
    StepOutput<T> out;
    Var<T> x = ad::dropout(ad::gather_rows(t, *embed_, {static_cast<std::size_t>(prev)}), dropout);
    for (std::size_t l = 0; l < cfg_.rnn_layers; ++l) {
      auto [h, c] = lstm_cell(t, l, x, prev_state.h[l], prev_state.c[l]);
      out.state.h.push_back(h);
      out.state.c.push_back(c);
      x = h;
    }
    out.t = x;
    auto sc = scores(t, out.t, g_out);
    out.alpha = ad::softmax(sc);
    out.context = ad::matmul(out.alpha, g_out);
    auto tc = ad::concat_cols<T>({out.t, out.context});
    auto hidden = ad::dropout(ad::tanh(ad::add(ad::matmul(tc, t.param(*w_)), t.param(*b_))), dropout);
    out.y = ad::softmax(ad::matmul(hidden, t.param(*wout_)));
    const std::size_t ext = std::max(copy.ext_vocab_size, vocab_size_);
    if (copy.empty()) {
      out.p_copy = t.scalar(T(0));
      out.alpha_map = t.zeros({1, ext});
      out.p = ad::pad_cols(out.y, ext);
      return out;
    }
    out.p_copy = ad::sigmoid(ad::matmul(tc, t.param(*wcopy_)));
    out.alpha_map = ad::scatter_cols(ad::softmax(ad::gather_cols(sc, copy.vertices)), copy.ids, ext);
    out.p = merge_copy(out.y, out.alpha_map, out.p_copy);
    return out;
  }

 private:
  // Gates in order input, forget, candidate, output.
  std::pair<Var<T>, Var<T>> lstm_cell(Tape<T>& t, std::size_t layer, const Var<T>& x, const Var<T>& h,
                                      const Var<T>& c) const {
    const std::size_t hd = cfg_.hidden_dim;
    auto z = ad::add(ad::matmul(ad::concat_cols<T>({x, h}), t.param(*lstm_w_[layer])), t.param(*lstm_b_[layer]));
    auto i = ad::sigmoid(ad::slice_cols(z, 0, hd));
    auto f = ad::sigmoid(ad::slice_cols(z, hd, hd));
    auto g = ad::tanh(ad::slice_cols(z, 2 * hd, hd));
    auto o = ad::sigmoid(ad::slice_cols(z, 3 * hd, hd));
    auto c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
    auto h_next = ad::mul(o, ad::tanh(c_next));
    return {h_next, c_next};
  }

  DecoderConfig cfg_;
  std::size_t vocab_size_;
  Parameter<T>* embed_;
  std::vector<Parameter<T>*> lstm_w_, lstm_b_;
  Parameter<T>* wa_ = nullptr;
  Parameter<T>* wg_ = nullptr;
  Parameter<T>* va_ = nullptr;
  Parameter<T>* w_ = nullptr;
  Parameter<T>* b_ = nullptr;
  Parameter<T>* wout_ = nullptr;
  Parameter<T>* wcopy_ = nullptr;
};

}  // namespace g2s

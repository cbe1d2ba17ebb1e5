#pragma once

// Hyperparameters. Defaults are the reference configuration: batch 32,
// embeddings 128 shared between encoder and decoder, 4 heads, 2 self-attention
// layers, 1 GCN layer, 2 decoder LSTM layers, vocabulary 60000, 100-token
// vertex inputs, 32-token generation, dropout 0.1, Adam at 5e-4 halved every
// epoch for 5 epochs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "g2s/corpus.hpp"
#include "g2s/error.hpp"
#include "g2s/keywords.hpp"
#include "g2s/topic_graph.hpp"

namespace g2s {

enum class Activation { kRelu, kTanh };
enum class Pooling { kTitle, kMax, kMean };
enum class AttentionKind { kBilinear, kAdditive };

NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::kRelu, "relu"}, {Activation::kTanh, "tanh"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Pooling, {{Pooling::kTitle, "title"}, {Pooling::kMax, "max"}, {Pooling::kMean, "mean"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AttentionKind,
                             {{AttentionKind::kBilinear, "bilinear"}, {AttentionKind::kAdditive, "additive"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TokenizerMode,
                             {{TokenizerMode::kWhitespace, "whitespace"}, {TokenizerMode::kCharacter, "character"}})
NLOHMANN_JSON_SERIALIZE_ENUM(EdgeStrategy,
                             {{EdgeStrategy::kStructural, "structural"}, {EdgeStrategy::kTfidf, "tfidf"}})

struct VertexEncoderConfig {
  std::size_t embed_dim = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t max_positions = 101;  // position 0 is the keyword slot
  bool scaled_scores = true;        // divide scores by sqrt(embed_dim / heads)

  void validate() const {
    if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0)
      throw Error("embed_dim must be a positive multiple of heads");
    if (layers == 0) throw Error("self-attention layers must be >= 1");
    if (max_positions < 2) throw Error("max_positions must be >= 2");
  }
  bool operator==(const VertexEncoderConfig&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VertexEncoderConfig, embed_dim, heads, layers, max_positions, scaled_scores)

struct GcnConfig {
  std::size_t layers = 1;
  std::size_t hidden_dim = 128;
  Activation activation = Activation::kRelu;
  Pooling pooling = Pooling::kTitle;  // how the decoder's initial state is read out

  bool operator==(const GcnConfig&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GcnConfig, layers, hidden_dim, activation, pooling)

struct DecoderConfig {
  std::size_t hidden_dim = 128;
  std::size_t rnn_layers = 2;
  std::size_t max_len = 32;
  std::size_t beam_size = 1;
  AttentionKind attention = AttentionKind::kBilinear;

  bool operator==(const DecoderConfig&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DecoderConfig, hidden_dim, rnn_layers, max_len, beam_size, attention)

struct ModelConfig {
  std::size_t vocab_size = 60000;  // upper bound; the built vocabulary may be smaller
  VertexEncoderConfig encoder;
  GcnConfig gcn;
  DecoderConfig decoder;
  double dropout = 0.1;

  void validate() const {
    encoder.validate();
    if (vocab_size < 5) throw Error("vocab_size must be >= 5");
    if (gcn.layers == 0) throw Error("GCN layers must be >= 1");
    if (gcn.hidden_dim != encoder.embed_dim)
      throw Error("GCN hidden_dim must equal embed_dim (residual connections)");
    if (decoder.hidden_dim != gcn.hidden_dim)
      throw Error("decoder hidden_dim must equal the graph encoder output dim");
    if (decoder.rnn_layers == 0) throw Error("decoder rnn_layers must be >= 1");
    if (decoder.max_len == 0) throw Error("max_len must be >= 1");
    if (decoder.beam_size == 0) throw Error("beam_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must lie in [0, 1)");
  }

  /// Same model width everywhere; handy for small test models.
  static ModelConfig with_dim(std::size_t dim, std::size_t heads) {
    ModelConfig c;
    c.encoder.embed_dim = dim;
    c.encoder.heads = heads;
    c.gcn.hidden_dim = dim;
    c.decoder.hidden_dim = dim;
    return c;
  }
  bool operator==(const ModelConfig&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, vocab_size, encoder, gcn, decoder, dropout)

inline void to_json(nlohmann::json& j, const TokenizerConfig& c) { j = {{"mode", c.mode}}; }
inline void from_json(const nlohmann::json& j, TokenizerConfig& c) { j.at("mode").get_to(c.mode); }
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TextRankConfig, window, damping, max_iters, tol, top_k)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GraphOptions, max_vertex_tokens, isolate_title, strategy)

struct PipelineConfig {
  TokenizerConfig tokenizer;
  TextRankConfig textrank;
  GraphOptions graph;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PipelineConfig, tokenizer, textrank, graph)

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 0.0005;
  std::size_t epochs = 5;
  double lr_decay = 0.5;  // multiplier applied at every epoch boundary
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::optional<double> grad_clip = 5.0;  // global L2 norm bound

  void validate() const {
    if (batch_size == 0) throw Error("batch_size must be >= 1");
    if (!(lr > 0.0)) throw Error("learning rate must be > 0");
    if (grad_clip && !(*grad_clip > 0.0)) throw Error("grad_clip must be > 0");
  }

  double lr_at_epoch(std::size_t epoch) const {
    double r = lr;
    for (std::size_t e = 0; e < epoch; ++e) r *= lr_decay;
    return r;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size}, {"lr", c.lr},     {"epochs", c.epochs},     {"lr_decay", c.lr_decay},
       {"beta1", c.beta1},           {"beta2", c.beta2}, {"adam_eps", c.adam_eps}, {"seed", c.seed}};
  j["grad_clip"] = c.grad_clip ? nlohmann::json(*c.grad_clip) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("batch_size").get_to(c.batch_size);
  j.at("lr").get_to(c.lr);
  j.at("epochs").get_to(c.epochs);
  j.at("lr_decay").get_to(c.lr_decay);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("seed").get_to(c.seed);
  if (j.at("grad_clip").is_null()) {
    c.grad_clip.reset();
  } else {
    c.grad_clip = j.at("grad_clip").get<double>();
  }
}

}  // namespace g2s

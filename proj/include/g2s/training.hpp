#pragma once

// Adam with bias correction, global-norm clipping, gradient accumulation over
// variable-size graphs, a per-epoch halving schedule, and checkpoint snapshots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2s/autodiff.hpp"
#include "g2s/checkpoint.hpp"
#include "g2s/config.hpp"
#include "g2s/error.hpp"
#include "g2s/model.hpp"
#include "g2s/pipeline.hpp"

namespace g2s {

template <class T>
struct AdamState {
  std::uint64_t t = 0;
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

/// Throws NumericError naming the first parameter with a non-finite gradient.
template <class T>
void check_finite_grads(const ParamStore<T>& params) {
  for (const auto& p : params)
    for (T g : p.grad)
      if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
}

template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const TrainConfig& cfg, double lr) {
  check_finite_grads(params);
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (auto& p : params) {
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() != p.value.size()) m.assign(p.value.size(), T(0));
    if (v.size() != p.value.size()) v.assign(p.value.size(), T(0));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
    }
  }
}

/// Rescales all gradients so their global L2 norm is at most max_norm. Returns
/// the norm before clipping.
template <class T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params)
      for (auto& g : p.grad) g *= s;
  }
  return norm;
}

/// One (article, comment) pair.
struct TrainingExample {
  std::size_t graph = 0;             // index into the prepared graphs
  std::vector<std::size_t> targets;  // extended ids, EOS last
};

struct TrainingSet {
  std::vector<EncodedGraph> graphs;
  std::vector<TrainingExample> examples;
};

inline TrainingSet make_training_set(const Preprocessor& pre, const std::vector<Article>& articles) {
  TrainingSet ts;
  for (const auto& a : articles) {
    if (a.comments.empty()) continue;
    ts.graphs.push_back(pre.prepare(a).encoded);
    for (const auto& c : a.comments) ts.examples.push_back({ts.graphs.size() - 1, pre.target_ids(c, ts.graphs.back())});
  }
  return ts;
}

template <class T>
struct TrainState {
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // optimizer steps taken
  AdamState<T> adam;
};

using LogSink = std::function<void(const nlohmann::json&)>;

template <class T>
class Trainer {
 public:
  Trainer(Graph2Seq<T>& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) { cfg_.validate(); }

  const TrainConfig& config() const { return cfg_; }

  /// Example order for an epoch; a pure function of (seed, epoch).
  std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t epoch) const {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(ad::mix64(cfg_.seed) ^ ad::mix64(epoch + 1));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    return order;
  }

  /// Accumulates the gradients of (1/|batch|) * sum of example losses into the
  /// parameters (not zeroed first). Returns the mean loss.
  double accumulate(const TrainingSet& data, const std::vector<std::size_t>& batch, std::uint64_t step) {
    double total = 0.0;
    const T w = T(1) / static_cast<T>(batch.size());
    for (std::size_t slot = 0; slot < batch.size(); ++slot) {
      const auto& ex = data.examples[batch[slot]];
      ad::TapeOptions opts;
      opts.train = model_.config().dropout > 0.0;
      opts.dropout_seed = ad::mix64(cfg_.seed) ^ ad::mix64((step << 20) + slot);
      Tape<T> tape(opts);
      auto loss = model_.loss(tape, data.graphs[ex.graph], ex.targets);
      total += static_cast<double>(loss.item());
      tape.backward(ad::scale(loss, w));
    }
    return total / static_cast<double>(batch.size());
  }

  /// Runs epochs state.epoch .. cfg.epochs - 1. on_epoch_end fires after each.
  void train(const TrainingSet& data, TrainState<T>& state, const LogSink& log = {},
             const std::function<void(const TrainState<T>&)>& on_epoch_end = {}) {
    if (data.examples.empty()) throw DataError("empty corpus: no article-comment pairs to train on");
    auto& params = model_.params();
    while (state.epoch < cfg_.epochs) {
      const double lr = cfg_.lr_at_epoch(state.epoch);
      const auto order = epoch_order(data.examples.size(), state.epoch);
      double epoch_loss = 0.0;
      std::size_t epoch_batches = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
        std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
        params.zero_grad();
        const double loss = accumulate(data, batch, state.step);
        double norm = 0.0;
        if (cfg_.grad_clip) norm = clip_grad_norm(params, *cfg_.grad_clip);
        adam_step(params, state.adam, cfg_, lr);
        ++state.step;
        epoch_loss += loss;
        ++epoch_batches;
        if (log) {
          nlohmann::json j = {{"epoch", state.epoch}, {"step", state.step}, {"loss", loss}, {"lr", lr}};
          if (cfg_.grad_clip) j["grad_norm"] = norm;
          log(j);
        }
      }
      ++state.epoch;
      if (log) {
        log({{"epoch", state.epoch - 1},
             {"event", "epoch_end"},
             {"mean_loss", epoch_loss / static_cast<double>(epoch_batches)},
             {"lr", lr}});
      }
      if (on_epoch_end) on_epoch_end(state);
    }
  }

  /// Mean teacher-forced loss over all examples, dropout off.
  double evaluate(const TrainingSet& data) {
    double total = 0.0;
    for (const auto& ex : data.examples) {
      Tape<T> tape;
      total += static_cast<double>(model_.loss(tape, data.graphs[ex.graph], ex.targets).item());
    }
    return data.examples.empty() ? 0.0 : total / static_cast<double>(data.examples.size());
  }

 private:
  Graph2Seq<T>& model_;
  TrainConfig cfg_;
};

// ---------------------------------------------------------------------------
// Checkpoint snapshots

struct CheckpointInfo {
  ModelConfig model;
  PipelineConfig pipeline;
  TrainConfig train;
  std::vector<Token> vocab;  // regular tokens in id order
  TokenSet lexicon;
  TokenSet stopwords;
  CorpusStats stats;
  DType dtype = DType::kF64;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::uint64_t adam_t = 0;

  Preprocessor preprocessor() const { return Preprocessor(Vocab(vocab), pipeline, lexicon, stopwords, stats); }
};

template <class T>
NamedTensor to_named(const std::string& name, Shape shape, const std::vector<T>& values) {
  NamedTensor t;
  t.name = name;
  t.shape = {shape.rows, shape.cols};
  t.dtype = dtype_of<T>();
  t.values.assign(values.begin(), values.end());
  return t;
}

template <class T>
CheckpointFile make_checkpoint(const Graph2Seq<T>& model, const Preprocessor& pre, const TrainConfig& train,
                               const TrainState<T>& state) {
  CheckpointFile ck;
  ck.meta["format"] = "g2s-checkpoint";
  ck.meta["dtype"] = dtype_of<T>() == DType::kF32 ? "f32" : "f64";
  ck.meta["model"] = model.config();
  ck.meta["pipeline"] = pre.config();
  ck.meta["train"] = train;
  ck.meta["vocab"] = pre.vocab().regular_tokens();
  ck.meta["lexicon"] = pre.lexicon();
  ck.meta["stopwords"] = pre.stopwords();
  if (pre.config().graph.strategy == EdgeStrategy::kTfidf) {
    ck.meta["df"] = {{"documents", pre.stats().documents}, {"counts", pre.stats().df}};
  }
  ck.meta["epoch"] = state.epoch;
  ck.meta["step"] = state.step;
  ck.meta["adam_t"] = state.adam.t;
  for (const auto& p : model.params()) ck.tensors.push_back(to_named(p.name, p.shape, p.value));
  for (const auto& p : model.params()) {
    auto m = state.adam.m.find(p.name);
    auto v = state.adam.v.find(p.name);
    if (m == state.adam.m.end() || v == state.adam.v.end()) continue;
    ck.tensors.push_back(to_named("adam.m." + p.name, p.shape, m->second));
    ck.tensors.push_back(to_named("adam.v." + p.name, p.shape, v->second));
  }
  return ck;
}

inline CheckpointInfo read_checkpoint_info(const CheckpointFile& ck) {
  try {
    CheckpointInfo info;
    if (ck.meta.value("format", "") != "g2s-checkpoint") throw DataError("checkpoint metadata has an unknown format tag");
    info.dtype = ck.meta.at("dtype").get<std::string>() == "f32" ? DType::kF32 : DType::kF64;
    ck.meta.at("model").get_to(info.model);
    ck.meta.at("pipeline").get_to(info.pipeline);
    ck.meta.at("train").get_to(info.train);
    ck.meta.at("vocab").get_to(info.vocab);
    ck.meta.at("lexicon").get_to(info.lexicon);
    ck.meta.at("stopwords").get_to(info.stopwords);
    if (ck.meta.contains("df")) {
      ck.meta.at("df").at("documents").get_to(info.stats.documents);
      ck.meta.at("df").at("counts").get_to(info.stats.df);
    }
    ck.meta.at("epoch").get_to(info.epoch);
    ck.meta.at("step").get_to(info.step);
    ck.meta.at("adam_t").get_to(info.adam_t);
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata is malformed: ") + e.what());
  }
}

/// Copies stored values into the model (and optimizer state when given). Any
/// missing tensor or shape disagreement is a config mismatch.
template <class T>
void restore_checkpoint(const CheckpointFile& ck, Graph2Seq<T>& model, TrainState<T>* state = nullptr) {
  auto fill = [&](const std::string& name, Shape shape, std::vector<T>& dst) {
    const NamedTensor* t = ck.find(name);
    if (!t) throw DataError("checkpoint/config mismatch: missing tensor '" + name + "'");
    if (t->shape != std::vector<std::uint64_t>{shape.rows, shape.cols}) {
      throw DataError("checkpoint/config mismatch: tensor '" + name + "' has the wrong shape");
    }
    dst.assign(t->values.size(), T(0));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(t->values[i]);
  };
  for (auto& p : model.params()) fill(p.name, p.shape, p.value);
  if (!state) return;
  const auto info = read_checkpoint_info(ck);
  state->epoch = info.epoch;
  state->step = info.step;
  state->adam = {};
  state->adam.t = info.adam_t;
  if (info.adam_t == 0) return;
  for (auto& p : model.params()) {
    fill("adam.m." + p.name, p.shape, state->adam.m[p.name]);
    fill("adam.v." + p.name, p.shape, state->adam.v[p.name]);
  }
}

}  // namespace g2s
